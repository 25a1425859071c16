"""Dimension-faithful toy forward pipeline for the video detector.

Every operation preserves the real pipeline's tensor shapes at desk scale:
3D patch partition (2x4x4x3 patches to linear tokens), four spatial stages
whose merges halve resolution and double channels, a temporal merge collapsing
the clip to one step, per-scale channel standardization, scale-major token
flattening, confidence-based query selection with cell-center anchors,
reference-point bilinear sampling, and three MLP heads (box / class /
behavior). Attention itself is replaced by the sampling step; shapes, not
accuracy, are the contract.

All arithmetic is float64 numpy, so identical inputs give bit-identical
outputs across runs and processes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import BoxRel

PATCH_T, PATCH_Y, PATCH_X = 2, 4, 4
PATCH_VALUES = PATCH_T * PATCH_Y * PATCH_X * 3  # 96 raw values per patch
PARAMS_FORMAT = "chimptrack-params-v1"


@dataclass(frozen=True)
class ModelDims:
    """Static shape configuration; defaults are the desk-scale contract."""

    frames: int = 8
    height: int = 64
    width: int = 64
    c_in: int = 16
    merge_dim: int = 16
    channels: int = 32
    queries: int = 10
    behavior_classes: int = 23
    ref_points: int = 4
    stages: int = 4

    def __post_init__(self):
        if self.frames < 2 or self.frames % 2 != 0:
            raise ValueError(f"frames must be even and >= 2, got {self.frames}")
        if self.height % 32 != 0 or self.width % 32 != 0 or self.height <= 0 or self.width <= 0:
            raise ValueError(f"height and width must be positive multiples of 32, got {self.height}x{self.width}")
        if self.stages != 4:
            raise ValueError(f"the pipeline is fixed at 4 stages, got {self.stages}")
        for name in ("c_in", "merge_dim", "channels", "queries", "behavior_classes", "ref_points"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.queries > self.token_count:
            raise ValueError(f"queries ({self.queries}) exceed the token count ({self.token_count})")

    @property
    def t_half(self) -> int:
        return self.frames // 2

    @property
    def stage_channels(self) -> tuple[int, ...]:
        return tuple(self.merge_dim * 2**i for i in range(self.stages))

    @property
    def scale_shapes(self) -> tuple[tuple[int, int], ...]:
        return tuple((self.height // (4 * 2**i), self.width // (4 * 2**i)) for i in range(self.stages))

    @property
    def token_count(self) -> int:
        return sum(h * w for h, w in self.scale_shapes)


@dataclass(frozen=True)
class HeadOutputs:
    """Per-query head outputs; box columns are (cx, cy, h, w) in [0, 1]."""

    boxes: np.ndarray        # (Q, 4)
    class_conf: np.ndarray   # (Q,)
    behavior_probs: np.ndarray  # (Q, K)


@dataclass(frozen=True)
class Detection:
    box: BoxRel
    score: float
    behavior_scores: np.ndarray       # (K,) sigmoid scores
    behaviors: tuple[int, ...]        # indices at or above the behavior threshold


@dataclass(frozen=True)
class ForwardResult:
    outputs: HeadOutputs
    token_confidence: np.ndarray      # (N,)
    selected_tokens: np.ndarray       # (Q,) indices into the flattened tokens
    anchors: np.ndarray               # (Q, 4) rows (cx, cy, h, w)
    shapes: dict[str, tuple[int, ...]]


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def patch_partition_3d(video: np.ndarray, proj: np.ndarray) -> np.ndarray:
    """Partition (T, H, W, 3) video into 2x4x4 patches and project to tokens.

    Patch values flatten in (t, y, x, channel) order before the linear map.

    Returns:
        (T/2, H/4, W/4, c_in) token grid.
    """
    video = np.asarray(video, dtype=float)
    if video.ndim != 4 or video.shape[3] != 3:
        raise ValueError(f"video must be (T, H, W, 3), got {video.shape}")
    t, h, w, _ = video.shape
    if t % PATCH_T or h % PATCH_Y or w % PATCH_X:
        raise ValueError(f"video dims {video.shape[:3]} not divisible by the {PATCH_T}x{PATCH_Y}x{PATCH_X} patch")
    if not np.isfinite(video).all():
        raise ValueError("video contains non-finite values")
    proj = np.asarray(proj, dtype=float)
    if proj.ndim != 2 or proj.shape[0] != PATCH_VALUES:
        raise ValueError(f"patch projection must be ({PATCH_VALUES}, c_in), got {proj.shape}")
    grid = video.reshape(t // PATCH_T, PATCH_T, h // PATCH_Y, PATCH_Y, w // PATCH_X, PATCH_X, 3)
    grid = grid.transpose(0, 2, 4, 1, 3, 5, 6).reshape(t // PATCH_T, h // PATCH_Y, w // PATCH_X, PATCH_VALUES)
    return grid @ proj


def stage_transform(tokens: np.ndarray, stage: int, weight: np.ndarray) -> np.ndarray:
    """Apply one backbone stage.

    Stage 1 is a pure channel map (c_in -> M) at unchanged resolution. Stages
    2..4 concatenate 2x2 spatial neighborhoods in (dy, dx) row-major order and
    apply a linear map from 4*ch to 2*ch, halving the spatial grid.
    """
    tokens = np.asarray(tokens, dtype=float)
    weight = np.asarray(weight, dtype=float)
    if tokens.ndim != 4:
        raise ValueError(f"tokens must be (T/2, H', W', ch), got {tokens.shape}")
    if stage == 1:
        if weight.shape[0] != tokens.shape[3]:
            raise ValueError(f"stage 1 map expects input channels {tokens.shape[3]}, got {weight.shape}")
        return tokens @ weight
    if stage not in (2, 3, 4):
        raise ValueError(f"stage must be in 1..4, got {stage}")
    t, h, w, ch = tokens.shape
    if h % 2 or w % 2:
        raise ValueError(f"stage {stage} needs an even spatial grid, got {h}x{w}")
    if weight.shape != (4 * ch, 2 * ch):
        raise ValueError(f"stage {stage} merge expects weight (4*{ch}, 2*{ch}), got {weight.shape}")
    merged = tokens.reshape(t, h // 2, 2, w // 2, 2, ch).transpose(0, 1, 3, 2, 4, 5)
    merged = merged.reshape(t, h // 2, w // 2, 4 * ch)
    return merged @ weight


def temporal_merge(tokens: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Collapse the temporal axis with one full-extent convolution step.

    The kernel spans all T/2 steps (stride T/2), one weight vector per
    channel, so the output temporal extent is 1 and is squeezed away.
    """
    tokens = np.asarray(tokens, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    if tokens.ndim != 4:
        raise ValueError(f"tokens must be (T/2, H', W', ch), got {tokens.shape}")
    if kernel.shape != (tokens.shape[0], tokens.shape[3]):
        raise ValueError(f"temporal kernel must be (T/2, ch) = {(tokens.shape[0], tokens.shape[3])}, got {kernel.shape}")
    return np.einsum("thwc,tc->hwc", tokens, kernel)


def channel_map(feature: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """1x1 convolution standardizing channels to the shared width."""
    feature = np.asarray(feature, dtype=float)
    weight = np.asarray(weight, dtype=float)
    if feature.ndim != 3:
        raise ValueError(f"feature must be (H', W', ch), got {feature.shape}")
    if weight.ndim != 2 or weight.shape[0] != feature.shape[2]:
        raise ValueError(f"channel map expects (ch={feature.shape[2]}, C), got {weight.shape}")
    return feature @ weight


def flatten_concat(features: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Flatten per-scale maps scale-major, row-major within each scale.

    Returns:
        tokens: (N, C) stacked feature vectors.
        index: (N, 3) integer rows (scale, row, col) locating each token.
    """
    if not features:
        raise ValueError("need at least one feature map")
    channels = features[0].shape[-1]
    tokens = []
    index = []
    for s, f in enumerate(features):
        if f.ndim != 3 or f.shape[2] != channels:
            raise ValueError(f"scale {s}: expected (H', W', {channels}), got {f.shape}")
        h, w = f.shape[:2]
        tokens.append(f.reshape(-1, channels))
        rows, cols = np.divmod(np.arange(h * w), w)
        index.append(np.stack([np.full(h * w, s), rows, cols], axis=1))
    return np.concatenate(tokens, axis=0), np.concatenate(index, axis=0)


def query_select(confidence: np.ndarray, index: np.ndarray, scale_shapes, queries: int) -> tuple[np.ndarray, np.ndarray]:
    """Pick the top-Q tokens by confidence; ties break to the lower index.

    Anchors are the selected tokens' cells: center at the cell center, height
    and width equal to one cell extent of that token's scale, all normalized.

    Returns:
        selected: (Q,) token indices in descending-confidence order.
        anchors: (Q, 4) rows (cx, cy, h, w).
    """
    confidence = np.asarray(confidence, dtype=float).reshape(-1)
    if queries > confidence.shape[0]:
        raise ValueError(f"cannot select {queries} queries from {confidence.shape[0]} tokens")
    if not np.isfinite(confidence).all():
        raise ValueError("token confidences must be finite")
    order = np.argsort(-confidence, kind="stable")  # stable: equal scores keep index order
    selected = order[:queries]
    anchors = np.empty((queries, 4), dtype=float)
    for i, tok in enumerate(selected):
        s, row, col = (int(v) for v in index[tok])
        grid_h, grid_w = scale_shapes[s]
        anchors[i] = ((col + 0.5) / grid_w, (row + 0.5) / grid_h, 1.0 / grid_h, 1.0 / grid_w)
    return selected, anchors


def bilinear_sample(feature: np.ndarray, x: float, y: float) -> np.ndarray:
    """Bilinear lookup at a normalized point; zero padding outside the map.

    Cell centers sit at ((col + 0.5) / W, (row + 0.5) / H), so the continuous
    pixel position is (x * W - 0.5, y * H - 0.5).
    """
    h, w = feature.shape[:2]
    px = x * w - 0.5
    py = y * h - 0.5
    x0 = int(np.floor(px))
    y0 = int(np.floor(py))
    fx = px - x0
    fy = py - y0
    out = np.zeros(feature.shape[2:], dtype=float)
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            r, c = y0 + dy, x0 + dx
            if 0 <= r < h and 0 <= c < w and wy * wx != 0.0:
                out = out + wy * wx * feature[r, c]
    return out


def deformable_sample(feature: np.ndarray, ref: np.ndarray, offsets: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted bilinear samples around a reference point.

    Args:
        feature: (H', W', C) map.
        ref: (2,) normalized (x, y) reference point.
        offsets: (R, 2) normalized offsets added to the reference.
        weights: (R,) non-negative weights summing to 1 within 1e-6.
    """
    offsets = np.asarray(offsets, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if offsets.ndim != 2 or offsets.shape[1] != 2 or offsets.shape[0] != weights.shape[0]:
        raise ValueError(f"offsets (R, 2) and weights (R,) disagree: {offsets.shape} vs {weights.shape}")
    if not (np.isfinite(offsets).all() and np.isfinite(weights).all()):
        raise ValueError("offsets and weights must be finite")
    if np.any(weights < 0.0):
        raise ValueError("sampling weights must be non-negative")
    if abs(float(weights.sum()) - 1.0) > 1e-6:
        raise ValueError(f"sampling weights must sum to 1 within 1e-6, got {weights.sum()}")
    out = np.zeros(feature.shape[2:], dtype=float)
    for r in range(offsets.shape[0]):
        out = out + weights[r] * bilinear_sample(feature, ref[0] + offsets[r, 0], ref[1] + offsets[r, 1])
    return out


def _mlp(x: np.ndarray, layers: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    # depth-3 MLP, tanh on the two hidden layers, linear final layer
    h = np.tanh(x @ layers[0][0] + layers[0][1])
    h = np.tanh(h @ layers[1][0] + layers[1][1])
    return h @ layers[2][0] + layers[2][1]


def _head_layers(params: dict, head: str) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(params[f"head_{head}_w{i}"], params[f"head_{head}_b{i}"]) for i in (1, 2, 3)]


def head_forward(feats: np.ndarray, params: dict) -> HeadOutputs:
    """Run the box / class / behavior MLP heads on per-query features.

    All-zero head weights give the neutral outputs: every probability 0.5 and
    every box (0.5, 0.5, 0.5, 0.5).
    """
    feats = np.asarray(feats, dtype=float)
    boxes = _sigmoid(_mlp(feats, _head_layers(params, "box")))
    cls = _sigmoid(_mlp(feats, _head_layers(params, "cls"))).reshape(-1)
    beh = _sigmoid(_mlp(feats, _head_layers(params, "beh")))
    return HeadOutputs(boxes, cls, beh)


def emit_detections(outputs, cls_thresh: float = 0.3, beh_thresh: float = 0.3) -> list[Detection]:
    """Keep queries at or above the class threshold; flag behaviors likewise.

    Accepts HeadOutputs or a full ForwardResult.
    """
    if isinstance(outputs, ForwardResult):
        outputs = outputs.outputs
    detections = []
    for q in range(outputs.class_conf.shape[0]):
        score = float(outputs.class_conf[q])
        if score < cls_thresh:
            continue
        scores = outputs.behavior_probs[q]
        active = tuple(int(k) for k in np.nonzero(scores >= beh_thresh)[0])
        cx, cy, h, w = (float(v) for v in outputs.boxes[q])
        detections.append(Detection(BoxRel(cx, cy, h, w), score, scores.copy(), active))
    return detections


def param_spec(dims: ModelDims) -> dict[str, tuple[int, ...]]:
    """Names and shapes of every tensor in a parameter set."""
    spec: dict[str, tuple[int, ...]] = {"patch_proj": (PATCH_VALUES, dims.c_in)}
    chans = dims.stage_channels
    spec["stage_map_1"] = (dims.c_in, chans[0])
    for i in (2, 3, 4):
        spec[f"stage_merge_{i}"] = (4 * chans[i - 2], 2 * chans[i - 2])
    for i in (1, 2, 3, 4):
        spec[f"temporal_kernel_{i}"] = (dims.t_half, chans[i - 1])
        spec[f"channel_map_{i}"] = (chans[i - 1], dims.channels)
    spec["deform_offsets"] = (dims.stages, dims.ref_points, 2)
    spec["deform_weights"] = (dims.stages, dims.ref_points)
    heads = {"box": 4, "cls": 1, "beh": dims.behavior_classes}
    for head, out in heads.items():
        spec[f"head_{head}_w1"] = (dims.channels, dims.channels)
        spec[f"head_{head}_b1"] = (dims.channels,)
        spec[f"head_{head}_w2"] = (dims.channels, dims.channels)
        spec[f"head_{head}_b2"] = (dims.channels,)
        spec[f"head_{head}_w3"] = (dims.channels, out)
        spec[f"head_{head}_b3"] = (out,)
    return spec


def validate_params(params: dict, dims: ModelDims) -> None:
    spec = param_spec(dims)
    missing = sorted(set(spec) - set(params))
    if missing:
        raise ValueError(f"missing parameter tensors: {missing}")
    unknown = sorted(set(params) - set(spec))
    if unknown:
        raise ValueError(f"unknown parameter tensors: {unknown}")
    for name, shape in spec.items():
        actual = np.asarray(params[name]).shape
        if actual != shape:
            raise ValueError(f"parameter {name!r} has shape {actual}, expected {shape}")
        if not np.isfinite(params[name]).all():
            raise ValueError(f"parameter {name!r} contains non-finite values")


def init_params(dims: ModelDims, seed: int = 0) -> dict[str, np.ndarray]:
    """Random small-weight initialization, reproducible from the seed."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_spec(dims).items():
        fan_in = shape[0] if len(shape) > 1 else shape[0]
        params[name] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)
    # offsets stay small; weights become a convex combination per scale
    params["deform_offsets"] = rng.normal(0.0, 0.02, size=(dims.stages, dims.ref_points, 2))
    raw = np.abs(rng.normal(1.0, 0.25, size=(dims.stages, dims.ref_points))) + 1e-3
    params["deform_weights"] = raw / raw.sum(axis=1, keepdims=True)
    return params


def averaging_params(dims: ModelDims) -> dict[str, np.ndarray]:
    """Uniform-averaging weights: constant inputs stay constant at every step.

    Head weights are zero, so outputs sit at the neutral point (0.5).
    """
    params = {}
    for name, shape in param_spec(dims).items():
        if name.startswith(("stage_map", "stage_merge", "channel_map", "patch_proj")):
            params[name] = np.full(shape, 1.0 / shape[0])
        elif name.startswith("temporal_kernel"):
            params[name] = np.full(shape, 1.0 / shape[0])
        elif name == "deform_offsets":
            params[name] = np.zeros(shape)
        elif name == "deform_weights":
            params[name] = np.full(shape, 1.0 / dims.ref_points)
        else:
            params[name] = np.zeros(shape)
    return params


def save_params(params: dict[str, np.ndarray], path: str | Path) -> None:
    """Write parameters as named flat tensors in JSON; reload is bit-exact."""
    doc = {
        "format": PARAMS_FORMAT,
        "tensors": {
            name: {"shape": list(np.asarray(t).shape), "data": np.asarray(t, dtype=float).reshape(-1).tolist()}
            for name, t in sorted(params.items())
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_params(path: str | Path) -> dict[str, np.ndarray]:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict) or doc.get("format") != PARAMS_FORMAT:
        raise ValueError(f"not a {PARAMS_FORMAT} file: {path}")
    params = {}
    for name, entry in doc["tensors"].items():
        data = np.asarray(entry["data"], dtype=float)
        shape = tuple(entry["shape"])
        if data.size != int(np.prod(shape)):
            raise ValueError(f"tensor {name!r}: {data.size} values do not fill shape {shape}")
        params[name] = data.reshape(shape)
    return params


def toy_forward(video: np.ndarray, params: dict, dims: ModelDims) -> ForwardResult:
    """Run the full toy pipeline on one clip.

    The auxiliary token confidence shares the class head's weights, applied
    per token. Per-query features average one deformable sample per scale,
    taken at the query's anchor center.
    """
    video = np.asarray(video, dtype=float)
    expected = (dims.frames, dims.height, dims.width, 3)
    if video.shape != expected:
        raise ValueError(f"video shape {video.shape} does not match dims {expected}")
    validate_params(params, dims)
    shapes: dict[str, tuple[int, ...]] = {}

    tokens4d = patch_partition_3d(video, params["patch_proj"])
    shapes["patch_tokens"] = tokens4d.shape

    stage_out = stage_transform(tokens4d, 1, params["stage_map_1"])
    stage_maps = [stage_out]
    shapes["stage_1"] = stage_out.shape
    for i in (2, 3, 4):
        stage_out = stage_transform(stage_out, i, params[f"stage_merge_{i}"])
        stage_maps.append(stage_out)
        shapes[f"stage_{i}"] = stage_out.shape

    features = []
    for i, v in enumerate(stage_maps, start=1):
        f = channel_map(temporal_merge(v, params[f"temporal_kernel_{i}"]), params[f"channel_map_{i}"])
        features.append(f)
        shapes[f"fused_{i}"] = f.shape

    tokens, index = flatten_concat(features)
    shapes["tokens"] = tokens.shape

    confidence = _sigmoid(_mlp(tokens, _head_layers(params, "cls"))).reshape(-1)
    selected, anchors = query_select(confidence, index, dims.scale_shapes, dims.queries)

    feats = np.empty((dims.queries, dims.channels), dtype=float)
    for i in range(dims.queries):
        ref = anchors[i, :2]  # (cx, cy)
        sampled = np.zeros(dims.channels, dtype=float)
        for s, f in enumerate(features):
            sampled += deformable_sample(f, ref, params["deform_offsets"][s], params["deform_weights"][s])
        feats[i] = sampled / len(features)
    shapes["query_features"] = feats.shape

    outputs = head_forward(feats, params)
    shapes["boxes"] = outputs.boxes.shape
    shapes["class_conf"] = outputs.class_conf.shape
    shapes["behavior_probs"] = outputs.behavior_probs.shape
    return ForwardResult(outputs, confidence, selected, anchors, shapes)
