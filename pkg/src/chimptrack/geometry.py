"""Axis-aligned box geometry in pixel and normalized coordinates.

Two layouts are used throughout: corner form ``BoxXYXY`` (x1, y1, x2, y2) in
absolute pixels and center form ``BoxRel`` (cx, cy, h, w) normalized to the
unit square. Note the center form orders height before width.

Areas follow half-open semantics: area = (x2 - x1) * (y2 - y1), so boxes that
touch only along an edge have zero intersection.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class BoxXYXY(NamedTuple):
    x1: float
    y1: float
    x2: float
    y2: float


class BoxRel(NamedTuple):
    """Center-form box on the unit square: (cx, cy, h, w)."""

    cx: float
    cy: float
    h: float
    w: float


class ImageSize(NamedTuple):
    width: int
    height: int


def area(box) -> float:
    """Half-open area of a corner-form box; negative extents clamp to zero."""
    x1, y1, x2, y2 = box
    return max(0.0, x2 - x1) * max(0.0, y2 - y1)


def intersection(a, b) -> float:
    ax1, ay1, ax2, ay2 = a
    bx1, by1, bx2, by2 = b
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    return iw * ih


def iou(a, b) -> float:
    """Intersection over union of two corner-form boxes.

    A zero-area box has IoU 0 with anything, including itself.
    """
    inter = intersection(a, b)
    union = area(a) + area(b) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def giou(a, b) -> float:
    """Generalized IoU: IoU minus the non-covered fraction of the enclosing box.

    Ranges over (-1, 1]. Raises ValueError when the enclosing box is
    degenerate (both inputs collapse onto a shared point or axis line),
    which would divide by zero.
    """
    ax1, ay1, ax2, ay2 = a
    bx1, by1, bx2, by2 = b
    cw = max(ax2, bx2) - min(ax1, bx1)
    ch = max(ay2, by2) - min(ay1, by1)
    enclose = cw * ch
    if enclose <= 0.0:
        raise ValueError("giou undefined: enclosing box has zero area")
    inter = intersection(a, b)
    union = area(a) + area(b) - inter
    iou_term = inter / union if union > 0.0 else 0.0
    return iou_term - (enclose - union) / enclose


def rel_to_abs(box: BoxRel, size: ImageSize) -> BoxXYXY:
    """Map a normalized center-form box onto pixel corners for an image size."""
    cx, cy, h, w = box
    width, height = size
    if width <= 0 or height <= 0:
        raise ValueError(f"image size must be positive, got {size}")
    return BoxXYXY(
        (cx - w / 2.0) * width,
        (cy - h / 2.0) * height,
        (cx + w / 2.0) * width,
        (cy + h / 2.0) * height,
    )


def abs_to_rel(box, size: ImageSize) -> BoxRel:
    """Inverse of rel_to_abs; exact round trip up to float rounding."""
    x1, y1, x2, y2 = box
    width, height = size
    if width <= 0 or height <= 0:
        raise ValueError(f"image size must be positive, got {size}")
    return BoxRel(
        (x1 + x2) / 2.0 / width,
        (y1 + y2) / 2.0 / height,
        (y2 - y1) / height,
        (x2 - x1) / width,
    )


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between two stacks of corner-form boxes.

    Args:
        a: (n, 4) array.
        b: (m, 4) array.

    Returns:
        (n, m) array of IoU values; rows or columns for zero-area boxes are 0.
    """
    a = np.asarray(a, dtype=float).reshape(-1, 4)
    b = np.asarray(b, dtype=float).reshape(-1, 4)
    ix1 = np.maximum(a[:, None, 0], b[None, :, 0])
    iy1 = np.maximum(a[:, None, 1], b[None, :, 1])
    ix2 = np.minimum(a[:, None, 2], b[None, :, 2])
    iy2 = np.minimum(a[:, None, 3], b[None, :, 3])
    inter = np.clip(ix2 - ix1, 0.0, None) * np.clip(iy2 - iy1, 0.0, None)
    area_a = np.clip(a[:, 2] - a[:, 0], 0.0, None) * np.clip(a[:, 3] - a[:, 1], 0.0, None)
    area_b = np.clip(b[:, 2] - b[:, 0], 0.0, None) * np.clip(b[:, 3] - b[:, 1], 0.0, None)
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out


def rel_to_corners(box) -> np.ndarray:
    """Center-form (cx, cy, h, w) to corner-form (x1, y1, x2, y2) on the unit frame."""
    cx, cy, h, w = box
    return np.array([cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0], dtype=float)
