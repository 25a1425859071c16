"""Bipartite assignment: optimal matching, greedy gated matching, matching costs.

All matchers operate on dense float cost matrices. Rectangular inputs yield
min(rows, cols) pairs; there is no padding. Ties between equally cheap optima
resolve deterministically to the lexicographically smallest pair list ordered
by (row, col).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import giou, rel_to_corners


class Assignment(NamedTuple):
    pairs: tuple[tuple[int, int], ...]
    total_cost: float


@dataclass(frozen=True)
class MatchWeights:
    """Weights and focal constants for the detection matching cost."""

    cls: float = 2.0
    l1: float = 5.0
    giou: float = 2.0
    alpha: float = 0.25
    gamma: float = 2.0


def _as_cost(cost) -> np.ndarray:
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {cost.shape}")
    if cost.size and not np.isfinite(cost).all():
        raise ValueError("cost matrix entries must be finite")
    return cost


def hungarian(cost) -> Assignment:
    """Minimum-total-cost maximum matching of a dense cost matrix.

    Returns min(rows, cols) pairs. Among equal-cost optima the result is the
    lexicographically smallest pair list: rows are committed in ascending
    order to the smallest column whose completion still attains the optimal
    total (tolerance 1e-9 relative to the optimum, to absorb summation-order
    drift when re-solving subproblems).
    """
    cost = _as_cost(cost)
    n_rows, n_cols = cost.shape
    target = min(n_rows, n_cols)
    if target == 0:
        return Assignment((), 0.0)
    rows, cols = linear_sum_assignment(cost)
    best = float(cost[rows, cols].sum())
    tol = 1e-9 * max(1.0, abs(best))

    pairs: list[tuple[int, int]] = []
    avail = list(range(n_cols))
    fixed = 0.0
    for r in range(n_rows):
        if len(pairs) == target:
            break
        need = target - len(pairs) - 1
        chosen = None
        for c in avail:
            rest_rows = n_rows - r - 1
            if need:
                if rest_rows < need:
                    continue
                sub = cost[r + 1 :, [cc for cc in avail if cc != c]]
                rr, cc = linear_sum_assignment(sub)
                completion = float(sub[rr, cc].sum())
            else:
                completion = 0.0
            if fixed + cost[r, c] + completion <= best + tol:
                chosen = c
                break
        if chosen is None:
            # leaving this row unmatched is the only optimal continuation
            continue
        pairs.append((r, chosen))
        avail.remove(chosen)
        fixed += cost[r, chosen]

    idx = np.array(pairs, dtype=int).reshape(-1, 2)
    total = float(cost[idx[:, 0], idx[:, 1]].sum())
    return Assignment(tuple(pairs), total)


def greedy_match(cost, gate: float) -> Assignment:
    """Greedy matching: repeatedly take the globally smallest entry <= gate.

    Each accepted pair removes its row and column. Ties resolve to the lowest
    row, then lowest column. Stops when no remaining entry passes the gate.
    """
    cost = _as_cost(cost)
    if not np.isfinite(gate):
        raise ValueError("gate must be finite")
    work = cost.copy()
    n_rows, n_cols = work.shape
    pairs: list[tuple[int, int]] = []
    total = 0.0
    for _ in range(min(n_rows, n_cols)):
        flat = np.argmin(work)  # first occurrence in C order: lowest row, then col
        r, c = divmod(int(flat), n_cols)
        if not work[r, c] <= gate:
            break
        pairs.append((r, c))
        total += float(cost[r, c])
        work[r, :] = np.inf
        work[:, c] = np.inf
    return Assignment(tuple(pairs), total)


def focal_positive_cost(p: float, alpha: float = 0.25, gamma: float = 2.0) -> float:
    """Focal-style cost of declaring probability p a positive: alpha*(1-p)^gamma*(-log p)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie strictly inside (0, 1), got {p}")
    return alpha * (1.0 - p) ** gamma * -np.log(p)


def detr_cost(class_probs, pred_boxes, gt_boxes, weights: MatchWeights = MatchWeights()) -> np.ndarray:
    """Matching cost between predicted detections and ground-truth boxes.

    entry(q, g) = w.cls * focal_positive_cost(p_q)
                + w.l1 * ||b_q - t_g||_1
                + w.giou * (1 - GIoU(b_q, t_g))

    Boxes are normalized center-form (cx, cy, h, w). Behavior scores do not
    enter the matching cost.

    Args:
        class_probs: (Q,) class probabilities, each strictly inside (0, 1).
        pred_boxes: (Q, 4) predicted boxes.
        gt_boxes: (G, 4) ground-truth boxes.

    Returns:
        (Q, G) cost matrix.
    """
    p = np.asarray(class_probs, dtype=float).reshape(-1)
    pred = np.asarray(pred_boxes, dtype=float).reshape(-1, 4)
    gt = np.asarray(gt_boxes, dtype=float).reshape(-1, 4)
    if pred.shape[0] != p.shape[0]:
        raise ValueError("class_probs and pred_boxes disagree on the number of queries")
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("class probabilities must lie strictly inside (0, 1)")

    cls_cost = weights.alpha * (1.0 - p) ** weights.gamma * -np.log(p)
    l1 = np.abs(pred[:, None, :] - gt[None, :, :]).sum(axis=2)
    out = np.empty((pred.shape[0], gt.shape[0]), dtype=float)
    for q in range(pred.shape[0]):
        bq = rel_to_corners(pred[q])
        for g in range(gt.shape[0]):
            out[q, g] = 1.0 - giou(bq, rel_to_corners(gt[g]))
    return weights.cls * cls_cost[:, None] + weights.l1 * l1 + weights.giou * out
