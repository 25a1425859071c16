"""Desk-scale benchmark engine for multi-animal tracking and behavior recognition.

Numerical core: box geometry, bipartite assignment, set-prediction losses with
analytic gradients, a dimension-faithful toy forward pipeline, an IoU/Kalman
tracker, the full evaluation protocol (CLEAR, IDF1, HOTA, detection AP, OKS AP,
PCK, frame-level behavior mAP), a synthetic scene generator with controllable
corruption, and a CLI tying it together.
"""

__version__ = "0.1.0"
