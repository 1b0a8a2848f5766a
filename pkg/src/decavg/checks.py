"""Self-checks of the projection and conjugate map against brute-force oracles."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .prox import conjugate_map, l1_ball, l1_ball_project, make_prox, sample_l1_ball


def unit_ball_grid(points_per_axis: int = 2001) -> np.ndarray:
    """Points of a uniform grid on ``[-1, 1]^2`` that lie in the unit l1 ball.

    With an odd point count the grid contains the vertices and points on
    every edge of the ball exactly.
    """
    ax = np.linspace(-1.0, 1.0, points_per_axis)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    return pts[np.abs(pts).sum(axis=1) <= 1.0 + 1e-12]


def projection_report(pairs: int = 200, seed: int = 0, grid: int = 2001, kkt_samples: int = 200) -> dict:
    """Compare the sort-based projection in 2-D with KKT and grid oracles.

    Returns the worst KKT residual, worst objective gap to the grid argmin,
    worst nonexpansiveness excess of the conjugate map, and an ``ok`` flag.
    """
    rng = np.random.default_rng(seed)
    pts = unit_ball_grid(grid)
    tree = cKDTree(pts)
    worst_kkt = worst_gap = worst_expand = -np.inf
    for _ in range(pairs):
        R = float(rng.uniform(0.1, 3.0))
        v = rng.normal(scale=2.0, size=2)
        p = l1_ball_project(v, R)
        Q = np.vstack([sample_l1_ball(rng, 2, R, kkt_samples), R * np.eye(2), -R * np.eye(2)])
        worst_kkt = max(worst_kkt, float(np.max((Q - p) @ (v - p))))
        _, k = tree.query(v / R)
        best = R * pts[k]
        gap = 0.5 * float(np.sum((p - v) ** 2)) - 0.5 * float(np.sum((best - v) ** 2))
        worst_gap = max(worst_gap, abs(gap))

        setup = make_prox(sample_l1_ball(rng, 2, R, 1)[0], l1_ball(2, R))
        g1, g2 = rng.normal(scale=3.0, size=(2, 2))
        excess = np.linalg.norm(conjugate_map(setup, g1) - conjugate_map(setup, g2)) - np.linalg.norm(g1 - g2)
        worst_expand = max(worst_expand, float(excess))
    return {
        "pairs": pairs,
        "max_kkt_residual": worst_kkt,
        "max_grid_gap": worst_gap,
        "max_nonexpansive_excess": worst_expand,
        "ok": bool(worst_kkt <= 1e-9 and worst_gap <= 1e-3 and worst_expand <= 1e-12),
    }
