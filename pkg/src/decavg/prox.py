"""Quadratic reference function, its conjugate map and l1-ball projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConstraintSet",
    "ProxSetup",
    "InfeasibleCenter",
    "l1_ball",
    "unconstrained",
    "l1_ball_project",
    "conjugate_map",
    "make_prox",
    "sample_l1_ball",
]

FEAS_TOL = 1e-12


class InfeasibleCenter(ValueError):
    pass


@dataclass(frozen=True)
class ConstraintSet:
    """Either an l1 ball of radius ``radius`` or the whole space."""

    kind: str
    dim: int
    radius: float | None = None

    def __post_init__(self):
        if self.kind not in ("l1_ball", "unconstrained"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if self.kind == "l1_ball" and not (self.radius is not None and self.radius > 0):
            raise ValueError("l1 ball needs a positive radius")

    @property
    def bounded(self) -> bool:
        return self.kind == "l1_ball"

    @property
    def diameter(self) -> float:
        """Euclidean diameter ``G``; ``2R`` for the l1 ball."""
        return 2.0 * self.radius if self.bounded else np.inf

    def contains(self, x, tol: float = FEAS_TOL) -> bool:
        x = np.asarray(x)
        if not self.bounded:
            return bool(np.all(np.isfinite(x)))
        return float(np.abs(x).sum()) <= self.radius + tol

    def project(self, v):
        v = np.asarray(v, dtype=float)
        return l1_ball_project(v, self.radius) if self.bounded else v.copy()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "radius": self.radius}


def l1_ball(dim: int, radius: float) -> ConstraintSet:
    return ConstraintSet("l1_ball", dim, float(radius))


def unconstrained(dim: int) -> ConstraintSet:
    return ConstraintSet("unconstrained", dim)


@dataclass(frozen=True)
class ProxSetup:
    """Reference function ``d(x) = 0.5 * ||x - center||^2`` restricted to a set."""

    center: np.ndarray
    constraint: ConstraintSet

    def d(self, x) -> float:
        diff = np.asarray(x, dtype=float) - self.center
        return 0.5 * float(diff @ diff)


def l1_ball_project(v, radius: float) -> np.ndarray:
    """Euclidean projection onto ``{x : ||x||_1 <= radius}``.

    Sort-and-threshold: find the soft threshold ``theta`` so the shrunk
    vector lands on the sphere, then apply it.  Works on the last axis, so
    a stack of points (one per row) is projected row by row.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project a non-finite point")
    if not radius > 0:
        raise ValueError("radius must be positive")
    shape = v.shape
    V = v.reshape(-1, shape[-1])
    A = np.abs(V)
    inside = A.sum(axis=1) <= radius
    if inside.all():
        return v.copy()
    mu = -np.sort(-A, axis=1)
    cums = np.cumsum(mu, axis=1) - radius
    k = np.arange(1, V.shape[1] + 1)
    active = mu - cums / k > 0
    # last active index per row
    rho = V.shape[1] - 1 - np.argmax(active[:, ::-1], axis=1)
    theta = cums[np.arange(V.shape[0]), rho] / (rho + 1)
    out = np.sign(V) * np.maximum(A - theta[:, None], 0.0)
    out[inside] = V[inside]
    return out.reshape(shape)


def conjugate_map(setup: ProxSetup, g) -> np.ndarray:
    """``argmax_{x in X} <g, x> - d(x)``, i.e. ``Project_X(center + g)``.

    Accepts a single dual point or a stack of them (one per row).
    """
    g = np.asarray(g, dtype=float)
    if g.shape[-1] != setup.center.shape[0]:
        raise ValueError(f"dual point has dimension {g.shape[-1]}, expected {setup.center.shape[0]}")
    return setup.constraint.project(setup.center + g)


def make_prox(x0, constraint: ConstraintSet) -> ProxSetup:
    """Build the quadratic reference function centred at a feasible ``x0``."""
    x0 = np.array(x0, dtype=float)
    if x0.shape != (constraint.dim,):
        raise ValueError(f"center has shape {x0.shape}, expected ({constraint.dim},)")
    if not constraint.contains(x0):
        raise InfeasibleCenter(f"center with l1 norm {np.abs(x0).sum():.6g} lies outside the ball of radius {constraint.radius}")
    x0.setflags(write=False)
    return ProxSetup(x0, constraint)


def sample_l1_ball(rng: np.random.Generator, dim: int, radius: float, size: int) -> np.ndarray:
    """Uniform samples from the l1 ball, shape ``(size, dim)``."""
    e = rng.laplace(size=(size, dim))
    e /= np.abs(e).sum(axis=1, keepdims=True)
    r = rng.random(size) ** (1.0 / dim)
    return radius * r[:, None] * e
