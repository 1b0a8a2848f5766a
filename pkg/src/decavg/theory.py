"""Step-size admissibility and the constants in the DDA / ADDA rate bounds."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

__all__ = [
    "ConstantsError",
    "StepVerdict",
    "TheoremConstants",
    "consensus_matrix",
    "rho_M",
    "dda_condition_slack",
    "explicit_step_bound",
    "exact_step_bound",
    "dda_stepsize_admissible",
    "auto_dda_step",
    "adda_stepsize_admissible",
    "adda_weights",
    "gradient_spread",
    "compute_constants",
    "corollary_admissible",
]

SAFETY = 0.99


class ConstantsError(ValueError):
    """Raised when the requested constants are undefined for the given step."""


def _check(a, L, beta):
    if not a > 0:
        raise ValueError(f"step constant must be positive, got {a}")
    if not L > 0:
        raise ValueError(f"smoothness constant must be positive, got {L}")
    if not 0 <= beta < 1:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")


def consensus_matrix(a: float, L: float, beta: float) -> np.ndarray:
    """The 2x2 nonnegative matrix propagating DDA's consensus errors."""
    _check(a, L, beta)
    return np.array([[beta, beta], [a * L * (beta + 1), beta * (a * L + 1)]])


def rho_M(a: float, L: float, beta: float) -> float:
    """Spectral radius of :func:`consensus_matrix` in closed form.

    ``(xi1 + xi2) / 2`` with ``xi1 = beta (2 + aL)`` and
    ``xi2 = sqrt(a^2 beta^2 L^2 + 4 aL beta (beta + 1))``.
    """
    _check(a, L, beta)
    aL = a * L
    xi1 = beta * (2.0 + aL)
    xi2 = math.sqrt(aL * aL * beta * beta + 4.0 * aL * beta * (beta + 1.0))
    return 0.5 * (xi1 + xi2)


def dda_condition_slack(a: float, L: float, beta: float, factor: float = 8.0 / 9.0) -> float:
    """``1/a - 2L max{beta/(1-beta)^2, 1 + factor/(1-rho^2)}``.

    Positive exactly when the step condition holds. ``factor`` is ``8/9``
    for the constrained rate and ``8/3`` for the unconstrained corollary.
    Returns ``-inf`` when ``rho >= 1``.
    """
    rho = rho_M(a, L, beta)
    if rho >= 1.0:
        return -math.inf
    rhs = 2.0 * L * max(beta / (1.0 - beta) ** 2, 1.0 + factor / (1.0 - rho * rho))
    return 1.0 / a - rhs


def explicit_step_bound(L: float, beta: float) -> float | None:
    """Largest step allowed by the beta-only sufficient condition.

    The condition replaces ``rho(M)`` by its value at ``a = 1/(2L)``,
    ``kappa = (2.5 beta + sqrt(2.25 beta^2 + 2 beta)) / 2``. It is only
    meaningful while ``kappa < 1``, i.e. ``beta < (3 - sqrt 5) / 2``;
    ``None`` is returned beyond that.
    """
    _check(1.0, L, beta)
    kappa = 0.5 * (2.5 * beta + math.sqrt(2.25 * beta * beta + 2.0 * beta))
    if kappa >= 1.0:
        return None
    return 1.0 / (2.0 * L * max(beta / (1.0 - beta) ** 2, 1.0 + 1.0 / (1.0 - kappa * kappa)))


def exact_step_bound(L: float, beta: float, factor: float = 8.0 / 9.0, rtol: float = 1e-12) -> float:
    """Supremum of the steps satisfying the exact (implicit) condition.

    The slack is strictly decreasing in ``a``, so the admissible set is an
    interval ``(0, a_max)``; bisection runs on ``(0, 1/(2L(1 + factor))]``.
    """
    _check(1.0, L, beta)
    hi = 1.0 / (2.0 * L * (1.0 + factor))
    if beta == 0.0:
        return hi
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if dda_condition_slack(mid, L, beta, factor) > 0:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class StepVerdict:
    admissible: bool
    margin: float
    rho: float | None
    explicit_bound: float | None
    exact_bound: float
    scale: float  # (1 - beta)^2 / L

    def __bool__(self):
        return self.admissible


def dda_stepsize_admissible(a: float, L: float, beta: float) -> StepVerdict:
    """Check the DDA step condition at ``a``; ``margin`` is the slack in ``1/a``."""
    rho = rho_M(a, L, beta)
    slack = dda_condition_slack(a, L, beta)
    return StepVerdict(
        admissible=slack > 0,
        margin=slack,
        rho=rho,
        explicit_bound=explicit_step_bound(L, beta),
        exact_bound=exact_step_bound(L, beta),
        scale=(1.0 - beta) ** 2 / L,
    )


def auto_dda_step(L: float, beta: float) -> float:
    """Default DDA step: 0.99 times the explicit bound, or the exact bound where
    the explicit one is undefined."""
    bound = explicit_step_bound(L, beta)
    if bound is None:
        bound = exact_step_bound(L, beta)
    return SAFETY * bound


def adda_stepsize_admissible(a: float, L: float) -> bool:
    """ADDA's condition ``a <= 1/(6L)``."""
    if not a > 0:
        raise ValueError(f"step constant must be positive, got {a}")
    if not L > 0:
        raise ValueError(f"smoothness constant must be positive, got {L}")
    return a <= 1.0 / (6.0 * L)


def adda_weights(a: float, t: int) -> tuple[float, float]:
    """``(a_t, A_t) = (a (t+1), a t (t+3) / 2)`` for ``t >= 1``."""
    if t < 1:
        raise ValueError("weights are defined for t >= 1")
    return a * (t + 1), a * t * (t + 3) / 2.0


def gradient_spread(prob, x0) -> float:
    """Sum over agents of ``||grad f_i(x0) - mean_j grad f_j(x0)||^2``."""
    G = prob.local_grads(np.broadcast_to(np.asarray(x0, dtype=float), (prob.n, prob.m)))
    dev = G - G.mean(axis=0)
    return float(np.sum(dev * dev))


@dataclass(frozen=True)
class TheoremConstants:
    """Constants entering the DDA and ADDA bounds for one configuration.

    Fields that do not apply (e.g. ``gamma`` for ADDA, ``C_p`` on an
    unbounded set) are ``None``.
    """

    algorithm: str
    a: float
    L: float
    n: int
    beta: float
    rho: float | None
    pi_sq: float
    d_star: float
    G: float | None = None
    gamma: float | None = None
    C: float | None = None
    D: float | None = None
    C_p: float | None = None
    C_g: float | None = None
    corollary: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def dda_objective_bound(self, t: int) -> float:
        """``C / (a t)``."""
        return self.C / (self.a * t)

    def dda_gap_bound(self, t: int) -> float:
        """``D / t``."""
        return self.D / t

    def adda_objective_bound(self, t: int) -> float:
        """Right-hand side of the ADDA objective bound at round ``t``."""
        _, A = adda_weights(self.a, t)
        rate = 2.0 * self.G * (self.L * self.C_p + self.C_g) / math.sqrt(self.n) + 6.0 * self.L * self.C_p ** 2 / self.n
        return self.d_star / A + t * rate / A

    def adda_consensus_bound(self, t: int) -> float:
        """``(a_t / A_t) C_p``, bounding the stacked deviation of ``u`` and ``v``."""
        at, A = adda_weights(self.a, t)
        return at / A * self.C_p


def corollary_admissible(a: float, L: float, beta: float) -> bool:
    """Stricter step condition required for the unconstrained per-agent rate."""
    return dda_condition_slack(a, L, beta, factor=8.0 / 3.0) > 0


def compute_constants(prob, mixing, prox, a: float, x_star, algorithm: str = "dda") -> TheoremConstants:
    """Evaluate the bound constants for ``algorithm`` in {"dda", "adda"}.

    Raises
    ------
    ConstantsError
        For DDA when ``gamma <= 0`` (the step condition is violated); for
        ADDA when the set is unbounded.
    """
    L, beta, n = prob.L, mixing.beta, prob.n
    x0 = prox.center
    pi_sq = gradient_spread(prob, x0)
    d_star = prox.d(x_star)
    rho = rho_M(a, L, beta)
    bounded = prox.constraint.bounded
    G = prox.constraint.diameter if bounded else None

    C_p = C_g = None
    if bounded:
        k = math.ceil(3.0 / (1.0 - beta))
        C_p = k * math.sqrt(n) * G
        C_g = 2.0 * L * k * (math.sqrt(n) * G + C_p) / (1.0 - beta)

    if algorithm == "adda":
        if not bounded:
            raise ConstantsError("ADDA constants need a bounded constraint set")
        return TheoremConstants("adda", a, L, n, beta, None, pi_sq, d_star, G=G, C_p=C_p, C_g=C_g)
    if algorithm != "dda":
        raise ValueError(f"unknown algorithm {algorithm!r}")

    if rho >= 1.0:
        raise ConstantsError(f"rho(M) = {rho:.6g} >= 1; the step condition is violated")
    one_m_r2 = 1.0 - rho * rho
    gamma = 0.5 - a * L - 8.0 * a * L / (9.0 * one_m_r2)
    if gamma <= 0:
        raise ConstantsError(f"gamma = {gamma:.6g} <= 0; the step condition is violated")
    C = d_star + 8.0 * a * pi_sq / (9.0 * n * L * one_m_r2)
    D = 8.0 * n * C / (9.0 * gamma * (1.0 - rho) ** 2) + 8.0 * pi_sq / (9.0 * L * L * one_m_r2)
    corollary = None
    if not bounded:
        corollary = n / (2.0 * a) * float(x_star @ x_star) + 8.0 * pi_sq / (3.0 * L * one_m_r2)
    return TheoremConstants("dda", a, L, n, beta, rho, pi_sq, d_star, G=G, gamma=gamma, C=C, D=D,
                            C_p=C_p, C_g=C_g, corollary=corollary)
