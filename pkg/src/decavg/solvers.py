"""Round transitions for DDA, ADDA and the baseline methods.

Every ``*_round`` function takes the global state after round ``t`` and
returns a fresh state for round ``t + 1``; inputs are never mutated.
Per-agent quantities are stacked row-wise into ``(n, m)`` arrays, so a
product ``P @ X`` is one synchronous exchange with the neighbours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .prox import conjugate_map
from .theory import adda_weights

__all__ = [
    "Divergence",
    "DdaState",
    "AddaState",
    "ClassicDdaState",
    "PgExtraState",
    "ApmState",
    "dda_init",
    "dda_round",
    "adda_init",
    "adda_round",
    "classic_dda_init",
    "classic_dda_round",
    "pg_extra_init",
    "pg_extra_round",
    "apm_init",
    "apm_round",
    "apm_beta0",
    "apm_thetas",
    "centralized_da_run",
    "centralized_ada_run",
    "AdaPath",
]


class Divergence(RuntimeError):
    def __init__(self, algorithm: str, t: int, detail: str = "non-finite iterate"):
        super().__init__(f"{algorithm} diverged at round {t}: {detail}")
        self.algorithm = algorithm
        self.t = t


def _finite(algorithm, t, *arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise Divergence(algorithm, t)


def _stack(x0, n):
    return np.tile(np.asarray(x0, dtype=float), (n, 1))


# --------------------------------------------------------------------- DDA


@dataclass(frozen=True)
class DdaState:
    """DDA iterates after round ``t``.

    ``g`` caches the local gradients at ``x``; ``y`` is the auxiliary point
    obtained from the network-average dual variable, and ``x_sum`` /
    ``y_sum`` accumulate rounds ``1..t`` for the running averages.
    """

    t: int
    x: np.ndarray
    z: np.ndarray
    s: np.ndarray
    g: np.ndarray
    y: np.ndarray
    x_sum: np.ndarray
    y_sum: np.ndarray

    @property
    def x_avg(self):
        return self.x_sum / self.t

    @property
    def y_avg(self):
        return self.y_sum / self.t


def dda_init(prob, prox) -> DdaState:
    x = _stack(prox.center, prob.n)
    g = prob.local_grads(x)
    return DdaState(0, x, np.zeros_like(x), g.copy(), g, prox.center.copy(),
                    np.zeros_like(x), np.zeros(prob.m))


def dda_round(state: DdaState, prob, mixing, prox, a: float) -> DdaState:
    """One DDA round: mix ``z + s``, take the local dual-averaging step, then
    update the gradient tracker with the fresh local gradients."""
    if not a > 0:
        raise ValueError("step constant must be positive")
    P = mixing.weights
    t = state.t + 1
    z = P @ (state.z + state.s)
    x = conjugate_map(prox, -a * z)
    g = prob.local_grads(x)
    s = P @ state.s + g - state.g
    y = conjugate_map(prox, -a * z.mean(axis=0))
    _finite("dda", t, z, s, x)
    return DdaState(t, x, z, s, g, y, state.x_sum + x, state.y_sum + y)


# -------------------------------------------------------------------- ADDA


@dataclass(frozen=True)
class AddaState:
    """ADDA iterates after round ``t`` (``t >= 1``).

    ``dual`` is the running sum of ``a_tau q_i^(tau)``; ``g`` caches the
    local gradients at ``u``.
    """

    t: int
    a: float
    a_t: float
    A_t: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    q: np.ndarray
    g: np.ndarray
    dual: np.ndarray


def adda_init(prob, prox, a: float) -> AddaState:
    """Initialization: ``A_1 = a_1 = 2a``, ``u = x0``, ``q = grad f_i(x0)``,
    ``v = w = conj(-a_1 q)``."""
    if not a > 0:
        raise ValueError("step constant must be positive")
    a1, A1 = adda_weights(a, 1)
    u = _stack(prox.center, prob.n)
    g = prob.local_grads(u)
    dual = a1 * g
    w = conjugate_map(prox, -dual)
    _finite("adda", 1, w)
    return AddaState(1, a, a1, A1, u, w.copy(), w, g.copy(), g, dual)


def adda_round(state: AddaState, prob, mixing, prox) -> AddaState:
    P = mixing.weights
    t = state.t + 1
    a_t = state.a_t + state.a
    A_t = state.A_t + a_t
    keep, new = state.A_t / A_t, a_t / A_t
    # one exchange of v, shared by the u and v updates
    Pv = P @ state.v
    u = keep * Pv + new * state.w
    g = prob.local_grads(u)
    q = P @ state.q + g - state.g
    dual = state.dual + a_t * q
    w = conjugate_map(prox, -dual)
    v = keep * Pv + new * w
    _finite("adda", t, u, q, v)
    return AddaState(t, state.a, a_t, A_t, u, v, w, q, g, dual)


# ------------------------------------------------------------ classic DDA


@dataclass(frozen=True)
class ClassicDdaState:
    t: int
    x: np.ndarray
    z: np.ndarray


def classic_dda_init(prob, prox) -> ClassicDdaState:
    x = _stack(prox.center, prob.n)
    return ClassicDdaState(0, x, np.zeros_like(x))


def classic_dda_round(state: ClassicDdaState, prob, mixing, prox, a: float, decay: bool = True) -> ClassicDdaState:
    """``z_i <- sum_j p_ij z_j + grad f_i(x_i)``, then ``x_i = conj(-a_t z_i)``
    with ``a_t = a / sqrt(t)`` (or ``a`` when ``decay`` is off)."""
    t = state.t + 1
    z = mixing.weights @ state.z + prob.local_grads(state.x)
    a_t = a / math.sqrt(t) if decay else a
    x = conjugate_map(prox, -a_t * z)
    _finite("classic_dda", t, z, x)
    return ClassicDdaState(t, x, z)


# --------------------------------------------------------------- PG-EXTRA


@dataclass(frozen=True)
class PgExtraState:
    t: int
    x: np.ndarray
    x_prev: np.ndarray
    x_hat: np.ndarray
    g: np.ndarray
    g_prev: np.ndarray


def pg_extra_init(prob, prox) -> PgExtraState:
    x = _stack(prox.center, prob.n)
    g = prob.local_grads(x)
    return PgExtraState(0, x, x.copy(), x.copy(), g, g.copy())


def pg_extra_round(state: PgExtraState, prob, mixing, a: float) -> PgExtraState:
    """PG-EXTRA with ``P~ = (P + I) / 2``.

    The first round has no ``x^(-1)`` and takes the plain step
    ``x_hat^(1) = P x^(0) - a grad f(x^(0))``.
    """
    P = mixing.weights
    t = state.t + 1
    if state.t == 0:
        x_hat = P @ state.x - a * state.g
    else:
        P_tilde = 0.5 * (P + np.eye(P.shape[0]))
        x_hat = P @ state.x + state.x_hat - P_tilde @ state.x_prev - a * (state.g - state.g_prev)
    x = prob.constraint.project(x_hat)
    g = prob.local_grads(x)
    _finite("pg_extra", t, x_hat)
    return PgExtraState(t, x, state.x, x_hat, g, state.g)


# -------------------------------------------------------------------- APM


def apm_beta0(L_param: float, mixing) -> float:
    """``L / sqrt(1 - lambda_2(P))``; undefined for a disconnected network."""
    lam2 = mixing.lambda2()
    if lam2 >= 1.0 - 1e-12:
        raise ValueError(f"lambda_2(P) = {lam2:.6g}; APM needs a connected network")
    return L_param / math.sqrt(1.0 - lam2)


def apm_thetas(k: int) -> list[float]:
    """``theta_0 .. theta_k`` from ``theta_j = theta_{j-1} / (1 + theta_{j-1})``, ``theta_0 = 1``."""
    th = [1.0]
    for _ in range(k):
        th.append(th[-1] / (1.0 + th[-1]))
    return th


@dataclass(frozen=True)
class ApmState:
    t: int
    x: np.ndarray
    x_prev: np.ndarray
    theta: float
    theta_prev: float


def apm_init(prob, prox) -> ApmState:
    x = _stack(prox.center, prob.n)
    return ApmState(0, x, x.copy(), 1.0, 1.0)


def apm_round(state: ApmState, prob, mixing, L_param: float, beta0: float | None = None) -> ApmState:
    """One APM step producing ``x^(t+1)`` from ``x^(t)`` and ``x^(t-1)``.

    The penalty uses the neighbour difference ``sum_j p_ij (y_i - y_j)``,
    i.e. ``(I - P) y``.
    """
    if beta0 is None:
        beta0 = apm_beta0(L_param, mixing)
    th, th_prev = state.theta, state.theta_prev
    if state.t == 0:
        y = state.x
    else:
        y = state.x + th * (1.0 - th_prev) / th_prev * (state.x - state.x_prev)
    s = prob.local_grads(y) + (beta0 / th) * (y - mixing.weights @ y)
    x = prob.constraint.project(y - s / (L_param + beta0 / th))
    _finite("apm", state.t + 1, x)
    return ApmState(state.t + 1, x, state.x, th / (1.0 + th), th)


# ------------------------------------------------------ centralized paths


def centralized_da_run(prob, prox, a: float, T: int) -> np.ndarray:
    """Dual averaging with constant weight on the network objective.

    Returns the iterates ``x^(0..T)`` as rows.
    """
    xs = [prox.center.copy()]
    z = np.zeros(prob.m)
    for _ in range(T):
        z = z + prob.grad(xs[-1])
        xs.append(conjugate_map(prox, -a * z))
    return np.array(xs)


@dataclass(frozen=True)
class AdaPath:
    """Centralized accelerated dual averaging iterates, row ``t`` is round ``t``.

    Row 0 of ``v`` is the starting point; rows 0 of ``u`` and ``w`` repeat it.
    """

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray


def centralized_ada_run(prob, prox, a: float, T: int) -> AdaPath:
    x0 = prox.center.copy()
    us, vs, ws = [x0], [x0], [x0]
    dual = np.zeros(prob.m)
    v, w = x0, x0
    for t in range(1, T + 1):
        a_t, A_t = adda_weights(a, t)
        A_prev = adda_weights(a, t - 1)[1] if t > 1 else 0.0
        u = (A_prev / A_t) * v + (a_t / A_t) * w
        dual = dual + a_t * prob.grad(u)
        w = conjugate_map(prox, -dual)
        v = (A_prev / A_t) * v + (a_t / A_t) * w
        us.append(u)
        vs.append(v)
        ws.append(w)
    return AdaPath(np.array(us), np.array(vs), np.array(ws))
