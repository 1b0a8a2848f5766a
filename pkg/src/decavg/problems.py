"""Decentralized constrained LASSO instances and a certified reference optimum."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .prox import ConstraintSet, l1_ball, sample_l1_ball, unconstrained

__all__ = [
    "DecentralizedProblem",
    "ReferenceSolution",
    "OracleFailure",
    "synth_lasso",
    "from_blocks",
    "from_stacked",
    "grad_i",
    "objective",
    "smoothness_constant",
    "reference_optimum",
    "certificate",
    "save_problem",
    "load_problem",
]

MAGIC = b"DECAVG-PROBLEM 1\n"


class OracleFailure(RuntimeError):
    """Reference solver could not certify its answer within the iteration cap."""


@dataclass(eq=False)
class DecentralizedProblem:
    """``f(x) = (1/2n) sum_i ||M_i x - c_i||^2`` over a constraint set.

    ``M`` and ``c`` hold one block per agent. When every agent has the
    same number of rows the blocks are also kept stacked so the per-agent
    gradients can be computed in one batched product.
    """

    M: list
    c: list
    constraint: ConstraintSet
    L: float = field(init=False)

    def __post_init__(self):
        if len(self.M) != len(self.c) or not self.M:
            raise ValueError("need one (M_i, c_i) pair per agent")
        m = self.constraint.dim
        self.M = [np.ascontiguousarray(Mi, dtype=float) for Mi in self.M]
        self.c = [np.ascontiguousarray(ci, dtype=float) for ci in self.c]
        for i, (Mi, ci) in enumerate(zip(self.M, self.c), start=1):
            if Mi.ndim != 2 or Mi.shape[1] != m or ci.shape != (Mi.shape[0],):
                raise ValueError(f"agent {i}: M has shape {Mi.shape}, c has shape {ci.shape}, dimension is {m}")
        rows = {Mi.shape[0] for Mi in self.M}
        self._stack = (np.stack(self.M), np.stack(self.c)) if len(rows) == 1 else None
        self.L = smoothness_constant(self)

    @property
    def n(self) -> int:
        return len(self.M)

    @property
    def m(self) -> int:
        return self.constraint.dim

    @property
    def rows(self) -> list[int]:
        return [Mi.shape[0] for Mi in self.M]

    def local_values(self, X) -> np.ndarray:
        """``f_i(x_i)`` for each agent, ``X`` of shape ``(n, m)``."""
        return np.array([0.5 * float(r @ r) for r in self._residuals(X)])

    def local_grads(self, X) -> np.ndarray:
        """Stacked ``grad f_i(x_i)``, shape ``(n, m)``."""
        X = np.asarray(X, dtype=float)
        if self._stack is not None:
            M, C = self._stack
            r = np.matmul(M, X[:, :, None])[:, :, 0] - C
            return np.matmul(r[:, None, :], M)[:, 0, :]
        return np.stack([Mi.T @ (Mi @ x - ci) for Mi, ci, x in zip(self.M, self.c, X)])

    def _residuals(self, X):
        return [Mi @ x - ci for Mi, ci, x in zip(self.M, self.c, np.asarray(X, dtype=float))]

    def value(self, x) -> float:
        return objective(self, x)

    def grad(self, x) -> np.ndarray:
        """Gradient of the network objective ``f`` at a single point."""
        x = np.asarray(x, dtype=float)
        return self.local_grads(np.broadcast_to(x, (self.n, self.m))).mean(axis=0)

    def hessian(self) -> np.ndarray:
        return sum(Mi.T @ Mi for Mi in self.M) / self.n

    def digest(self) -> str:
        """Content hash identifying the instance."""
        h = hashlib.sha256()
        h.update(json.dumps(self.constraint.to_dict(), sort_keys=True).encode())
        for Mi, ci in zip(self.M, self.c):
            h.update(np.asarray(Mi.shape, dtype="<i8").tobytes())
            h.update(Mi.astype("<f8").tobytes())
            h.update(ci.astype("<f8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class ReferenceSolution:
    x_star: np.ndarray
    f_star: float
    certificate: float
    tol: float
    iterations: int = 0


def from_blocks(M, c, radius: float | None) -> DecentralizedProblem:
    """Problem from per-agent blocks; ``radius=None`` means unconstrained."""
    m = np.asarray(M[0]).shape[1]
    cs = unconstrained(m) if radius is None else l1_ball(m, radius)
    return DecentralizedProblem(list(M), list(c), cs)


def from_stacked(M, c, n: int, radius: float | None) -> DecentralizedProblem:
    """Split a stacked measurement system row-wise across ``n`` agents.

    This is the hook for externally supplied data (e.g. a 600 x 2560
    system shared by 50 agents as 12-row blocks).
    """
    M = np.asarray(M, dtype=float)
    c = np.asarray(c, dtype=float).ravel()
    if M.shape[0] != c.shape[0]:
        raise ValueError("row count of M and length of c differ")
    if M.shape[0] < n:
        raise ValueError("fewer rows than agents")
    idx = np.array_split(np.arange(M.shape[0]), n)
    return from_blocks([M[k] for k in idx], [c[k] for k in idx], radius)


def synth_lasso(n, m, p, sparsity, noise_sd, seed, radius_factor=1.1, constrained=True):
    """Random decentralized LASSO instance and the sparse signal behind it.

    Entries of every ``M_i`` are standard normal, the signal has
    ``sparsity`` standard-normal nonzeros, ``c_i = M_i x_g + noise`` and the
    ball radius is ``radius_factor * ||x_g||_1``.

    Returns
    -------
    problem : DecentralizedProblem
    x_g : ndarray
    """
    if min(n, m, p) < 1:
        raise ValueError("n, m and p must all be at least 1")
    if not 0 <= sparsity <= m:
        raise ValueError(f"sparsity must lie in [0, m], got {sparsity}")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    rng = np.random.default_rng(seed)
    M = [rng.standard_normal((p, m)) for _ in range(n)]
    x_g = np.zeros(m)
    support = np.sort(rng.choice(m, size=sparsity, replace=False))
    x_g[support] = rng.standard_normal(sparsity)
    c = [Mi @ x_g + noise_sd * rng.standard_normal(p) for Mi in M]
    radius = radius_factor * float(np.abs(x_g).sum()) if constrained else None
    if constrained and radius <= 0:
        raise ValueError("signal is identically zero; the l1 ball would be degenerate")
    return from_blocks(M, c, radius), x_g


def grad_i(prob: DecentralizedProblem, i: int, x) -> np.ndarray:
    """``M_i^T (M_i x - c_i)`` for 1-based agent ``i``."""
    if not 1 <= i <= prob.n:
        raise IndexError(f"agent index {i} outside 1..{prob.n}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite point")
    Mi, ci = prob.M[i - 1], prob.c[i - 1]
    return Mi.T @ (Mi @ x - ci)


def objective(prob: DecentralizedProblem, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (prob.m,):
        raise ValueError(f"point has shape {x.shape}, expected ({prob.m},)")
    return float(sum(0.5 * float(r @ r) for r in (Mi @ x - ci for Mi, ci in zip(prob.M, prob.c)))) / prob.n


def smoothness_constant(prob: DecentralizedProblem) -> float:
    """``max_i sigma_1(M_i)^2``, the common Lipschitz constant of the local gradients."""
    L = max(float(np.linalg.norm(Mi, 2)) ** 2 for Mi in prob.M)
    if not L > 0:
        raise ValueError("all data matrices vanish; the smoothness constant must be positive")
    return L


def certificate(prob: DecentralizedProblem, x, n_random: int = 500, seed: int = 0) -> float:
    """Optimality certificate of a candidate solution.

    For the l1 ball this is ``max_q <grad f(x), x - q>`` over the ball's
    ``2m`` vertices and ``n_random`` uniform feasible points; it bounds
    ``f(x) - f*`` from above. Unconstrained problems use ``||grad f(x)||``.
    """
    g = prob.grad(x)
    if not prob.constraint.bounded:
        return float(np.linalg.norm(g))
    R = prob.constraint.radius
    rng = np.random.default_rng(seed)
    Q = sample_l1_ball(rng, prob.m, R, n_random)
    vertex_gap = float(g @ x) + R * float(np.max(np.abs(g)))
    random_gap = float(np.max(g @ x - Q @ g)) if n_random else -np.inf
    return max(vertex_gap, random_gap)


def reference_optimum(prob: DecentralizedProblem, tol: float = 1e-10, max_iter: int = 200_000,
                      epoch: int = 20) -> ReferenceSolution:
    """High-accuracy solution used as ground truth.

    Bounded problems run centralized accelerated dual averaging in
    restart epochs: each epoch re-centres the reference function at the
    current point. The epoch length doubles whenever an epoch fails to
    halve :func:`certificate`, and the loop stops once the certificate is
    at most ``tol``. Unconstrained problems are solved through least
    squares.

    Raises
    ------
    OracleFailure
        If the certificate is not met within ``max_iter`` gradient steps.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not prob.constraint.bounded:
        M = np.vstack(prob.M)
        c = np.concatenate(prob.c)
        x, *_ = np.linalg.lstsq(M, c, rcond=None)
        cert = certificate(prob, x)
        if cert > tol:
            raise OracleFailure(f"least-squares gradient norm {cert:.3e} exceeds tol {tol:.1e}")
        return ReferenceSolution(x, objective(prob, x), cert, tol, 1)

    Lf = float(np.linalg.eigvalsh(prob.hessian())[-1])
    a = 0.5 / Lf
    v = np.zeros(prob.m)
    it = 0
    prev = certificate(prob, v, n_random=0)
    while it < max_iter:
        center = v.copy()
        w = center.copy()
        dual = np.zeros(prob.m)
        A = 0.0
        for t in range(1, epoch + 1):
            at = a * (t + 1)
            A_new = A + at
            u = (A / A_new) * v + (at / A_new) * w
            dual += at * prob.grad(u)
            w = prob.constraint.project(center - dual)
            v = (A / A_new) * v + (at / A_new) * w
            A = A_new
        it += epoch
        cert = certificate(prob, v, n_random=0)
        if cert <= tol:
            full = certificate(prob, v)
            if full <= tol:
                return ReferenceSolution(v, objective(prob, v), full, tol, it)
        if cert > 0.5 * prev:
            epoch = min(2 * epoch, 5000)
        prev = cert
    raise OracleFailure(f"certificate {prev:.3e} still above tol {tol:.1e} after {it} iterations")


def save_problem(prob: DecentralizedProblem, path) -> None:
    """Write a problem file.

    Layout: the magic line ``DECAVG-PROBLEM 1``, one JSON header line
    ``{"n", "m", "p", "radius"}`` (``radius`` is null when unconstrained),
    then little-endian float64 data: for each agent ``M_i`` row-major
    followed by ``c_i``.
    """
    header = {"n": prob.n, "m": prob.m, "p": prob.rows, "radius": prob.constraint.radius}
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header).encode() + b"\n")
        for Mi, ci in zip(prob.M, prob.c):
            fh.write(Mi.astype("<f8").tobytes())
            fh.write(ci.astype("<f8").tobytes())


def load_problem(path) -> DecentralizedProblem:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise ValueError(f"{path}: not a problem file")
    rest = raw[len(MAGIC):]
    nl = rest.index(b"\n")
    header = json.loads(rest[:nl])
    data = np.frombuffer(rest[nl + 1:], dtype="<f8")
    n, m, p = header["n"], header["m"], header["p"]
    if len(p) != n or data.size != sum(pi * (m + 1) for pi in p):
        raise ValueError(f"{path}: payload size does not match header")
    M, c, off = [], [], 0
    for pi in p:
        M.append(data[off:off + pi * m].reshape(pi, m).copy())
        off += pi * m
        c.append(data[off:off + pi].copy())
        off += pi
    return from_blocks(M, c, header["radius"])
