"""Synchronous round loop, metric capture and trace files."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .graph import build_topology, metropolis_weights, read_edge_list
from .problems import load_problem, reference_optimum, synth_lasso
from .prox import make_prox
from . import solvers as S
from .theory import (
    ConstantsError,
    adda_stepsize_admissible,
    adda_weights,
    auto_dda_step,
    compute_constants,
    corollary_admissible,
    dda_stepsize_admissible,
)

log = logging.getLogger(__name__)

ALGORITHMS = ("dda", "adda", "classic_dda", "pg_extra", "apm", "da", "ada")
CSV_HEADER = ["t", "obj_err", "cons_err", "dual_cons_err", "avg_obj_err", "avg_cons_gap", "bound_t1", "bound_t2", "wall_ms"]
DIVERGENCE_LEVEL = 1e12
DEFAULT_ORACLE_TOL = 1e-10


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """One run: algorithm, network, problem, step and cadence.

    ``problem`` is either ``{"kind": "synthetic", "m", "p", "sparsity",
    "noise_sd", ...}`` or ``{"kind": "file", "path"}``; ``topology`` is
    ``{"kind", "n"}`` plus ``"edges"`` or ``"path"`` for edge lists.
    """

    algorithm: str
    topology: dict
    problem: dict
    step: float | str = "auto"
    rounds: int = 1000
    seed: int = 0
    cadence: int | None = None
    bounds: bool = False
    oracle_tol: float = DEFAULT_ORACLE_TOL
    apm_L: float | None = None
    classic_decay: bool = True
    record_wall: bool = False
    output: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {', '.join(ALGORITHMS)}")
        if self.rounds < 1:
            raise ConfigError("rounds must be at least 1")
        if not (self.step == "auto" or (isinstance(self.step, (int, float)) and self.step > 0)):
            raise ConfigError(f"step must be 'auto' or a positive number, got {self.step!r}")
        if self.cadence is not None and self.cadence < 1:
            raise ConfigError("cadence must be positive")

    @property
    def every(self) -> int:
        if self.cadence is not None:
            return self.cadence
        return 1 if self.rounds <= 2000 else math.ceil(self.rounds / 2000)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Instance:
    problem: object
    x_g: np.ndarray | None
    graph: object
    mixing: object
    prox: object
    reference: object

    @property
    def digest(self) -> str:
        return self.problem.digest()


@dataclass
class RunTrace:
    """Recorded metrics of one run.

    ``records`` hold the CSV columns plus diagnostics used by the bound
    checks (``gap_bound``, ``v_dev``, ``u_dev``, ``lemma4``, ``agent_avg_err``).
    """

    config: dict
    algorithm: str
    step: float
    problem_hash: str
    f_star: float
    records: list = field(default_factory=list)
    constants: dict | None = None
    warnings: list = field(default_factory=list)
    failure: dict | None = None
    beta: float | None = None

    def column(self, key) -> np.ndarray:
        return np.array([np.nan if r.get(key) is None else r[key] for r in self.records], dtype=float)

    @property
    def t(self) -> np.ndarray:
        return np.array([r["t"] for r in self.records])

    def rounds_to(self, threshold: float, key: str = "obj_err") -> int | None:
        """First recorded round whose metric is at or below ``threshold``."""
        for r in self.records:
            val = r.get(key)
            if val is not None and val <= threshold:
                return r["t"]
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.records:
            w.writerow([_fmt(r.get(k)) for k in CSV_HEADER])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {
            "config": self.config,
            "algorithm": self.algorithm,
            "step": self.step,
            "beta": self.beta,
            "problem_hash": self.problem_hash,
            "f_star": self.f_star,
            "constants": self.constants,
            "warnings": self.warnings,
            "failure": self.failure,
            "version": __version__,
        }

    def write(self, path) -> tuple[Path, Path]:
        """Write ``<path>.csv`` and ``<path>.json``."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = path.with_suffix(".csv"), path.with_suffix(".json")
        csv_path.write_text(self.to_csv())
        json_path.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


# ------------------------------------------------------------ instances

_CACHE: dict = {}


def build_graph(topology: dict):
    kind = topology.get("kind")
    if kind == "edge_list" and "path" in topology:
        return read_edge_list(topology["path"])
    try:
        return build_topology(kind, int(topology["n"]), topology.get("edges"))
    except KeyError as exc:
        raise ConfigError(f"topology is missing {exc}") from None


def build_problem(spec: dict, n: int, seed: int):
    kind = spec.get("kind", "synthetic")
    if kind == "synthetic":
        prob, x_g = synth_lasso(
            n, int(spec["m"]), int(spec["p"]), int(spec["sparsity"]), float(spec.get("noise_sd", 0.1)), seed,
            radius_factor=float(spec.get("radius_factor", 1.1)), constrained=spec.get("constrained", True),
        )
        return prob, x_g
    if kind == "file":
        prob = load_problem(spec["path"])
        if prob.n != n:
            raise ConfigError(f"problem file has {prob.n} agents, topology has {n}")
        return prob, None
    raise ConfigError(f"unknown problem kind {kind!r}")


def prepare(config: RunConfig) -> Instance:
    """Build (or fetch from cache) the problem, network and reference optimum."""
    key = json.dumps([config.topology, config.problem, config.seed, config.oracle_tol], sort_keys=True)
    if key in _CACHE:
        return _CACHE[key]
    graph = build_graph(config.topology)
    mixing = metropolis_weights(graph)
    prob, x_g = build_problem(config.problem, graph.n, config.seed)
    prox = make_prox(np.zeros(prob.m), prob.constraint)
    ref_key = (prob.digest(), config.oracle_tol)
    ref = _CACHE.get(ref_key)
    if ref is None:
        ref = _CACHE[ref_key] = reference_optimum(prob, config.oracle_tol)
    inst = Instance(prob, x_g, graph, mixing, prox, ref)
    _CACHE[key] = inst
    return inst


def clear_cache():
    _CACHE.clear()


# ---------------------------------------------------------------- steps


def resolve_step(config: RunConfig, inst: Instance) -> tuple[float, list[str]]:
    """Numeric step for the run and any admissibility warnings."""
    L, beta = inst.problem.L, inst.mixing.beta
    alg = config.algorithm
    if config.step == "auto":
        if alg in ("dda", "classic_dda"):
            return auto_dda_step(L, beta), []
        if alg == "da":
            return auto_dda_step(L, 0.0), []
        if alg in ("adda", "ada"):
            return 1.0 / (6.0 * L), []
        if alg == "pg_extra":
            return 0.25 / L, []
        return 1.0 / L, []  # APM does not use a step constant
    a = float(config.step)
    warnings = []
    if alg == "dda":
        verdict = dda_stepsize_admissible(a, L, beta)
        if not verdict.admissible:
            warnings.append(f"step {a:.6g} violates the DDA step condition (slack {verdict.margin:.6g}, rho {verdict.rho:.6g})")
    elif alg == "adda" and not adda_stepsize_admissible(a, L):
        warnings.append(f"step {a:.6g} exceeds 1/(6L) = {1.0 / (6.0 * L):.6g}")
    return a, warnings


def step_admissible(config: RunConfig, inst: Instance) -> bool:
    return not resolve_step(config, inst)[1]


# ----------------------------------------------------------------- runs


class _Stepper:
    """Uniform driver over the per-algorithm round functions."""

    def __init__(self, alg, inst, a, config):
        self.alg, self.inst, self.a = alg, inst, a
        prob, prox, mix = inst.problem, inst.prox, inst.mixing
        self.central = alg in ("da", "ada")
        if alg == "dda":
            self.state = S.dda_init(prob, prox)
        elif alg == "classic_dda":
            self.state = S.classic_dda_init(prob, prox)
            self.decay = config.classic_decay
        elif alg == "pg_extra":
            self.state = S.pg_extra_init(prob, prox)
        elif alg == "apm":
            self.state = S.apm_init(prob, prox)
            self.L_param = config.apm_L if config.apm_L is not None else prob.L
            self.beta0 = S.apm_beta0(self.L_param, mix)
        elif alg == "adda":
            self.state = None  # initialised on round 1
        elif alg == "da":
            self.x, self.z, self.t = prox.center.copy(), np.zeros(prob.m), 0
            self.x_sum = np.zeros(prob.m)
        elif alg == "ada":
            self.t, self.v, self.w = 0, prox.center.copy(), prox.center.copy()
            self.dual = np.zeros(prob.m)

    def advance(self):
        prob, prox, mix, a = self.inst.problem, self.inst.prox, self.inst.mixing, self.a
        alg = self.alg
        if alg == "dda":
            self.state = S.dda_round(self.state, prob, mix, prox, a)
        elif alg == "adda":
            self.state = S.adda_init(prob, prox, a) if self.state is None else S.adda_round(self.state, prob, mix, prox)
        elif alg == "classic_dda":
            self.state = S.classic_dda_round(self.state, prob, mix, prox, a, self.decay)
        elif alg == "pg_extra":
            self.state = S.pg_extra_round(self.state, prob, mix, a)
        elif alg == "apm":
            self.state = S.apm_round(self.state, prob, mix, self.L_param, self.beta0)
        elif alg == "da":
            self.t += 1
            self.z = self.z + prob.grad(self.x)
            self.x = prox.constraint.project(prox.center - a * self.z)
            self.x_sum = self.x_sum + self.x
            if not np.all(np.isfinite(self.x)):
                raise S.Divergence("da", self.t)
        elif alg == "ada":
            self.t += 1
            a_t, A_t = adda_weights(a, self.t)
            A_prev = A_t - a_t
            u = (A_prev / A_t) * self.v + (a_t / A_t) * self.w
            self.dual = self.dual + a_t * prob.grad(u)
            self.w = prox.constraint.project(prox.center - self.dual)
            self.v = (A_prev / A_t) * self.v + (a_t / A_t) * self.w
            if not np.all(np.isfinite(self.v)):
                raise S.Divergence("ada", self.t)

    def primal(self) -> np.ndarray:
        """Per-agent primal iterates, shape ``(n, m)``."""
        n = self.inst.problem.n
        if self.alg == "da":
            return np.broadcast_to(self.x, (n, self.x.size))
        if self.alg == "ada":
            return np.broadcast_to(self.v, (n, self.v.size))
        if self.alg == "adda":
            return self.state.v if self.state is not None else np.broadcast_to(self.inst.prox.center, (n, self.inst.problem.m))
        return self.state.x

    def dual_stack(self):
        if self.alg in ("dda", "classic_dda"):
            return self.state.z
        if self.alg == "adda" and self.state is not None:
            return self.state.q
        return None


def _deviation(X) -> float:
    D = X - X.mean(axis=0)
    return float(np.sqrt(np.sum(D * D)))


def run(config: RunConfig, instance: Instance | None = None) -> RunTrace:
    """Execute ``config.rounds`` rounds and record metrics at the cadence.

    An inadmissible manual step is recorded as a warning and the run
    proceeds. Divergence truncates the trace and sets ``failure``.
    """
    inst = instance or prepare(config)
    prob, prox, ref = inst.problem, inst.prox, inst.reference
    f_star, x_star = ref.f_star, ref.x_star
    a, warnings = resolve_step(config, inst)
    for msg in warnings:
        log.warning(msg)

    consts = None
    if config.bounds:
        try:
            if config.algorithm == "dda":
                consts = compute_constants(prob, inst.mixing, prox, a, x_star, "dda")
                if not prox.constraint.bounded and not corollary_admissible(a, prob.L, inst.mixing.beta):
                    warnings.append("step does not meet the stricter unconstrained condition; per-agent bound not asserted")
            elif config.algorithm == "adda":
                consts = compute_constants(prob, inst.mixing, prox, a, x_star, "adda")
        except ConstantsError as exc:
            warnings.append(f"bound constants unavailable: {exc}")

    trace = RunTrace(config.to_dict(), config.algorithm, a, inst.digest, f_star,
                     constants=consts.to_dict() if consts else None, warnings=warnings, beta=inst.mixing.beta)
    stepper = _Stepper(config.algorithm, inst, a, config)
    every = config.every
    start = time.perf_counter()

    def record(t):
        X = stepper.primal()
        xbar = X.mean(axis=0)
        obj = prob.value(xbar)
        if not math.isfinite(obj) or obj > DIVERGENCE_LEVEL:
            raise S.Divergence(config.algorithm, t, f"objective {obj:.3e}")
        diff = X - x_star
        rec = {
            "t": t,
            "obj_err": obj - f_star,
            "cons_err": float(np.sqrt(np.sum(diff * diff))),
            "dual_cons_err": None,
            "avg_obj_err": None,
            "avg_cons_gap": None,
            "bound_t1": None,
            "bound_t2": None,
            "wall_ms": (time.perf_counter() - start) * 1e3 if config.record_wall else None,
        }
        Z = stepper.dual_stack()
        if Z is not None:
            rec["dual_cons_err"] = _deviation(Z)
        if config.algorithm == "dda" and t >= 1:
            st = stepper.state
            y_avg, x_avg = st.y_avg, st.x_avg
            rec["avg_obj_err"] = prob.value(y_avg) - f_star
            gap = x_avg - y_avg
            rec["avg_cons_gap"] = float(np.max(np.sum(gap * gap, axis=1)))
            if consts is not None:
                rec["bound_t1"] = consts.dda_objective_bound(t)
                rec["gap_bound"] = consts.dda_gap_bound(t)
                if consts.corollary is not None:
                    rec["agent_avg_err"] = max(prob.value(xi) for xi in x_avg) - f_star
                    rec["corollary_bound"] = consts.corollary / t
        if config.algorithm == "adda" and t >= 1:
            st = stepper.state
            rec["v_dev"] = _deviation(st.v)
            rec["u_dev"] = _deviation(st.u)
            rec["A_t"] = st.A_t
            if consts is not None:
                rec["bound_t2"] = consts.adda_objective_bound(t)
                rec["lemma4"] = consts.adda_consensus_bound(t)
        trace.records.append(rec)

    try:
        record(0)
        for t in range(1, config.rounds + 1):
            stepper.advance()
            if t % every == 0 or t == config.rounds:
                record(t)
            elif not np.all(np.isfinite(stepper.primal())):
                raise S.Divergence(config.algorithm, t)
    except S.Divergence as exc:
        trace.failure = {"round": exc.t, "message": str(exc)}
        log.error("%s", exc)

    if config.output:
        trace.write(config.output)
    return trace


# ----------------------------------------------------------- bound checks


def theorem1_violations(trace: RunTrace, slack: float = 1e-9) -> list[str]:
    """Rounds where ``a t (f(y~) - f*) > C`` or ``t max_i ||x~_i - y~||^2 > D``."""
    c = trace.constants
    if c is None or c.get("C") is None:
        raise ValueError("trace carries no DDA constants; run with bounds enabled")
    out = []
    for r in trace.records:
        t = r["t"]
        if t < 1:
            continue
        if trace.step * t * r["avg_obj_err"] > c["C"] + slack:
            out.append(f"t={t}: a t (f(y~)-f*) = {trace.step * t * r['avg_obj_err']:.6g} > C = {c['C']:.6g}")
        if t * r["avg_cons_gap"] > c["D"] + slack:
            out.append(f"t={t}: t max||x~-y~||^2 = {t * r['avg_cons_gap']:.6g} > D = {c['D']:.6g}")
    return out


def theorem2_violations(trace: RunTrace, slack: float = 1e-9) -> list[str]:
    """Rounds breaking the ADDA objective bound or the consensus bound on ``u`` and ``v``."""
    c = trace.constants
    if c is None or c.get("C_p") is None:
        raise ValueError("trace carries no ADDA constants; run with bounds enabled")
    out = []
    for r in trace.records:
        t = r["t"]
        if t < 1:
            continue
        lhs = r["A_t"] * r["obj_err"]
        rhs = r["A_t"] * r["bound_t2"]
        if lhs > rhs + slack:
            out.append(f"t={t}: A_t (f(v)-f*) = {lhs:.6g} > {rhs:.6g}")
        for key in ("v_dev", "u_dev"):
            if r[key] > r["lemma4"] + slack:
                out.append(f"t={t}: ||{key[0]}~|| = {r[key]:.6g} > (a_t/A_t) C_p = {r['lemma4']:.6g}")
    return out


def corollary_violations(trace: RunTrace, slack: float = 1e-9) -> list[str]:
    """Rounds where some agent's running average breaks the unconstrained rate."""
    out = []
    for r in trace.records:
        if r["t"] >= 1 and "agent_avg_err" in r:
            if r["t"] * r["agent_avg_err"] > r["t"] * r["corollary_bound"] + slack:
                out.append(f"t={r['t']}: max_i f(x~_i) - f* = {r['agent_avg_err']:.6g} > {r['corollary_bound']:.6g}")
    return out


# --------------------------------------------------------------- compare


@dataclass
class Comparison:
    algorithms: list
    traces: list
    problem_hash: str

    def table(self) -> list[dict]:
        """Rows keyed by ``t`` with ``<alg>_obj_err`` / ``<alg>_cons_err`` columns."""
        by_t: dict = {}
        for name, tr in zip(self.algorithms, self.traces):
            for r in tr.records:
                row = by_t.setdefault(r["t"], {"t": r["t"]})
                row[f"{name}_obj_err"] = r["obj_err"]
                row[f"{name}_cons_err"] = r["cons_err"]
        return [by_t[t] for t in sorted(by_t)]

    def columns(self) -> list[str]:
        cols = ["t"]
        for name in self.algorithms:
            cols += [f"{name}_obj_err", f"{name}_cons_err"]
        return cols

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = self.columns()
        w.writerow(cols)
        for row in self.table():
            w.writerow([_fmt(row.get(c)) for c in cols])
        return buf.getvalue()


def compare(configs: list) -> Comparison:
    """Run several configs on one shared instance and align their traces."""
    if not configs:
        raise ConfigError("compare needs at least one config")
    instances = [prepare(c) for c in configs]
    hashes = {inst.digest for inst in instances}
    if len(hashes) != 1:
        raise ConfigError("configs do not share a problem instance")
    if len({json.dumps(c.topology, sort_keys=True) for c in configs}) != 1:
        raise ConfigError("configs do not share a topology")
    names, seen = [], {}
    for c in configs:
        k = seen.get(c.algorithm, 0)
        seen[c.algorithm] = k + 1
        names.append(c.algorithm if k == 0 else f"{c.algorithm}_{k + 1}")
    traces = [run(c, inst) for c, inst in zip(configs, instances)]
    return Comparison(names, traces, hashes.pop())
