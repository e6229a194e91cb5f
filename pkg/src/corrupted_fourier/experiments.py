"""Seeded Monte Carlo sweeps: phase transitions, the comb counterexample,
certificate audits and tail-bound audits.

Every trial draws its generator from ``SeedSequence(seed, spawn_key=cell
values + trial)``, so results do not depend on execution order or on the
number of worker processes. Rows are always emitted sorted by cell and trial.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .certificate import (C_G_DESK, C_G_THEORY, PlanClippedWarning,
                          construct_certificate)
from .concentration import (audit_golfing_bounds, audit_operator_deviation,
                            tail_grid)
from .csvio import SCHEMA_VERSION, emit_csv
from .errors import ConfigError, NotPerfectSquare, RecoveryError
from .instances import corruption_count, make_instance
from .solver import (C_LAMBDA_DESK, C_LAMBDA_THEORY, EXACT_RTOL, SolverOptions,
                     objective, recipe_lambda, solve, solve_instance)
from .spectral import PartialFourierOperator, dirac_comb, is_prime

MODES = ("phase", "counterexample", "certify", "audit")
LAMBDA_POLICIES = ("recipe", "fixed", "sweep")


@dataclass
class ExperimentConfig:
    mode: str = "phase"
    n: list = field(default_factory=lambda: [97])
    m: list = field(default_factory=lambda: [30, 50, 70, 90])
    k: list = field(default_factory=lambda: [5])
    gamma_c: list = field(default_factory=lambda: [0.2])
    lam_policy: str = "recipe"
    lam: list = field(default_factory=lambda: [1.0])
    c_lambda: Optional[float] = None
    eps: Optional[float] = None
    trials: int = 20
    seed: int = 0
    out: Optional[str] = None
    jobs: int = 1
    theory_mode: bool = True
    desk_constants: bool = False
    certify: bool = False
    x_model: str = "arbitrary-fixed"
    f_sign_model: str = "rademacher"
    sampling: str = "uniform"
    exact_rtol: float = EXACT_RTOL
    max_iter: int = 20000
    dual_tol: float = 1e-9
    min_block: int = 1
    # audit mode
    tail_M: int = 64
    tail_u: list = field(default_factory=lambda: [1.0, 2.0, 3.0])
    tail_gamma: float = 0.5
    tail_trials: int = 100000
    deviation_m: int = 32
    deviation_n: int = 64
    deviation_s: int = 4
    deviation_delta: float = 0.5
    deviation_trials: int = 2000

    @property
    def effective_c_lambda(self) -> float:
        if self.c_lambda is not None:
            return self.c_lambda
        return C_LAMBDA_DESK if self.desk_constants else C_LAMBDA_THEORY

    @property
    def c_g(self) -> float:
        return C_G_DESK if self.desk_constants else C_G_THEORY

    def lambdas(self, n: int) -> list:
        if self.lam_policy == "recipe":
            return [recipe_lambda(n, self.eps, self.effective_c_lambda)]
        return list(self.lam)

    def validate(self, lines: dict | None = None) -> "ExperimentConfig":
        lines = lines or {}

        def fail(name, msg):
            raise ConfigError(msg, field=name, line=lines.get(name))

        if self.mode not in MODES:
            fail("mode", f"must be one of {MODES}")
        if self.lam_policy not in LAMBDA_POLICIES:
            fail("lam_policy", f"must be one of {LAMBDA_POLICIES}")
        for name in ("n", "m", "k", "gamma_c", "lam", "tail_u"):
            if not isinstance(getattr(self, name), list) or not getattr(self, name):
                fail(name, "must be a nonempty list")
        if self.trials < 1:
            fail("trials", "must be at least 1")
        if self.jobs < 1:
            fail("jobs", "must be at least 1")
        if any(lam <= 0 for lam in self.lam):
            fail("lam", "weights must be positive")
        if any(not 0 <= g < 1 for g in self.gamma_c):
            fail("gamma_c", "fractions must lie in [0, 1)")
        if self.mode == "counterexample":
            for n in self.n:
                if math.isqrt(n) ** 2 != n:
                    fail("n", f"{n} is not a perfect square")
        else:
            if self.theory_mode and any(not is_prime(n) for n in self.n):
                fail("n", "theory mode needs prime n")
            if any(m > n for n in self.n for m in self.m) or any(m < 1 for m in self.m):
                fail("m", "every m must satisfy 1 <= m <= n")
            if any(k > n or k < 0 for n in self.n for k in self.k):
                fail("k", "every k must satisfy 0 <= k <= n")
        return self

    def metadata(self) -> dict:
        meta = {"schema": f"corrupted-fourier/{SCHEMA_VERSION} {self.mode}",
                "version": __version__}
        for f in dataclasses.fields(self):
            if f.name not in ("out", "jobs"):
                meta[f.name] = getattr(self, f.name)
        meta["resolved_c_lambda"] = self.effective_c_lambda
        meta["resolved_c_g"] = self.c_g
        meta["note"] = "sweep grids are user choices; no published reference values exist"
        return meta


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a YAML mapping of :class:`ExperimentConfig` fields.

    Errors name the offending field and its line in the file.
    """
    try:
        text = open(path, encoding="utf-8").read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {exc}",
                          line=mark.line + 1 if mark else None) from exc
    lines = {}
    if node is not None and isinstance(node, yaml.MappingNode):
        lines = {k.value: k.start_mark.line + 1 for k, _ in node.value}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping", line=1)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(data, lines)


def config_from_dict(data: dict, lines: dict | None = None) -> ExperimentConfig:
    lines = lines or {}
    known = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    defaults = ExperimentConfig()
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError("unknown key", field=key, line=lines.get(key))
        expected = getattr(defaults, key)
        if isinstance(expected, list) and not isinstance(value, list):
            value = [value]
        try:
            if isinstance(expected, bool):
                if not isinstance(value, bool):
                    raise TypeError("expected true/false")
            elif isinstance(expected, int):
                if isinstance(value, bool) or int(value) != value:
                    raise TypeError("expected an integer")
                value = int(value)
            elif isinstance(expected, float) or key in ("c_lambda", "eps"):
                value = None if value is None else float(value)
            elif isinstance(expected, list):
                conv = float if key in ("gamma_c", "lam", "tail_u") else int
                value = [conv(v) for v in value]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value {value!r}: {exc}", field=key,
                              line=lines.get(key)) from exc
        kwargs[key] = value
    return ExperimentConfig(**kwargs).validate(lines)


# ---------------------------------------------------------------- records

@dataclass
class ExperimentRecord:
    n: int
    m: int
    k: int
    gamma_c: float
    lam: float
    trial: int
    n_corrupt: int
    exact: bool
    rel_err_x: float
    rel_err_f: float
    objective: float
    iterations: int
    converged: bool
    certificate_pass: Optional[bool]
    error: str
    wall_time: float


@dataclass
class CertificateRecord:
    n: int
    m: int
    k: int
    gamma_c: float
    lam: float
    trial: int
    certificate_pass: bool
    failed_conditions: str
    q_inf: float
    h_offsupport_x: float
    h_offsupport_f: float
    phi_residual: float
    golfing_residual: float
    sigma_min: float
    golfing_contracted: bool
    plan_clipped: bool
    solver_exact: bool
    rel_err_x: float
    rel_err_f: float
    sound: bool
    error: str
    wall_time: float


@dataclass
class CounterexampleRow:
    n: int
    lam: float
    objective: float
    truth_objective: float
    swap_objective: float
    exact: bool
    rel_err_x: float
    asserted: bool
    bound_holds: Optional[bool]


def trial_rng(seed: int, cell: tuple, trial: int) -> np.random.Generator:
    """Generator keyed by ``(seed, cell, trial)``; order independent."""
    key = tuple(int(round(c * 10 ** 9)) if isinstance(c, float) else int(c)
                for c in cell) + (int(trial),)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def cells(cfg: ExperimentConfig):
    for n, m, k, g in itertools.product(cfg.n, cfg.m, cfg.k, cfg.gamma_c):
        for lam in cfg.lambdas(n):
            yield (n, m, k, g, lam)


def _opts(cfg, lam):
    return SolverOptions(lam=lam, max_iter=cfg.max_iter, dual_tol=cfg.dual_tol)


def _draw(cfg, cell, rng):
    n, m, k, g, _ = cell
    return make_instance(n, m, k, g, rng=rng, x_model=cfg.x_model,
                         f_sign_model=cfg.f_sign_model, sampling=cfg.sampling,
                         theory_mode=cfg.theory_mode)


def _phase_trial(args):
    cfg, cell, trial = args
    n, m, k, g, lam = cell
    t0 = time.perf_counter()
    rng = trial_rng(cfg.seed, cell, trial)
    try:
        inst = _draw(cfg, cell, rng)
        res = solve_instance(inst, _opts(cfg, lam))
        res.exact = res.rel_err_x <= cfg.exact_rtol and res.rel_err_f <= cfg.exact_rtol
        cert = None
        if cfg.certify:
            try:
                cert = construct_certificate(inst, lam, rng, c_g=cfg.c_g,
                                             min_block=cfg.min_block).passed
            except RecoveryError:
                cert = False
        return ExperimentRecord(n, m, k, g, lam, trial, inst.s_f.size, bool(res.exact),
                                res.rel_err_x, res.rel_err_f, res.objective,
                                res.iterations, res.converged, cert, "",
                                time.perf_counter() - t0)
    except Exception as exc:  # recorded, never aborts the sweep
        nan = float("nan")
        return ExperimentRecord(n, m, k, g, lam, trial, corruption_count(g, m), False,
                                nan, nan, nan, 0, False, None, type(exc).__name__,
                                time.perf_counter() - t0)


def _certify_trial(args):
    cfg, cell, trial, corrupt_q = args
    n, m, k, g, lam = cell
    t0 = time.perf_counter()
    rng = trial_rng(cfg.seed, cell, trial)
    nan = float("nan")
    try:
        inst = _draw(cfg, cell, rng)
        res = solve_instance(inst, _opts(cfg, lam))
        exact = res.rel_err_x <= cfg.exact_rtol and res.rel_err_f <= cfg.exact_rtol
        try:
            cert = construct_certificate(inst, lam, rng, c_g=cfg.c_g, min_block=cfg.min_block)
        except RecoveryError as exc:
            return CertificateRecord(n, m, k, g, lam, trial, False, "", nan, nan, nan,
                                     nan, nan, nan, False, False, bool(exact),
                                     res.rel_err_x, res.rel_err_f, True,
                                     type(exc).__name__, time.perf_counter() - t0)
        report = cert.report
        if corrupt_q:
            from .certificate import verify_certificate
            q = cert.q.copy()
            q[0] = 1.5
            report = verify_certificate(inst, q, lam, order=cert.plan.order)
        passed = report.passed
        return CertificateRecord(
            n, m, k, g, lam, trial, passed, ";".join(report.failed()),
            report["q_inf_below_one"].value, report["h_offsupport_x"].value,
            report["h_offsupport_f"].value, report["phi_q_equals_w"].value,
            cert.trace.residual, report["full_rank"].value, cert.trace.contracted(),
            cert.plan.clipped, bool(exact), res.rel_err_x, res.rel_err_f,
            bool(exact or not passed), "", time.perf_counter() - t0)
    except Exception as exc:
        return CertificateRecord(n, m, k, g, lam, trial, False, "", nan, nan, nan, nan,
                                 nan, nan, False, False, False, nan, nan, True,
                                 type(exc).__name__, time.perf_counter() - t0)


def _quiet(job):
    # clipping is the normal case at desk scale; it is recorded per row instead
    fn, task = job
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PlanClippedWarning)
        return fn(task)


def _map(fn, tasks, jobs):
    jobs_ = [(fn, t) for t in tasks]
    if jobs <= 1:
        return [_quiet(j) for j in jobs_]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_quiet, jobs_, chunksize=4))


def run_phase_transition(cfg: ExperimentConfig) -> list:
    """One record per (cell, trial), in grid order."""
    tasks = [(cfg, cell, t) for cell in cells(cfg) for t in range(cfg.trials)]
    return _map(_phase_trial, tasks, cfg.jobs)


def run_certificate_audit(cfg: ExperimentConfig, corrupt_q: bool = False) -> list:
    """Certificate construction and verification next to the solver verdict.

    ``corrupt_q`` overwrites the first certificate coordinate with 1.5 before
    verification, for checking that violations are caught and named.
    """
    tasks = [(cfg, cell, t, corrupt_q) for cell in cells(cfg) for t in range(cfg.trials)]
    return _map(_certify_trial, tasks, cfg.jobs)


def run_counterexample(n: int, lams=(0.5, 1.0, 2.0), opts: SolverOptions | None = None
                       ) -> list:
    """Full sampling with the Dirac comb as signal and no corruption.

    For ``lam <= 1`` the comb cannot be the unique optimum: moving it into
    the corruption costs ``lam * sqrt(n)``. For ``lam > 1`` the outcome is
    only recorded.
    """
    r = math.isqrt(n)
    if r * r != n:
        raise NotPerfectSquare(f"{n} is not a perfect square")
    d = dirac_comb(n)
    op = PartialFourierOperator.full(n)
    b = op.apply(d)
    rows = []
    for lam in lams:
        base = opts or SolverOptions()
        res = solve(op, b, dataclasses.replace(base, lam=lam), x0=d, f0=np.zeros(n))
        truth = objective(d, np.zeros(n), lam)
        asserted = lam <= 1.0
        bound = min(truth, lam * r) + 1e-6
        rows.append(CounterexampleRow(
            n, lam, res.objective, truth, lam * r, bool(res.exact), res.rel_err_x,
            asserted, (res.objective <= bound and not res.exact) if asserted else None))
    return rows


def run_audit(cfg: ExperimentConfig) -> list:
    """Tail-bound audits as table rows."""
    rows = []
    base = np.random.SeedSequence(int(cfg.seed))
    s_stein, s_rad, s_dev = base.spawn(3)
    for rec in tail_grid("steinhaus", cfg.tail_M, cfg.tail_u, cfg.tail_trials,
                         np.random.default_rng(s_stein), gamma=cfg.tail_gamma):
        rows.append(rec.as_row())
    for rec in tail_grid("rademacher", cfg.tail_M, cfg.tail_u, cfg.tail_trials,
                         np.random.default_rng(s_rad)):
        rows.append(rec.as_row())
    rows.append(audit_operator_deviation(
        cfg.deviation_n, cfg.deviation_m, cfg.deviation_s, cfg.deviation_delta,
        cfg.deviation_trials, np.random.default_rng(s_dev)).as_row())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PlanClippedWarning)
        rows += _golfing_rows(cfg)
    return rows


def _golfing_rows(cfg):
    rows = []
    for cell in cells(cfg):
        n, m, k, g, lam = cell
        traces = []
        for t in range(cfg.trials):
            rng = trial_rng(cfg.seed, cell, t)
            try:
                inst = _draw(cfg, cell, rng)
                traces.append(construct_certificate(inst, lam, rng, c_g=cfg.c_g,
                                                    min_block=cfg.min_block).trace)
            except RecoveryError:
                continue
        if traces:
            for rec in audit_golfing_bounds(traces, n, g, lam, cfg.effective_c_lambda,
                                            eps=cfg.eps):
                row = rec.as_row()
                row.update(m=m, k=k)
                rows.append(row)
    return rows


AUDIT_COLUMNS = ["check", "n", "m", "k", "s", "delta", "M", "u", "gamma", "gamma_c",
                 "lam", "c_lambda", "eps", "trials", "empirical", "bound", "slack",
                 "vacuous", "passed", "note"]


# ---------------------------------------------------------------- aggregation

@dataclass
class CellSummary:
    n: int
    m: int
    k: int
    gamma_c: float
    lam: float
    trials: int
    recovered: int

    @property
    def probability(self) -> float:
        return self.recovered / self.trials


def summarize(records) -> list:
    groups = {}
    for r in records:
        key = (r.n, r.m, r.k, r.gamma_c, r.lam)
        tot, ok = groups.get(key, (0, 0))
        groups[key] = (tot + 1, ok + bool(r.exact))
    return [CellSummary(*key, tot, ok) for key, (tot, ok) in groups.items()]


def monotone_within_noise(probs, trials: int, increasing: bool = True,
                          sigmas: float = 3.0) -> bool:
    """Every later entry is no worse than every earlier one, up to
    ``sigmas`` pooled binomial standard deviations of the difference."""
    p = list(probs)
    for i, j in itertools.combinations(range(len(p)), 2):
        a, b = (p[i], p[j]) if increasing else (p[j], p[i])
        pool = (a + b) / 2
        sd = math.sqrt(2 * pool * (1 - pool) / trials)
        if b < a - sigmas * sd - 1e-12:
            return False
    return True


def write_records(records, path, cfg: ExperimentConfig | None = None, columns=None) -> None:
    emit_csv(records, path, columns=columns,
             metadata=cfg.metadata() if cfg is not None else None)
