"""Monte Carlo audits of the tail bounds used by the recovery analysis.

Each audit returns :class:`TailAuditRecord` objects holding the empirical
exceedance frequency next to the closed-form bound. A record passes when the
frequency is at most ``bound + 3 sigma`` with ``sigma`` the binomial standard
deviation at the bound. Bounds of 1 or more say nothing and are flagged
``vacuous``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyEnsemble, SizeTooLarge
from .instances import sample_random_subset
from .spectral import PartialFourierOperator, dense_submatrix

DENSE_MAX_N = 256
ALPHA_DEFAULT = 5.0


@dataclass
class TailAuditRecord:
    check: str
    params: dict
    trials: int
    exceedances: int
    bound: float
    note: str = ""

    @property
    def empirical(self) -> float:
        return self.exceedances / self.trials

    @property
    def slack(self) -> float:
        p = min(max(self.bound, 0.0), 1.0)
        return 3.0 * math.sqrt(p * (1.0 - p) / self.trials)

    @property
    def vacuous(self) -> bool:
        return self.bound >= 1.0

    @property
    def passed(self) -> bool:
        return self.empirical <= self.bound + self.slack

    def as_row(self) -> dict:
        row = {"check": self.check}
        row.update(self.params)
        row.update(trials=self.trials, empirical=self.empirical, bound=self.bound,
                   slack=self.slack, vacuous=self.vacuous, passed=self.passed,
                   note=self.note)
        return row

    def to_dict(self) -> dict:
        return asdict(self)


def _record(check, params, trials, exceed, bound, note=""):
    if trials < 1:
        raise ValueError("trials must be at least 1")
    return TailAuditRecord(check, params, int(trials), int(exceed), float(bound), note)


def operator_deviation_bound(m: int, s_size: int, delta: float, K: float = 1.0) -> float:
    return 2 * s_size * math.exp(-3 * m * delta ** 2 / (8 * K ** 2 * s_size))


def operator_deviations(n: int, m: int, s_size: int, trials: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Exact ``||A^*(:, s) A(:, s) - I||_2`` for random rows and columns."""
    if n > DENSE_MAX_N:
        raise SizeTooLarge(f"dense audit is limited to n <= {DENSE_MAX_N}")
    if not 0 < s_size <= n or not 0 < m <= n:
        raise ValueError("need 0 < s_size <= n and 0 < m <= n")
    out = np.empty(trials)
    eye = np.eye(s_size)
    for t in range(trials):
        op = PartialFourierOperator(n, sample_random_subset(n, m, rng))
        cols = sample_random_subset(n, s_size, rng)
        A = dense_submatrix(op, np.arange(m), cols)
        out[t] = np.linalg.norm(A.conj().T @ A - eye, 2)
    return out


def audit_operator_deviation(n: int, m: int, s_size: int, delta: float, trials: int,
                             rng: np.random.Generator) -> TailAuditRecord:
    """Frequency of ``||A^*(:, s) A(:, s) - I||_2 > delta`` against
    ``2|s| exp(-3 m delta^2 / (8 |s|))``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    dev = operator_deviations(n, m, s_size, trials, rng)
    # rounding noise on exactly-orthonormal cases is not a deviation
    exceed = int(np.sum(dev > delta + 1e-12))
    return _record("operator_deviation", dict(n=n, m=m, s=s_size, delta=delta), trials, exceed,
                   operator_deviation_bound(m, s_size, delta),
                   note=f"max deviation {dev.max():.3g}")


def steinhaus_bound(u: float, gamma: float) -> float:
    return math.exp(-gamma * u * u) / (1.0 - gamma)


def rademacher_bound(u: float) -> float:
    return 2.0 * math.exp(-u * u / 2.0)


def _weighted_sums(kind: str, a: np.ndarray, trials: int, rng, batch: int = 20000):
    out = np.empty(trials)
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        if kind == "steinhaus":
            eps = np.exp(2j * np.pi * rng.random((b, a.size)))
        else:
            eps = rng.choice(np.array([-1.0, 1.0]), size=(b, a.size))
        out[done:done + b] = np.abs(eps @ a)
        done += b
    return out


def _weights(M, rng, weights):
    if weights is not None:
        a = np.asarray(weights, dtype=np.complex128).ravel()
        if a.size != M:
            raise ValueError("weights must have length M")
        return a
    return rng.normal(size=M) + 1j * rng.normal(size=M)


def tail_grid(kind: str, M: int, u_grid, trials: int, rng: np.random.Generator,
              gamma: float = 0.5, weights=None) -> list:
    """Audit a whole ``u`` grid on one shared sample.

    Sharing the sample makes the empirical frequencies nonincreasing in ``u``.
    """
    if kind not in ("steinhaus", "rademacher"):
        raise ValueError(f"unknown sequence kind {kind!r}")
    if kind == "steinhaus" and not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    a = _weights(M, rng, weights)
    norm = np.linalg.norm(a)
    sums = _weighted_sums(kind, a, trials, rng)
    records = []
    for u in u_grid:
        if not u > 0:
            raise ValueError("u must be positive")
        # relative guard so exact ties (|sum| == u ||a||) count as hits
        exceed = int(np.sum(sums >= u * norm * (1 - 1e-12)))
        if kind == "steinhaus":
            rec = _record("steinhaus_tail", dict(M=M, u=u, gamma=gamma), trials, exceed,
                          steinhaus_bound(u, gamma))
        else:
            rec = _record("rademacher_tail", dict(M=M, u=u), trials, exceed, rademacher_bound(u))
        records.append(rec)
    return records


def audit_steinhaus_tail(M: int, u: float, gamma: float, trials: int,
                         rng: np.random.Generator, weights=None) -> TailAuditRecord:
    """``P(|sum eps_j a_j| >= u ||a||_2) <= exp(-gamma u^2) / (1 - gamma)``
    for uniform unit-modulus ``eps_j``."""
    return tail_grid("steinhaus", M, [u], trials, rng, gamma=gamma, weights=weights)[0]


def audit_rademacher_tail(M: int, u: float, trials: int, rng: np.random.Generator,
                          weights=None) -> TailAuditRecord:
    """``P(|sum eps_j a_j| >= u ||a||_2) <= 2 exp(-u^2 / 2)`` for fair signs."""
    return tail_grid("rademacher", M, [u], trials, rng, weights=weights)[0]


# ---------------------------------------------------------------- golfing bounds

def beta_constant(c_lambda: float, gamma_c: float, alpha: float = ALPHA_DEFAULT,
                  variant: str = "tenth") -> float:
    """The constant ``beta``; ``variant='ninth'`` uses a 1/9 prefactor instead of 1/10."""
    pre = {"tenth": 10.0, "ninth": 9.0}[variant]
    return (1.0 / (pre * c_lambda)) * math.sqrt(3 * alpha / (1 - gamma_c)) \
        * math.sqrt(1.5) * 9.0 / 8.0


def audit_golfing_bounds(traces, n: int, gamma_c: float, lam: float, c_lambda: float,
                         eps: float | None = None, alpha: float = ALPHA_DEFAULT,
                         beta_variant: str = "tenth") -> list:
    """Failure frequencies of the golfing norm bounds over an ensemble of traces.

    Events audited (bad case, claimed failure probability):

    ``initial_dual_inf``    ``||u0||_inf >= 1/8`` over all of ``[n]``, ``eps``
    ``golfing_residual``    ``||w_L||_2 > 1 / (12 ln 4n)``, ``2.5 eps``
    ``offsupport_dual_inf`` final ``||u(s_x^c)||_inf >= 1/2``, ``6 eps``
    ``clean_dual_norm``     ``||h(s_f^c)||_2 > 2.1 beta sqrt(k ln(2n/eps))``, ``5 eps``
    ``correction_norm``     ``||y||_2 > 2.1 sqrt(3) beta sqrt(k ln(2n/eps))``, ``5 eps``

    Each event is the bad case of a high-probability claim, compared against
    the claimed failure probability (a multiple of ``eps``). Traces built with
    desk-scale block sizes carry a caveat in ``note``.
    """
    traces = list(traces)
    if not traces:
        raise EmptyEnsemble("no golfing traces to audit")
    if eps is None:
        eps = 1.0 / n
    beta = beta_constant(c_lambda, gamma_c, alpha, beta_variant)
    log_term = math.sqrt(math.log(2 * n / eps))
    desk = any(t.desk_mode for t in traces)
    note = "desk-mode block sizes; theory constants not met" if desk else ""
    params = dict(n=n, gamma_c=gamma_c, lam=lam, c_lambda=c_lambda, eps=eps)

    def audit(check, failed, claimed):
        return _record(check, dict(params), len(failed), sum(failed), claimed, note)

    records = [
        audit("initial_dual_inf", [t.u0_inf >= 1 / 8 for t in traces], eps),
        audit("golfing_residual", [t.w_norms[-1] > 1 / (12 * math.log(4 * n)) for t in traces], 2.5 * eps),
        audit("offsupport_dual_inf", [t.u_final_sxc_inf >= 0.5 for t in traces], 6 * eps),
        # strict, so the all-zero k = 0 ensemble does not count as a failure
        audit("clean_dual_norm", [t.h_sfc_norm > 2.1 * beta * math.sqrt(t.k) * log_term
                      for t in traces], 5 * eps),
    ]
    with_y = [t for t in traces if not math.isnan(t.y_norm)]
    if with_y:
        records.append(audit(
            "correction_norm", [t.y_norm > 2.1 * math.sqrt(3) * beta * math.sqrt(t.k) * log_term
                      for t in with_y], 5 * eps))
    return records
