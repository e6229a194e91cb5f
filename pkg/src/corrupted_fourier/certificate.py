"""Dual certificate for exact recovery: golfing construction, Chebyshev
correction and verification.

The certificate is a vector ``q`` of length ``|s_f^c| + |s_x^c|`` solving
``Phi q = w`` with ``||q||_inf < 1``, where::

    Phi = [[lam A^*(s_x^c, s_f^c), I],      w = [-lam A^*(s_x^c, s_f) sigma_f,
           [lam A^*(s_x,   s_f^c), 0]]           sigma_x - lam A^*(s_x, s_f) sigma_f]

The first ``|s_f^c|`` coordinates of ``q`` are the dual vector ``h`` on the
clean measurements, ordered as the golfing split ``(s_1, s_2)``; the rest
equal ``-lam A^*(s_x^c, :) h``. Here ``lam`` is the weight of the
weight-in-constraint form, which equals the f-weight of the canonical program
solved by :mod:`corrupted_fourier.solver`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (DimensionMismatch, Infeasible, InfeasiblePlan,
                     SingularGram, SolverStall)
from .instances import ProblemInstance
from .spectral import as_vector, dense_submatrix

C_G_THEORY = 842.0
C_G_DESK = 4.0
GRAM_COND_LIMIT = 1e10
FULL_RANK_TOL = 1e-8
PHI_TOL = 1e-8


# ---------------------------------------------------------------- golfing plan

class PlanClippedWarning(UserWarning):
    """Requested golfing block sizes did not fit and were shrunk."""


@dataclass
class GolfingPlan:
    s1: np.ndarray
    s2: np.ndarray
    blocks: list
    L: int
    c_g: float
    eps: float
    requested_sizes: list
    sizes: list
    clipped: bool
    min_block: int = 1
    # ln(2L/eps) * L <= ln(4n) * ln(2/eps), assumed by the block-size rule
    block_log_condition: bool = True

    @property
    def order(self) -> np.ndarray:
        """Positions of the clean measurements in certificate order."""
        return np.concatenate([self.s1, self.s2])

    @property
    def uneven(self) -> bool:
        return self.s1.size != self.s2.size


def num_golfing_blocks(k: int) -> int:
    return (math.ceil(math.log(k) / 2) if k > 1 else 0) + 2


def requested_block_sizes(n: int, k: int, L: int, c_g: float, eps: float):
    head = c_g * k * math.log(4 * n) * math.log(2 / eps)
    tail = c_g * k * math.log(2 * L / eps)
    return [head, head] + [tail] * (L - 2)


def _allocate(total: int, requested, floor: int):
    want = [max(floor, math.ceil(r)) for r in requested]
    if sum(want) <= total:
        return want, False
    L = len(requested)
    spare = total - floor * L
    if spare < 0:
        raise InfeasiblePlan(f"{total} rows cannot hold {L} blocks of size {floor}")
    excess = np.array([max(r - floor, 0.0) for r in requested])
    if excess.sum() == 0:
        share = np.full(L, spare / L)
    else:
        share = spare * excess / excess.sum()
    extra = np.floor(share).astype(int)
    # largest remainder
    for i in np.argsort(-(share - extra), kind="stable")[: spare - extra.sum()]:
        extra[i] += 1
    return [floor + int(e) for e in extra], True


def plan_golfing(inst: ProblemInstance, rng: np.random.Generator,
                 c_g: float = C_G_DESK, eps: float | None = None,
                 min_block: int = 1) -> GolfingPlan:
    """Split the clean measurements and cut ``s_1`` into golfing blocks.

    Requested block sizes follow the analysis (first two blocks scale with
    ``ln(4n) ln(2/eps)``, the rest with ``ln(2L/eps)``); when they do not fit
    in ``s_1`` they are shrunk proportionally, each keeping at least
    ``min_block`` rows, and ``clipped`` is set.
    """
    n, k = inst.n, inst.s_x.size
    if eps is None:
        eps = 1.0 / n
    sfc = inst.s_f_c
    if sfc.size < 2:
        raise InfeasiblePlan("need at least two clean measurements")
    perm = rng.permutation(sfc)
    half = (sfc.size + 1) // 2
    s1, s2 = np.sort(perm[:half]), np.sort(perm[half:])

    L = num_golfing_blocks(k)
    if s1.size < L:
        raise InfeasiblePlan(f"|s_1| = {s1.size} < L = {L}")
    requested = requested_block_sizes(n, max(k, 1), L, c_g, eps)
    sizes, clipped = _allocate(s1.size, requested, max(1, min_block))
    order = rng.permutation(s1)
    cuts = np.cumsum([0] + sizes)
    blocks = [np.sort(order[cuts[i]:cuts[i + 1]]) for i in range(L)]
    if clipped:
        warnings.warn(f"golfing blocks clipped: requested {sum(math.ceil(r) for r in requested)} "
                      f"rows, |s_1| = {s1.size}", PlanClippedWarning, stacklevel=2)
    log_ok = math.log(2 * L / eps) * L <= math.log(4 * n) * math.log(2 / eps)
    return GolfingPlan(s1, s2, blocks, L, c_g, eps, requested, sizes, clipped,
                       max(1, min_block), log_ok)


# ---------------------------------------------------------------- golfing run

@dataclass
class GolfingTrace:
    w_norms: list
    u_sxc_inf: list
    u0_inf: float
    h_sfc_norm: float
    w_final_norm: float
    residual: float
    u_final_sxc_inf: float
    last_step_sxc_inf: float
    gram_condition: float
    k: int = 0
    desk_mode: bool = True
    y_norm: float = float("nan")

    def contracted(self, floor: float = 1e-14) -> bool:
        """Whether every golfing step shrank the residual.

        Steps taken from an already negligible residual count as contracting.
        """
        w = self.w_norms
        scale = max(w[0], 1.0)
        return all(b < a or a <= floor * scale for a, b in zip(w, w[1:]))


def certificate_system(inst: ProblemInstance, lam: float, order=None):
    """Dense ``(Phi, w)`` with the clean measurements taken in ``order``."""
    op = inst.operator
    order = inst.s_f_c if order is None else np.asarray(order, dtype=np.intp)
    sx, sxc = inst.s_x, inst.s_x_c
    top = np.hstack([lam * dense_submatrix(op, order, sxc, conjugate_transpose=True),
                     np.eye(sxc.size)])
    bottom = np.hstack([lam * dense_submatrix(op, order, sx, conjugate_transpose=True),
                        np.zeros((sx.size, sxc.size))])
    phi = np.vstack([top, bottom])
    sf_cols_c = dense_submatrix(op, inst.s_f, sxc, conjugate_transpose=True)
    sf_cols = dense_submatrix(op, inst.s_f, sx, conjugate_transpose=True)
    w = np.concatenate([-lam * sf_cols_c @ inst.sigma_f,
                        inst.sigma_x - lam * sf_cols @ inst.sigma_f])
    return phi, w


def run_golfing(inst: ProblemInstance, plan: GolfingPlan, lam: float):
    """Build the approximately feasible dual vector ``q0``.

    Returns ``(q0, trace)``. ``q0`` vanishes on the ``s_2`` block, and
    ``Phi q0 = w`` holds up to rounding because the last step solves the
    remaining residual exactly through the pseudo-inverse of
    ``lam A(s_1, s_x)``.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    op, m = inst.operator, inst.m
    sx, sxc = inst.s_x, inst.s_x_c
    h = np.zeros(m, dtype=np.complex128)
    h[inst.s_f] = inst.sigma_f
    u = lam * op.adjoint(h)
    u0_inf = float(np.abs(u).max()) if u.size else 0.0
    w = inst.sigma_x - u[sx]
    w_norms = [float(np.linalg.norm(w))]
    u_sxc_inf = [_inf(u[sxc])]

    for blk in plan.blocks:
        Aj = dense_submatrix(op, blk, sx)
        dh = (m / (lam * blk.size)) * (Aj @ w)
        h[blk] += dh
        # only the increment of u on s_x is subtracted
        w = w - lam * (Aj.conj().T @ dh)
        w_norms.append(float(np.linalg.norm(w)))
        u_sxc_inf.append(_inf(lam * op.adjoint(h)[sxc]))

    cond = 1.0
    last_sxc = 0.0
    if sx.size:
        A1 = lam * dense_submatrix(op, plan.s1, sx)
        gram = A1.conj().T @ A1
        cond = float(np.linalg.cond(gram))
        if not np.isfinite(cond) or cond > GRAM_COND_LIMIT:
            raise SingularGram(f"golfing Gram matrix has condition {cond:.3g}", cond)
        dh = A1 @ np.linalg.solve(gram, w)
        h[plan.s1] += dh
        w = w - A1.conj().T @ dh
        hd = np.zeros(m, dtype=np.complex128)
        hd[plan.s1] = dh
        last_sxc = _inf(lam * op.adjoint(hd)[sxc])

    u = lam * op.adjoint(h)
    q0 = np.concatenate([h[plan.s1], h[plan.s2], -u[sxc]])
    q0[plan.s1.size:plan.s1.size + plan.s2.size] = 0.0
    phi, wvec = certificate_system(inst, lam, plan.order)
    trace = GolfingTrace(
        w_norms=w_norms, u_sxc_inf=u_sxc_inf, u0_inf=u0_inf,
        h_sfc_norm=float(np.linalg.norm(h[inst.s_f_c])),
        w_final_norm=float(np.linalg.norm(w)),
        residual=float(np.linalg.norm(phi @ q0 - wvec)),
        u_final_sxc_inf=_inf(u[sxc]), last_step_sxc_inf=last_sxc,
        gram_condition=cond, k=int(sx.size), desk_mode=plan.c_g < C_G_THEORY or plan.clipped)
    return q0, trace


def _inf(v) -> float:
    return float(np.abs(v).max()) if np.size(v) else 0.0


# ---------------------------------------------------------------- Chebyshev step

def _project_l1_ball(p: np.ndarray, radius: float) -> np.ndarray:
    a = np.abs(p)
    if a.sum() <= radius:
        return p
    # sort-based simplex projection of the moduli, phases kept
    srt = np.sort(a)[::-1]
    css = np.cumsum(srt)
    j = np.arange(1, a.size + 1)
    k = np.nonzero(srt - (css - radius) / j > 0)[0][-1]
    theta = (css[k] - radius) / (k + 1)
    mod = np.maximum(a - theta, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a > 0, p * (mod / a), 0.0)


@dataclass
class ChebyshevResult:
    y: np.ndarray
    value: float
    lower_bound: float
    iterations: int
    feasibility: float


def min_inf_norm(M, z, tol: float = 1e-10, max_iter: int = 100000,
                 over_relaxation: float = 1.6) -> ChebyshevResult:
    """Minimum-modulus solution: ``argmin ||y||_inf`` subject to ``M y = z``.

    Complex ``y``. Solved by ADMM on the epigraph-free splitting
    ``||y||_inf + indicator(M y = z)``; the prox of the infinity norm comes
    from projecting onto an l1 ball. Stops when the upper bound ``||y||_inf``
    and the dual lower bound ``Re<z, mu> / ||M^* mu||_1`` agree to ``tol``
    (relative).
    """
    M = np.atleast_2d(np.asarray(M, dtype=np.complex128))
    z = as_vector(z)
    if M.shape[0] != z.size:
        raise DimensionMismatch("M and z disagree")
    p = M.shape[1]
    if np.linalg.norm(z) == 0:
        return ChebyshevResult(np.zeros(p, np.complex128), 0.0, 0.0, 0, 0.0)
    pinv = np.linalg.pinv(M, rcond=1e-12)
    y_ls = pinv @ z
    feas = np.linalg.norm(M @ y_ls - z)
    if feas > 1e-8 * (1.0 + np.linalg.norm(z)):
        raise Infeasible(f"M y = z has no solution (residual {feas:.3g})")

    def project(v):
        return v - pinv @ (M @ v - z)

    rho = 1.0 / np.abs(y_ls).max()
    y = y_ls.copy()
    u = np.zeros(p, np.complex128)
    best_val, best = _inf(y_ls), y_ls
    lb = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        v = project(y - u)
        vh = over_relaxation * v + (1 - over_relaxation) * y
        y_old = y
        t = vh + u
        y = t - _project_l1_ball(t, 1.0 / rho)
        u = u + vh - y
        if it % 10:
            continue
        val = _inf(v)
        if val < best_val:
            best_val, best = val, v
        mu = pinv.conj().T @ (rho * u)
        den = np.abs(M.conj().T @ mu).sum()
        if den > 0:
            lb = max(lb, float(np.real(np.vdot(mu, z))) / den)
        if best_val - lb <= tol * best_val:
            break
        r = np.linalg.norm(v - y)
        s = rho * np.linalg.norm(y - y_old)
        if it % 50 == 0 and it < max_iter // 2:
            if r > 10 * s:
                rho *= 2.0
                u /= 2.0
            elif s > 10 * r:
                rho /= 2.0
                u *= 2.0
    else:
        if best_val - lb > 1e-6 * best_val:
            raise SolverStall(f"Chebyshev gap {best_val - lb:.3g} after {max_iter} iterations")
    return ChebyshevResult(best, best_val, lb, it, float(np.linalg.norm(M @ best - z)))


def chebyshev_correct(inst: ProblemInstance, plan: GolfingPlan, q0, lam: float,
                      tol: float = 1e-10):
    """Correction ``dq`` with ``Phi dq = 0`` that zeroes the ``s_1`` block.

    ``y`` is the minimum-modulus vector on ``s_2`` that takes over the job of
    ``q0`` on ``s_1`` in the equations for ``s_x``, and ``v`` restores the
    ``s_x^c`` rows. Returns ``(y, v, dq)``.
    """
    op = inst.operator
    q0 = as_vector(q0)
    n1 = plan.s1.size
    if plan.s2.size < inst.s_x.size:
        raise Infeasible(f"|s_2| = {plan.s2.size} < |s_x| = {inst.s_x.size}")
    q1 = q0[:n1]
    M = dense_submatrix(op, plan.s2, inst.s_x, conjugate_transpose=True)
    z = dense_submatrix(op, plan.s1, inst.s_x, conjugate_transpose=True) @ q1
    y = min_inf_norm(M, z, tol=tol).y if inst.s_x.size else np.zeros(plan.s2.size, np.complex128)
    hv = np.concatenate([-q1, y])
    v = -lam * (dense_submatrix(op, plan.order, inst.s_x_c, conjugate_transpose=True) @ hv)
    return y, v, np.concatenate([hv, v])


# ---------------------------------------------------------------- verification

@dataclass
class ConditionRecord:
    name: str
    value: float
    bound: float
    margin: float
    passed: bool


@dataclass
class CertificateReport:
    conditions: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def failed(self) -> list:
        return [c.name for c in self.conditions if not c.passed]

    def __getitem__(self, name) -> ConditionRecord:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_records(self) -> list:
        return [dict(name=c.name, value=c.value, bound=c.bound, margin=c.margin,
                     passed=c.passed) for c in self.conditions]


@dataclass
class FullRankReport:
    ok: bool
    sigma_min: float
    schur_min_eig: float
    schur_bound: float

    @property
    def schur_ok(self) -> bool:
        return self.schur_min_eig >= self.schur_bound


def full_rank_check(inst: ProblemInstance, lam: float) -> FullRankReport:
    """Smallest singular value of ``B = [lam A(:, s_x), I(:, s_f)]``.

    Also reports the smallest eigenvalue of the Schur block
    ``lam^2 A^*(s_x, s_f^c) A(s_f^c, s_x)`` next to ``lam^2 / 2``.
    """
    op, m = inst.operator, inst.m
    B = np.zeros((m, inst.s_x.size + inst.s_f.size), dtype=np.complex128)
    B[:, :inst.s_x.size] = lam * dense_submatrix(op, np.arange(m), inst.s_x)
    B[inst.s_f, inst.s_x.size + np.arange(inst.s_f.size)] = 1.0
    if B.shape[1] == 0:
        sigma_min = 1.0
    elif B.shape[1] > B.shape[0]:
        sigma_min = 0.0
    else:
        sigma_min = float(np.linalg.svd(B, compute_uv=False)[-1])
    if inst.s_x.size:
        Ac = dense_submatrix(op, inst.s_f_c, inst.s_x)
        schur = lam ** 2 * (Ac.conj().T @ Ac)
        schur_min = float(np.linalg.eigvalsh(schur)[0])
    else:
        schur_min = math.inf
    return FullRankReport(sigma_min > FULL_RANK_TOL, sigma_min, schur_min, lam ** 2 / 2)


def _cond(name, value, bound, strict=False):
    passed = value < bound if strict else value <= bound
    return ConditionRecord(name, float(value), float(bound), float(bound - value), bool(passed))


def verify_certificate(inst: ProblemInstance, q, lam: float, order=None,
                       tol: float = PHI_TOL) -> CertificateReport:
    """Check every condition that makes ``q`` a valid certificate.

    ``order`` lists the clean-measurement positions matching the first block
    of ``q`` (sorted ``s_f^c`` by default).
    """
    q = as_vector(q)
    order = inst.s_f_c if order is None else np.asarray(order, dtype=np.intp)
    nf, nx = order.size, inst.s_x_c.size
    if q.size != nf + nx:
        raise DimensionMismatch(f"q has length {q.size}, expected {nf + nx}")
    if not np.array_equal(np.sort(order), inst.s_f_c):
        raise DimensionMismatch("order is not a permutation of the clean measurements")
    phi, w = certificate_system(inst, lam, order)
    h = np.zeros(inst.m, dtype=np.complex128)
    h[inst.s_f] = inst.sigma_f
    h[order] = q[:nf]
    u = lam * inst.operator.adjoint(h)
    rank = full_rank_check(inst, lam)
    report = CertificateReport([
        _cond("phi_q_equals_w", np.linalg.norm(phi @ q - w), tol),
        _cond("q_inf_below_one", _inf(q), 1.0, strict=True),
        _cond("h_hits_sigma_x", _inf(u[inst.s_x] - inst.sigma_x), tol),
        _cond("h_hits_sigma_f", _inf(h[inst.s_f] - inst.sigma_f), 0.0),
        _cond("h_offsupport_x", _inf(u[inst.s_x_c]), 1.0, strict=True),
        _cond("h_offsupport_f", _inf(h[inst.s_f_c]), 1.0, strict=True),
    ])
    report.conditions.append(ConditionRecord(
        "full_rank", rank.sigma_min, FULL_RANK_TOL, rank.sigma_min - FULL_RANK_TOL, rank.ok))
    return report


# ---------------------------------------------------------------- pipeline

@dataclass
class DualCertificate:
    q0: np.ndarray
    dq: np.ndarray
    q: np.ndarray
    y: np.ndarray
    v: np.ndarray
    plan: GolfingPlan
    trace: GolfingTrace
    report: CertificateReport

    @property
    def passed(self) -> bool:
        return self.report.passed


def construct_certificate(inst: ProblemInstance, lam: float, rng: np.random.Generator,
                          c_g: float = C_G_DESK, eps: float | None = None,
                          min_block: int = 1) -> DualCertificate:
    """Plan, golf, correct and verify."""
    plan = plan_golfing(inst, rng, c_g=c_g, eps=eps, min_block=min_block)
    q0, trace = run_golfing(inst, plan, lam)
    y, v, dq = chebyshev_correct(inst, plan, q0, lam)
    trace.y_norm = float(np.linalg.norm(y))
    q = q0 + dq
    report = verify_certificate(inst, q, lam, order=plan.order)
    return DualCertificate(q0, dq, q, y, v, plan, trace, report)
