"""Ground-truth signals, corruptions, sampling sets and measurements."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (CardinalityTooLarge, InfeasibleSizes, KeepNotSubset,
                     NotPrime)
from .spectral import PartialFourierOperator, as_vector, index_set, is_prime

INSTANCE_FORMAT = "corrupted-fourier-instance/1"


class SignModel(str, Enum):
    """How the signs of the nonzero corruption entries are drawn."""

    RADEMACHER = "rademacher"
    STEINHAUS = "steinhaus"
    FIXED = "fixed"
    ADVERSARIAL_CONSTANT = "adversarial-constant"


class XModel(str, Enum):
    ARBITRARY_FIXED = "arbitrary-fixed"
    RANDOM_SIGNS = "random-signs"


def corruption_count(gamma_c: float, m: int) -> int:
    """``round(gamma_c * m)`` with halves rounded up."""
    return int(np.floor(gamma_c * m + 0.5))


def sample_random_subset(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random ``m``-subset of ``[0, n)``, sorted."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m > n:
        raise CardinalityTooLarge(f"cannot draw {m} indices from {n}")
    return np.sort(rng.choice(n, size=m, replace=False)).astype(np.intp)


def sample_bernoulli_subset(n: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Include each index of ``[0, n)`` independently with probability ``rho``."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    return np.flatnonzero(rng.random(n) < rho).astype(np.intp)


def draw_signs(model: SignModel | str, size: int, rng: np.random.Generator,
               fixed=None) -> np.ndarray:
    model = SignModel(model)
    if model is SignModel.RADEMACHER:
        return rng.choice(np.array([-1.0, 1.0]), size=size).astype(np.complex128)
    if model is SignModel.STEINHAUS:
        return np.exp(2j * np.pi * rng.random(size))
    if model is SignModel.ADVERSARIAL_CONSTANT:
        return np.ones(size, dtype=np.complex128)
    if fixed is None:
        raise ValueError("the fixed sign model needs explicit signs")
    signs = as_vector(fixed)
    if signs.size != size:
        raise InfeasibleSizes(f"expected {size} fixed signs, got {signs.size}")
    return signs / np.abs(signs)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """One draw of ``b = A x0 + f0``.

    ``s_f`` holds positions into the measurement vector (values in
    ``[0, m)``), not frequencies.
    """

    operator: PartialFourierOperator
    x0: np.ndarray
    f0: np.ndarray
    s_x: np.ndarray
    s_f: np.ndarray
    gamma_c: float
    seed: int | None = None
    b: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.b is None:
            object.__setattr__(self, "b", self.operator.apply(self.x0) + self.f0)

    @property
    def n(self) -> int:
        return self.operator.n

    @property
    def m(self) -> int:
        return self.operator.m

    @property
    def sigma_x(self) -> np.ndarray:
        v = self.x0[self.s_x]
        return v / np.abs(v)

    @property
    def sigma_f(self) -> np.ndarray:
        v = self.f0[self.s_f]
        return v / np.abs(v)

    @property
    def s_x_c(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n), self.s_x)

    @property
    def s_f_c(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.m), self.s_f)


def build_instance(operator: PartialFourierOperator, x0, f0, gamma_c=None,
                   seed=None) -> ProblemInstance:
    """Assemble an instance from explicit ground truth."""
    x0 = as_vector(x0)
    f0 = as_vector(f0)
    if x0.size != operator.n or f0.size != operator.m:
        raise InfeasibleSizes("ground truth does not match operator shape")
    s_x = np.flatnonzero(x0 != 0)
    s_f = np.flatnonzero(f0 != 0)
    if gamma_c is None:
        gamma_c = s_f.size / operator.m if operator.m else 0.0
    return ProblemInstance(operator, x0, f0, s_x, s_f, float(gamma_c), seed)


def make_instance(n: int, m: int, k: int, gamma_c: float, *,
                  rng: np.random.Generator | None = None, seed: int | None = None,
                  x_model: XModel | str = XModel.ARBITRARY_FIXED,
                  f_sign_model: SignModel | str = SignModel.RADEMACHER,
                  support=None, x_signs=None, f_signs=None,
                  magnitude_range=(0.1, 10.0), sampling: str = "uniform",
                  theory_mode: bool = False) -> ProblemInstance:
    """Draw a problem instance.

    Parameters
    ----------
    n, m, k
        Ambient dimension, number of measurements, sparsity of ``x0``.
    gamma_c
        Corruption fraction; ``round(gamma_c * m)`` measurements are hit.
    rng, seed
        Either a generator or a seed (the seed is recorded on the instance).
    x_model
        ``arbitrary-fixed`` puts magnitudes from ``magnitude_range`` on the
        support with caller-chosen signs (all ``+1`` by default);
        ``random-signs`` draws ``+-1`` signs instead.
    support
        Optional explicit support of ``x0``; a random ``k``-set otherwise.
    sampling
        ``uniform`` draws the rows as a uniform ``m``-subset and the
        corruption support as a uniform subset of exact size. ``bernoulli``
        keeps each frequency with probability ``m/n`` and corrupts each
        measurement with probability ``gamma_c``.
    theory_mode
        Reject composite ``n``.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    if theory_mode and not is_prime(n):
        raise NotPrime(f"n = {n} is not prime")
    if not (0 <= k <= n) or not (0 <= m <= n) or not (0.0 <= gamma_c < 1.0):
        raise InfeasibleSizes(f"bad sizes n={n} m={m} k={k} gamma_c={gamma_c}")

    if sampling == "uniform":
        rows = sample_random_subset(n, m, rng)
    elif sampling == "bernoulli":
        rows = sample_bernoulli_subset(n, m / n, rng)
    else:
        raise ValueError(f"unknown sampling model {sampling!r}")
    op = PartialFourierOperator(n, rows)
    m_eff = op.m

    if support is None:
        s_x = sample_random_subset(n, k, rng)
    else:
        s_x = index_set(support, n)
        if s_x.size != k:
            raise InfeasibleSizes(f"support has {s_x.size} entries, expected k={k}")
    lo, hi = magnitude_range
    mags = rng.uniform(lo, hi, size=k)
    x_model = XModel(x_model)
    if x_model is XModel.RANDOM_SIGNS:
        signs = draw_signs(SignModel.RADEMACHER, k, rng)
    elif x_signs is not None:
        signs = draw_signs(SignModel.FIXED, k, rng, fixed=x_signs)
    else:
        signs = np.ones(k, dtype=np.complex128)
    x0 = np.zeros(n, dtype=np.complex128)
    x0[s_x] = mags * signs

    if sampling == "uniform":
        n_corrupt = corruption_count(gamma_c, m_eff)
        s_f = sample_random_subset(m_eff, n_corrupt, rng)
    else:
        s_f = sample_bernoulli_subset(m_eff, gamma_c, rng)
    f0 = np.zeros(m_eff, dtype=np.complex128)
    f0[s_f] = draw_signs(f_sign_model, s_f.size, rng, fixed=f_signs)

    return ProblemInstance(op, x0, f0, s_x, s_f, float(gamma_c), seed)


def trim_corruption(inst: ProblemInstance, keep) -> ProblemInstance:
    """Zero every corruption entry outside ``keep`` and recompute ``b``."""
    keep = index_set(keep, inst.m)
    if not np.all(np.isin(keep, inst.s_f)):
        raise KeepNotSubset("keep must be a subset of the corruption support")
    f0 = np.zeros_like(inst.f0)
    f0[keep] = inst.f0[keep]
    return replace(inst, f0=f0, s_f=keep, b=None)


def _pack(v):
    return [[float(z.real), float(z.imag)] for z in v]


def _unpack(pairs):
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    return arr[:, 0] + 1j * arr[:, 1]


def instance_to_dict(inst: ProblemInstance) -> dict:
    return {
        "format": INSTANCE_FORMAT,
        "n": inst.n,
        "m": inst.m,
        "rows": inst.operator.rows.tolist(),
        "gamma_c": inst.gamma_c,
        "seed": inst.seed,
        "s_x": inst.s_x.tolist(),
        "x0": _pack(inst.x0[inst.s_x]),
        "s_f": inst.s_f.tolist(),
        "f0": _pack(inst.f0[inst.s_f]),
    }


def instance_from_dict(d: dict) -> ProblemInstance:
    if d.get("format") != INSTANCE_FORMAT:
        raise ValueError(f"unsupported instance format {d.get('format')!r}")
    op = PartialFourierOperator(int(d["n"]), d["rows"])
    if op.m != int(d["m"]):
        raise InfeasibleSizes("row count does not match m")
    x0 = np.zeros(op.n, dtype=np.complex128)
    x0[np.asarray(d["s_x"], dtype=np.intp)] = _unpack(d["x0"])
    f0 = np.zeros(op.m, dtype=np.complex128)
    f0[np.asarray(d["s_f"], dtype=np.intp)] = _unpack(d["f0"])
    return ProblemInstance(op, x0, f0, index_set(d["s_x"], op.n),
                           index_set(d["s_f"], op.m), float(d["gamma_c"]), d["seed"])


def save_instance(inst: ProblemInstance, path) -> None:
    """Write ``inst`` as JSON; complex values are ``[re, im]`` pairs."""
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1) + "\n")


def load_instance(path) -> ProblemInstance:
    return instance_from_dict(json.loads(Path(path).read_text()))
