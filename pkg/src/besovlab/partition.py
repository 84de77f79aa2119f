"""Smooth dyadic partitions of unity on the spectral axis and their
companion systems.

Windows act on ``|λ|``. With ``χ`` a C^∞ cutoff equal to 1 on ``[0, 1/2]`` and
0 on ``[1, ∞)``::

    φ_0(λ) = χ(|λ|),    φ_j(λ) = χ(2^{-j}|λ|) - χ(2^{1-j}|λ|)   (j >= 1)

so ``φ_j = ρ(2^{-j}|λ|)`` with ``ρ(x) = χ(x) - χ(2x)`` supported in
``[1/4, 1]`` and the sum over ``j <= J`` telescopes to ``χ(2^{-J}|λ|)``,
which is exactly 1 on ``[0, 2^{J-1}]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import PreconditionError

Window = Callable[[np.ndarray], np.ndarray]


def _bump_exp(x):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(x):
    """C^∞ step: 0 for ``x <= 0``, 1 for ``x >= 1``."""
    x = np.asarray(x, dtype=float)
    a = _bump_exp(x)
    b = _bump_exp(1.0 - x)
    out = np.where(x >= 1.0, 1.0, 0.0)
    mid = (x > 0) & (x < 1)
    out[mid] = a[mid] / (a[mid] + b[mid])
    return out


def _polynomial_step(x):
    # C^2 smootherstep; an alternative transition profile for comparison runs
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x**3 * (10 - 15 * x + 6 * x**2)


PROFILES = {"exp": smooth_step, "smootherstep": _polynomial_step}


def make_cutoff(profile: str = "exp") -> Window:
    """``χ``: 1 on ``[0, 1/2]``, 0 on ``[1, ∞)``, even in λ."""
    try:
        step = PROFILES[profile]
    except KeyError:
        raise PreconditionError(f"unknown transition profile {profile!r}; have {sorted(PROFILES)}") from None

    def chi(lam):
        x = np.abs(np.asarray(lam, dtype=float))
        return 1.0 - step(2.0 * x - 1.0)

    return chi


def _window(chi: Window, j: int) -> Window:
    if j == 0:
        return lambda lam: chi(lam)
    # 2^-j scaling is exact in binary floating point
    lo, hi = 2.0 ** (-j), 2.0 ** (1 - j)
    return lambda lam: chi(lo * np.asarray(lam, dtype=float)) - chi(hi * np.asarray(lam, dtype=float))


def nominal_support(j: int) -> tuple[float, float]:
    """``[lo, hi]`` in ``|λ|`` outside of which window ``j`` must vanish."""
    return (0.0, 1.0) if j == 0 else (2.0 ** (j - 2), 2.0**j)


@dataclass
class DyadicSystem:
    J_max: int
    windows: list = field(repr=False)
    profile: str = "exp"
    deriv_constants: dict = field(default_factory=dict)
    partition_defect: float = math.nan

    def __len__(self):
        return self.J_max + 1

    def __call__(self, j: int, lam) -> np.ndarray:
        return self.windows[j](lam)

    def mother(self, x) -> np.ndarray:
        """``ρ`` on the unit scale: ``φ_j(λ) = ρ(2^{-j}|λ|)`` for ``j >= 1``."""
        return self.windows[1](2.0 * np.asarray(x, dtype=float))

    def matrix(self, lam: np.ndarray) -> np.ndarray:
        """Window values, shape ``(len(lam), J_max + 1)``."""
        lam = np.asarray(lam, dtype=float)
        return np.stack([w(lam) for w in self.windows], axis=-1)

    @property
    def covered(self) -> float:
        return 2.0 ** (self.J_max - 1)


def j_max_for(lam_max: float, minimum: int = 2) -> int:
    """Smallest ``J >= minimum`` with ``|λ|_max <= 2^{J-1}``."""
    lam_max = abs(float(lam_max))
    j = minimum
    while lam_max > 2.0 ** (j - 1):
        j += 1
    return j


def build_dyadic_system(J_max: int, profile: str = "exp", measure: bool = True) -> DyadicSystem:
    if J_max < 2:
        raise PreconditionError(f"J_max must be at least 2, got {J_max}")
    chi = make_cutoff(profile)
    sys = DyadicSystem(J_max, [_window(chi, j) for j in range(J_max + 1)], profile)
    if measure:
        sys.deriv_constants = measure_derivative_constants(sys, k_max=4)
        sys.partition_defect = partition_defect(sys)
    return sys


def partition_defect(sys: DyadicSystem, samples: int = 4001) -> float:
    lam = np.concatenate([np.linspace(0.0, 1.0, samples),
                          np.geomspace(1.0, sys.covered, samples)])
    return float(np.max(np.abs(sys.matrix(lam).sum(axis=1) - 1.0)))


def _fd_derivative_max(window: Window, lo: float, hi: float, k: int, n: int) -> float:
    """max |d^k/dλ^k window| over ``[lo, hi]`` from k-fold differences."""
    step = (hi - lo) / n
    lam = lo + step * np.arange(-k, n + k + 1)
    vals = window(lam)
    if k == 0:
        return float(np.max(np.abs(vals)))
    diff = np.diff(vals, n=k) / step**k
    return float(np.max(np.abs(diff)))


def measure_derivative_constants(sys: DyadicSystem, k_max: int = 4, n: int = 8192) -> dict:
    """Per-window scale-normalized derivative sizes ``2^{kj} max|φ_j^{(k)}|``.

    Returns ``{k: [value for j in 0..J_max]}``.
    """
    if k_max > 4:
        raise PreconditionError("derivative checks are limited to k <= 4")
    out = {}
    for k in range(k_max + 1):
        row = []
        for j in range(sys.J_max + 1):
            lo, hi = nominal_support(j)
            row.append(_fd_derivative_max(sys.windows[j], lo, hi, k, n) * 2.0 ** (k * j))
        out[k] = row
    return out


@dataclass
class ConditionReport:
    support_ok: bool
    derivative_ok: bool
    partition_ok: bool
    support_violations: list
    deriv_constants: dict
    derivative_variation: dict
    partition_defect: float
    refinement_drift: dict

    @property
    def passed(self) -> bool:
        return self.support_ok and self.derivative_ok and self.partition_ok

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "support_ok": self.support_ok,
            "derivative_ok": self.derivative_ok,
            "partition_ok": self.partition_ok,
            "support_violations": self.support_violations,
            "deriv_constants": {str(k): v for k, v in self.deriv_constants.items()},
            "derivative_variation": {str(k): v for k, v in self.derivative_variation.items()},
            "partition_defect": self.partition_defect,
            "refinement_drift": {str(k): v for k, v in self.refinement_drift.items()},
        }


def verify_conditions(sys: DyadicSystem, k_max: int = 4, partition_tol: float = 1e-12,
                      variation_cap: float = 2.0, n: int = 8192, drift_tol: float = 0.05) -> ConditionReport:
    """Check support, scale-invariant derivative bounds, and partition of unity.

    Derivative uniformity is judged over ``j = 1..J_max``: the low-pass window
    ``φ_0`` shares its transition with ``φ_1`` (they sum to 1 there), which
    forces ``2^k`` between their normalized constants for any partition.
    The constants must also agree within ``drift_tol`` when the sampling grid
    is refined twofold; finite differences of a jump grow instead.
    """
    if k_max > 4:
        raise PreconditionError("derivative checks are limited to k <= 4")
    violations = []
    for j, w in enumerate(sys.windows):
        lo, hi = nominal_support(j)
        outside = np.concatenate([
            np.linspace(0.0, lo, 257, endpoint=False)[1:] if lo > 0 else np.empty(0),
            np.linspace(hi, 4 * hi, 257)[1:],
        ])
        outside = np.concatenate([outside, -outside])
        vals = w(outside)
        bad = np.flatnonzero(vals != 0.0)
        if bad.size:
            violations.append({"j": j, "lambda": float(outside[bad[0]]), "value": float(vals[bad[0]])})

    consts = measure_derivative_constants(sys, k_max, n)
    fine = measure_derivative_constants(sys, k_max, 2 * n)
    variation, drift = {}, {}
    deriv_ok = True
    for k in range(k_max + 1):
        vals = np.array(consts[k][1:])
        variation[k] = float(vals.max() / vals.min()) if vals.min() > 0 else math.inf
        deriv_ok &= variation[k] <= variation_cap
        ref = np.array(fine[k])
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.abs(ref - np.array(consts[k])) / ref
        drift[k] = float(np.max(np.where(ref > 0, rel, 0.0)))
        deriv_ok &= drift[k] <= drift_tol
    defect = partition_defect(sys)
    sys.deriv_constants = consts
    sys.partition_defect = defect
    return ConditionReport(
        support_ok=not violations,
        derivative_ok=bool(deriv_ok),
        partition_ok=defect <= partition_tol,
        support_violations=violations,
        deriv_constants=consts,
        derivative_variation=variation,
        partition_defect=defect,
        refinement_drift=drift,
    )


@dataclass
class PartitionPair:
    """``ψ_j = φ_{j-1} + φ_j + φ_{j+1}`` (clipped), so that ``Σ ψ_j φ_j = 1``."""

    phi: DyadicSystem
    psi: list = field(repr=False)

    @property
    def J_max(self) -> int:
        return self.phi.J_max

    def psi_matrix(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        return np.stack([w(lam) for w in self.psi], axis=-1)


def _adjacent_sum(windows: Sequence[Window], j: int) -> Window:
    members = [windows[k] for k in (j - 1, j, j + 1) if 0 <= k < len(windows)]
    return lambda lam: sum(w(lam) for w in members)


def build_pair(sys: DyadicSystem, samples: int = 4001) -> PartitionPair:
    lam = np.concatenate([np.linspace(0.0, 1.0, samples), np.geomspace(1.0, 2 * sys.covered, samples)])
    vals = sys.matrix(lam)
    for j in range(len(sys)):
        for k in range(j + 2, len(sys)):
            overlap = float(np.max(np.abs(vals[:, j] * vals[:, k])))
            if overlap > 1e-14:
                raise PreconditionError(f"windows {j} and {k} overlap ({overlap:.2e}); adjacent-sum pairing invalid")
    return PartitionPair(sys, [_adjacent_sum(sys.windows, j) for j in range(len(sys))])


def indicator_system(J_max: int) -> DyadicSystem:
    """Sharp dyadic indicators ``1[2^{j-1} <= |λ| < 2^j]``; a negative control."""
    def win(j):
        lo, hi = (0.0, 1.0) if j == 0 else (2.0 ** (j - 1), 2.0**j)
        return lambda lam: ((np.abs(lam) >= lo) & (np.abs(lam) < hi)).astype(float)

    return DyadicSystem(J_max, [win(j) for j in range(J_max + 1)], profile="indicator")
