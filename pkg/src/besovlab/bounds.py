"""Empirical constants for kernel decay of ``φ_j(L)``, Gaussian heat-kernel
bounds, and the discrete Hardy–Littlewood maximal function."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .calculus import SpectralDecomposition, heat_kernel, kernel_matrix
from .errors import DomainError, PreconditionError, UnsupportedSizeError
from .grid import Grid, GridFunction
from .partition import DyadicSystem

KERNEL_CAP = 4096


def _majorant_factor(dist: np.ndarray, j: int, n: int, eps: float) -> np.ndarray:
    """``(1 + 2^{j/2}|x-y|)^{n+ε} 2^{-nj/2}``, the reciprocal of the decay majorant."""
    return (1.0 + 2.0 ** (j / 2) * dist) ** (n + eps) * 2.0 ** (-n * j / 2)


@dataclass
class Witness:
    j: int
    x: int
    y: int
    kernel_value: float
    majorant_value: float
    ratio: float


def _check_kernel_size(grid: Grid):
    if grid.n_nodes > KERNEL_CAP:
        raise UnsupportedSizeError(f"kernel assembly needs <= {KERNEL_CAP} nodes, got {grid.n_nodes}")


def decay_constant(dec: SpectralDecomposition, sys: DyadicSystem, j: int, eps: float = 1.0,
                   dist: Optional[np.ndarray] = None, with_witness: bool = False):
    """Smallest ``c`` with ``|K_j(x,y)| <= c 2^{nj/2} / (1 + 2^{j/2}|x-y|)^{n+ε}`` on the grid."""
    if not eps > 0:
        raise DomainError(f"epsilon must be positive, got {eps}")
    grid = dec.grid
    _check_kernel_size(grid)
    if dist is None:
        dist = grid.pairwise_distances()
    k = np.abs(kernel_matrix(dec, sys.windows[j]).values)
    scaled = k * _majorant_factor(dist, j, grid.dim, eps)
    flat = int(np.argmax(scaled))
    c = float(scaled.flat[flat])
    if not with_witness:
        return c
    x, y = divmod(flat, grid.n_nodes)
    majorant = 2.0 ** (grid.dim * j / 2) / (1 + 2.0 ** (j / 2) * dist[x, y]) ** (grid.dim + eps)
    return c, Witness(j, x, y, float(k[x, y]), float(majorant), c)


@dataclass
class DecayReport:
    eps: float
    constants: list
    active: list
    window_norms: list
    sup: float
    ratio: float
    budget: float
    ratio_cap: float
    passed: bool
    operator_fingerprint: str
    grid: dict
    witnesses: list = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("witnesses")
        return d


def decay_suite(dec: SpectralDecomposition, sys: DyadicSystem, eps: float = 1.0,
                budget: float = math.inf, ratio_cap: float = 10.0,
                active_threshold: float = 0.5) -> DecayReport:
    """``c(j)`` for every window plus uniformity over the active range.

    A window counts as active when ``||φ_j(L)||_op = max_k |φ_j(λ_k)|`` reaches
    ``active_threshold``; windows that only graze the spectrum edge carry
    genuinely tiny kernels and would make the max/min ratio meaningless.
    """
    dist = dec.grid.pairwise_distances()
    consts, witnesses, norms = [], [], []
    for j in range(len(sys)):
        c, w = decay_constant(dec, sys, j, eps, dist=dist, with_witness=True)
        consts.append(c)
        witnesses.append(w)
        norms.append(float(np.max(np.abs(sys.windows[j](dec.eigenvalues)))))
    active = [j for j, nv in enumerate(norms) if nv >= active_threshold]
    act = np.array([consts[j] for j in active]) if active else np.array([0.0])
    sup = float(max(consts))
    ratio = float(act.max() / act.min()) if act.min() > 0 else math.inf
    passed = bool(math.isfinite(sup) and sup <= budget and ratio <= ratio_cap)
    return DecayReport(eps, consts, active, norms, sup, ratio, budget, ratio_cap, passed,
                       dec.operator_fingerprint, dec.grid.describe(), witnesses)


def refinement_stability(reports: Sequence[DecayReport], factor: float = 1.5) -> dict:
    """Compare ``sup_j c(j)`` across a refinement sequence; uniform decay keeps it flat."""
    sups = [r.sup for r in reports]
    growth = max(sups) / min(sups) if min(sups) > 0 else math.inf
    return {"sups": sups, "growth": growth, "factor": factor, "passed": bool(growth <= factor)}


@dataclass
class HeatFitReport:
    c: float
    c_n: float
    times: list
    per_t: list
    floor: float
    warnings: list
    flags: list
    operator_fingerprint: str
    grid: dict

    def as_dict(self) -> dict:
        return asdict(self)


def heat_bound_fit(dec: SpectralDecomposition, t_list: Iterable[float], c: float = 0.125,
                   floor: float = 1e-8, ground_state_margin: float = 20.0) -> HeatFitReport:
    """Smallest ``c_n`` with ``|e^{-tL}(x,y)| <= c_n t^{-n/2} exp(-c|x-y|^2/t)``.

    Pairs whose Gaussian factor ``exp(-c|x-y|^2/t)`` falls below ``floor`` are
    excluded: there the exact kernel sits below the roundoff level of the dense
    eigendecomposition and the ratio measures noise.
    """
    grid = dec.grid
    _check_kernel_size(grid)
    dist2 = grid.pairwise_distances() ** 2
    n = grid.dim
    h2 = min(grid.spacing) ** 2
    diam2 = grid.diameter**2
    lam = dec.eigenvalues
    gap = float(lam[1] - lam[0]) if lam.size > 1 else 0.0
    per_t, warnings, flags = [], [], []
    times = [float(t) for t in t_list]
    for t in times:
        if not t > 0:
            raise DomainError(f"heat time must be positive, got {t}")
        if t < h2 or t > diam2:
            warnings.append(f"t={t:g} outside the resolvable window [{h2:g}, {diam2:g}]")
        k = np.abs(heat_kernel(dec, t).values)
        expo = c * dist2 / t
        mask = expo <= -math.log(floor)
        ratio = np.where(mask, k * t ** (n / 2) * np.exp(np.where(mask, expo, 0.0)), 0.0)
        per_t.append(float(ratio.max()))
        if gap > 0 and t * gap > ground_state_margin:
            flags.append(f"t={t:g}: ground-state projector regime (t*gap={t * gap:.3g})")
    return HeatFitReport(c, max(per_t), times, per_t, floor, warnings, flags,
                         dec.operator_fingerprint, grid.describe())


def dyadic_times(grid: Grid, t_min_factor: float = 4.0, t_max: float = 1.0) -> list:
    """Dyadic times from ``t_min_factor * h^2`` up to ``t_max``."""
    t = t_min_factor * min(grid.spacing) ** 2
    out = []
    while t <= t_max * (1 + 1e-12):
        out.append(t)
        t *= 2
    return out


# -- maximal function ---------------------------------------------------------------


def _radii(grid: Grid) -> np.ndarray:
    h = min(grid.spacing)
    count = int(math.floor(grid.diameter / h + 1e-9))
    return h * np.arange(count + 1)


def hl_maximal(f: GridFunction) -> GridFunction:
    """``Mf(x) = max_r`` mean of ``|f|`` over the closed discrete ball ``B(x, r)``,
    ``r ∈ {0, h, 2h, ..., diam}``."""
    grid = f.grid
    a = np.abs(f.values)
    radii = _radii(grid) * (1 + 1e-12)
    out = np.empty(grid.n_nodes)
    dist = grid.pairwise_distances() if grid.n_nodes <= KERNEL_CAP else None
    for x in range(grid.n_nodes):
        d = dist[x] if dist is not None else grid.distances_from(x)
        order = np.argsort(d, kind="stable")
        ds = d[order]
        csum = np.cumsum(a[order])
        counts = np.searchsorted(ds, radii, side="right")
        out[x] = np.max(csum[counts - 1] / counts)
    return GridFunction(grid, out)


def ball_profile(r):
    return (np.asarray(r) <= 1.0).astype(float)


def exponential_profile(r):
    return np.exp(-np.asarray(r, dtype=float))


def gaussian_profile(r):
    return np.exp(-np.asarray(r, dtype=float) ** 2)


PROFILES: dict[str, Callable] = {
    "ball": ball_profile,
    "exponential": exponential_profile,
    "gaussian": gaussian_profile,
}


def _check_monotone(profile, grid: Grid):
    r = np.linspace(0.0, grid.diameter * 2.0 ** 4, 20001)
    v = profile(r)
    if np.any(v < 0) or np.any(np.diff(v) > 1e-14):
        raise PreconditionError("profile must be nonnegative and nonincreasing in the radius")


@dataclass
class MaximalReport:
    profile: str
    constants: dict
    sup: float
    variation: float
    grid: dict

    def as_dict(self) -> dict:
        return asdict(self)


def maximal_domination_constant(profile, j: int, fs: Sequence[GridFunction],
                           dist: Optional[np.ndarray] = None, maxfs=None) -> float:
    """Smallest ``c`` with ``|h_j * f| <= c ||h_j||_1 Mf`` pointwise over ``fs``.

    ``h_j(x) = 2^{jn/2} h(2^{j/2}|x|)`` and ``||h_j||_1`` is its discrete
    (row-maximal) weighted sum on the grid.
    """
    grid = fs[0].grid
    n = grid.dim
    if dist is None:
        dist = grid.pairwise_distances()
    kern = 2.0 ** (j * n / 2) * profile(2.0 ** (j / 2) * dist)
    norm1 = float(np.max(grid.weight * kern.sum(axis=1)))
    worst = 0.0
    for i, f in enumerate(fs):
        conv = np.abs(grid.weight * (kern @ f.values))
        mf = maxfs[i] if maxfs is not None else hl_maximal(f).values
        pos = mf > 0
        if np.any(conv[~pos] > 0):
            return math.inf
        if np.any(pos):
            worst = max(worst, float(np.max(conv[pos] / (norm1 * mf[pos]))))
    return worst


def maximal_domination_check(profile, js: Iterable[int], fs: Sequence[GridFunction],
                        name: str = "custom") -> MaximalReport:
    if isinstance(profile, str):
        name, profile = profile, PROFILES[profile]
    grid = fs[0].grid
    _check_monotone(profile, grid)
    dist = grid.pairwise_distances()
    maxfs = [hl_maximal(f).values for f in fs]
    consts = {int(j): maximal_domination_constant(profile, j, fs, dist, maxfs) for j in js}
    vals = np.array(list(consts.values()))
    variation = float(vals.max() / vals.min()) if vals.min() > 0 else math.inf
    return MaximalReport(name, consts, float(vals.max()), variation, grid.describe())
