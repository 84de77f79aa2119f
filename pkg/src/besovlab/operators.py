"""Discretized self-adjoint operators: Laplacian, Schrödinger (with and without
magnetic field), divergence-form elliptic operators, plus Kato-class helpers."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy import ndimage

from .errors import ConfigurationError, DomainError, UnsupportedSizeError
from .grid import Grid, GridFunction, as_values

KINDS = ("laplacian", "schrodinger", "magnetic_schrodinger", "elliptic")


@dataclass
class SelfAdjointOperator:
    grid: Grid
    matrix: sp.csr_matrix = field(repr=False)
    kind: str
    fingerprint: str
    spectral_bounds: tuple[float, float]
    meta: dict = field(default_factory=dict)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.matrix.data)

    def refine_bounds(self, lo: float, hi: float) -> None:
        self.spectral_bounds = (float(lo), float(hi))

    def matvec(self, f) -> np.ndarray:
        return self.matrix @ as_values(f)

    def hermiticity_error(self) -> float:
        """Relative Frobenius norm of ``A - A^H``."""
        m = self.matrix
        denom = sp.linalg.norm(m)
        return float(sp.linalg.norm(m - m.conj().T) / denom) if denom else 0.0


def gershgorin_bounds(matrix) -> tuple[float, float]:
    m = sp.csr_matrix(matrix)
    diag = m.diagonal().real
    radius = np.asarray(abs(m).sum(axis=1)).ravel() - np.abs(m.diagonal())
    return float(np.min(diag - radius)), float(np.max(diag + radius))


def _fingerprint(kind: str, grid: Grid, matrix) -> str:
    m = sp.csr_matrix(matrix, copy=True)
    m.sum_duplicates()
    m.sort_indices()
    h = hashlib.sha256()
    h.update(json.dumps({"kind": kind, "grid": grid.describe()}, sort_keys=True).encode())
    h.update(np.asarray(m.indptr, dtype="<i8").tobytes())
    h.update(np.asarray(m.indices, dtype="<i8").tobytes())
    dtype = "<c16" if np.iscomplexobj(m.data) else "<f8"
    h.update(np.asarray(m.data, dtype=dtype).tobytes())
    return h.hexdigest()


def _make(kind: str, grid: Grid, matrix, meta=None) -> SelfAdjointOperator:
    matrix = sp.csr_matrix(matrix)
    matrix.sum_duplicates()
    matrix.sort_indices()
    return SelfAdjointOperator(grid, matrix, kind, _fingerprint(kind, grid, matrix),
                               gershgorin_bounds(matrix), meta or {})


def _edges(grid: Grid, axis: int):
    """Edges ``(x, x + e_axis)`` as flat-index pairs; ``-1`` marks a Dirichlet ghost node."""
    idx = np.arange(grid.n_nodes).reshape(grid.sizes)
    n = grid.sizes[axis]
    if grid.periodic:
        tail = idx
        head = np.roll(idx, -1, axis=axis)
        return tail.ravel(), head.ravel()
    ghost_shape = list(grid.sizes)
    ghost_shape[axis] = 1
    ghost = -np.ones(ghost_shape, dtype=int)
    padded = np.concatenate([ghost, idx, ghost], axis=axis)
    tail = np.take(padded, np.arange(0, n + 1), axis=axis)
    head = np.take(padded, np.arange(1, n + 2), axis=axis)
    return tail.ravel(), head.ravel()


def _difference(grid: Grid, axis: int) -> sp.csr_matrix:
    """Edge-by-node forward difference matrix, entries ``±1/h``."""
    tail, head = _edges(grid, axis)
    h = grid.spacing[axis]
    rows, cols, vals = [], [], []
    e = np.arange(tail.size)
    for nodes, sign in ((tail, -1.0), (head, 1.0)):
        keep = nodes >= 0
        rows.append(e[keep])
        cols.append(nodes[keep])
        vals.append(np.full(keep.sum(), sign / h))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(tail.size, grid.n_nodes),
    )


def _require_dim(grid: Grid, allowed=(1, 2)):
    if grid.dim not in allowed:
        raise UnsupportedSizeError(
            f"operator assembly supports dimensions {allowed}; got n={grid.dim}"
        )


def laplacian(grid: Grid) -> SelfAdjointOperator:
    """``-Δ`` with the (2n+1)-point stencil, periodic or Dirichlet per grid."""
    _require_dim(grid)
    m = sp.csr_matrix((grid.n_nodes, grid.n_nodes))
    for axis in range(grid.dim):
        d = _difference(grid, axis)
        m = m + d.T @ d
    return _make("laplacian", grid, m)


@dataclass(frozen=True)
class PotentialSpec:
    """``V = V_plus - V_minus`` with optional real magnetic components ``a_1..a_n``."""

    V_plus: np.ndarray
    V_minus: np.ndarray
    magnetic_a: Optional[tuple[np.ndarray, ...]] = None

    def __post_init__(self):
        vp = np.asarray(as_values(self.V_plus), dtype=float)
        vm = np.asarray(as_values(self.V_minus), dtype=float)
        if np.any(vp < 0) or np.any(vm < 0):
            raise ConfigurationError("V_plus and V_minus must both be nonnegative")
        object.__setattr__(self, "V_plus", vp)
        object.__setattr__(self, "V_minus", vm)
        if self.magnetic_a is not None:
            comps = tuple(np.asarray(as_values(a)) for a in self.magnetic_a)
            if any(np.iscomplexobj(a) and np.any(np.imag(a) != 0) for a in comps):
                raise ConfigurationError("magnetic potential components must be real-valued")
            object.__setattr__(self, "magnetic_a", tuple(np.real(a).astype(float) for a in comps))

    @property
    def V(self) -> np.ndarray:
        return self.V_plus - self.V_minus

    @classmethod
    def from_values(cls, V, magnetic_a=None) -> "PotentialSpec":
        V = np.asarray(as_values(V), dtype=float)
        return cls(np.maximum(V, 0.0), np.maximum(-V, 0.0), magnetic_a)


def schrodinger(grid: Grid, pot: PotentialSpec) -> SelfAdjointOperator:
    """``-Δ + V`` with ``V = V_plus - V_minus`` on the diagonal."""
    if pot.magnetic_a is not None:
        raise ConfigurationError("potential has a magnetic part; use magnetic_schrodinger")
    _check_len(grid, pot.V_plus, "V_plus")
    _check_len(grid, pot.V_minus, "V_minus")
    lap = laplacian(grid)
    return _make("schrodinger", grid, lap.matrix + sp.diags(pot.V))


def _check_len(grid: Grid, v: np.ndarray, name: str):
    if v.shape != (grid.n_nodes,):
        raise ConfigurationError(f"{name} must have {grid.n_nodes} entries, got shape {v.shape}")


def magnetic_schrodinger(grid: Grid, pot: PotentialSpec) -> SelfAdjointOperator:
    """``-Σ (∂_j + i a_j)^2 + V`` via Peierls phases.

    The hopping from ``x`` to ``x + h e_j`` carries ``exp(i h a_j(mid))`` with
    ``a_j(mid)`` the average of the two nodal values (exact for affine ``a``).
    """
    _require_dim(grid)
    if pot.magnetic_a is None:
        raise ConfigurationError("magnetic_schrodinger needs magnetic_a components")
    if len(pot.magnetic_a) != grid.dim:
        raise ConfigurationError(f"need {grid.dim} magnetic components, got {len(pot.magnetic_a)}")
    _check_len(grid, pot.V_plus, "V_plus")
    _check_len(grid, pot.V_minus, "V_minus")
    n = grid.n_nodes
    diag = pot.V.astype(complex)
    rows, cols, vals = [], [], []
    for axis, a in enumerate(pot.magnetic_a):
        _check_len(grid, a, f"magnetic_a[{axis}]")
        h = grid.spacing[axis]
        tail, head = _edges(grid, axis)
        for nodes in (tail, head):
            keep = nodes >= 0
            np.add.at(diag, nodes[keep], 1.0 / h**2)
        inner = (tail >= 0) & (head >= 0)
        x, y = tail[inner], head[inner]
        phase = np.exp(1j * h * 0.5 * (a[x] + a[y]))
        rows += [x, y]
        cols += [y, x]
        vals += [-phase / h**2, -np.conj(phase) / h**2]
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    m = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    return _make("magnetic_schrodinger", grid, m)


def elliptic(grid: Grid, coeffs, mu: float = 0.1) -> SelfAdjointOperator:
    """``-Σ ∂_j (a_jk ∂_k)`` in flux form.

    ``coeffs`` has shape ``(n_nodes, n, n)`` (or ``(n_nodes,)`` in 1D).
    Diagonal fluxes use face-midpoint averages of ``a_jj``; the mixed terms
    (2D only) use cell-centred gradients with corner-averaged ``a_12``. Both
    pieces are symmetric by construction.
    """
    _require_dim(grid)
    a = np.asarray(coeffs, dtype=float)
    n = grid.n_nodes
    if a.shape == (n,) and grid.dim == 1:
        a = a.reshape(n, 1, 1)
    if a.shape != (n, grid.dim, grid.dim):
        raise ConfigurationError(f"coefficients must have shape {(n, grid.dim, grid.dim)}")
    if not np.allclose(a, np.swapaxes(a, 1, 2), rtol=0, atol=1e-14):
        bad = int(np.argmax(np.abs(a - np.swapaxes(a, 1, 2)).reshape(n, -1).max(axis=1)))
        raise ConfigurationError(f"coefficient matrix not symmetric at node {bad}")
    if not 0 < mu <= 1:
        raise ConfigurationError(f"ellipticity constant mu must lie in (0, 1], got {mu}")
    eigs = np.linalg.eigvalsh(a)
    bad = np.flatnonzero((eigs[:, 0] < mu * (1 - 1e-12)) | (eigs[:, -1] > (1 + 1e-12) / mu))
    if bad.size:
        node = int(bad[0])
        raise ConfigurationError(
            f"ellipticity violated at node {node} {grid.multi_index(node)}: "
            f"eigenvalues {eigs[node].tolist()} outside [{mu}, {1 / mu}]"
        )

    m = sp.csr_matrix((n, n))
    for axis in range(grid.dim):
        tail, head = _edges(grid, axis)
        ajj = a[:, axis, axis]
        at = np.where(tail >= 0, ajj[np.maximum(tail, 0)], np.nan)
        ah = np.where(head >= 0, ajj[np.maximum(head, 0)], np.nan)
        face = np.nanmean(np.stack([at, ah]), axis=0)
        d = _difference(grid, axis)
        m = m + d.T @ sp.diags(face) @ d
    if grid.dim == 2 and np.any(a[:, 0, 1] != 0):
        gx, gy, a12 = _cell_gradients(grid, a[:, 0, 1])
        cross = gx.T @ sp.diags(a12) @ gy
        m = m + cross + cross.T
    return _make("elliptic", grid, m, {"mu": mu})


def _cell_gradients(grid: Grid, a12: np.ndarray):
    """Cell-centre gradient matrices for a 2D grid and corner-averaged ``a12``."""
    nx, ny = grid.sizes
    hx, hy = grid.spacing
    idx = np.arange(grid.n_nodes).reshape(nx, ny)
    if grid.periodic:
        c00 = idx
        c10 = np.roll(idx, -1, 0)
        c01 = np.roll(idx, -1, 1)
        c11 = np.roll(c10, -1, 1)
    else:
        pad = -np.ones((nx + 2, ny + 2), dtype=int)
        pad[1:-1, 1:-1] = idx
        c00, c10 = pad[:-1, :-1], pad[1:, :-1]
        c01, c11 = pad[:-1, 1:], pad[1:, 1:]
    corners = [c.ravel() for c in (c00, c10, c01, c11)]
    ncell = corners[0].size

    def assemble(weights):
        rows, cols, vals = [], [], []
        for nodes, wgt in zip(corners, weights):
            keep = nodes >= 0
            rows.append(np.flatnonzero(keep))
            cols.append(nodes[keep])
            vals.append(np.full(keep.sum(), wgt))
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(ncell, grid.n_nodes))

    gx = assemble([-0.5 / hx, 0.5 / hx, -0.5 / hx, 0.5 / hx])
    gy = assemble([-0.5 / hy, -0.5 / hy, 0.5 / hy, 0.5 / hy])
    vals = np.stack([np.where(c >= 0, a12[np.maximum(c, 0)], np.nan) for c in corners])
    acell = np.nanmean(vals, axis=0)
    return gx, gy, acell


def build_operator(grid: Grid, kind: str, pot: Optional[PotentialSpec] = None,
                   coeffs=None, mu: float = 0.1) -> SelfAdjointOperator:
    if kind == "laplacian":
        return laplacian(grid)
    if kind == "schrodinger":
        return schrodinger(grid, pot or PotentialSpec.from_values(np.zeros(grid.n_nodes)))
    if kind == "magnetic_schrodinger":
        return magnetic_schrodinger(grid, pot)
    if kind == "elliptic":
        return elliptic(grid, coeffs, mu)
    raise ConfigurationError(f"unknown operator kind {kind!r}; expected one of {KINDS}")


# -- potential / coefficient presets ------------------------------------------------


def preset_field(grid: Grid, desc) -> np.ndarray:
    """Evaluate a named scalar-field preset or load one from CSV.

    Accepted forms: a number (constant), ``"zero"``, or a mapping with
    ``preset`` in {zero, constant, quadratic, checkerboard, random, csv} plus
    its parameters (``value``, ``scale``, ``low``/``high``, ``seed``, ``path``).
    """
    n = grid.n_nodes
    if desc is None or desc == "zero":
        return np.zeros(n)
    if isinstance(desc, (int, float)):
        return np.full(n, float(desc))
    if not isinstance(desc, dict) or "preset" not in desc:
        raise ConfigurationError(f"unrecognised field description {desc!r}")
    kind = desc["preset"]
    x = grid.coords
    if kind == "zero":
        return np.zeros(n)
    if kind == "constant":
        return np.full(n, float(desc.get("value", 1.0)))
    if kind == "quadratic":
        return float(desc.get("scale", 1.0)) * np.sum(x**2, axis=1)
    if kind == "checkerboard":
        lo, hi = float(desc.get("low", 0.5)), float(desc.get("high", 2.0))
        parity = np.indices(grid.sizes).reshape(grid.dim, -1).sum(axis=0) % 2
        return np.where(parity == 0, lo, hi)
    if kind == "random":
        rng = np.random.default_rng(int(desc.get("seed", 0)))
        lo, hi = float(desc.get("low", 0.0)), float(desc.get("high", 1.0))
        return rng.uniform(lo, hi, size=n)
    if kind == "cosine":
        # smooth periodic bump: amplitude * (1 + cos(2π x_1 / L_1)) / 2
        amp = float(desc.get("amplitude", 1.0))
        return amp * 0.5 * (1 + np.cos(2 * np.pi * x[:, 0] / grid.lengths[0]))
    if kind == "csv":
        return load_field_csv(grid, desc["path"])
    raise ConfigurationError(f"unknown field preset {kind!r}")


def load_field_csv(grid: Grid, path) -> np.ndarray:
    """Read ``node-index,value`` rows; unlisted nodes are zero."""
    values = np.zeros(grid.n_nodes)
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"field file {path} does not exist")
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                node, value = int(row[0]), float(row[1])
            except (ValueError, IndexError):
                if lineno == 1:
                    continue  # header
                raise ConfigurationError(f"{path}: malformed row {row!r}", line=lineno) from None
            if not 0 <= node < grid.n_nodes:
                raise ConfigurationError(f"{path}: node {node} out of range", line=lineno)
            values[node] = value
    return values


# -- Kato class ---------------------------------------------------------------------


def gamma_n(n: int) -> float:
    """Kato-norm threshold ``π^{n/2} / Γ(n/2 - 1)`` for ``n >= 3``."""
    if int(n) != n or n < 3:
        raise DomainError(f"gamma_n needs an integer n >= 3, got {n}")
    return math.pi ** (n / 2) / math.gamma(n / 2 - 1)


def _kato_kernel(grid: Grid, radius: float) -> np.ndarray:
    reach = [int(math.floor(radius / h * (1 + 1e-12))) for h in grid.spacing]
    axes = [np.arange(-m, m + 1) * h for m, h in zip(reach, grid.spacing)]
    mesh = np.meshgrid(*axes, indexing="ij")
    r = np.sqrt(sum(m**2 for m in mesh))
    inside = (r > 0) & (r <= radius * (1 + 1e-12))
    kernel = np.zeros_like(r)
    kernel[inside] = grid.weight * r[inside] ** (2 - grid.dim)
    return kernel


def kato_norm(V, radius: Optional[float] = None, grid: Optional[Grid] = None, at=None) -> float:
    """Discrete Kato functional ``sup_x Σ_{0<|x-y|<=r} w V(y) |x-y|^{2-n}``.

    ``radius`` defaults to eight times the largest grid spacing. With ``at`` set, the sum is evaluated at that node only instead of taking
    the supremum.
    """
    if isinstance(V, GridFunction):
        grid = V.grid
    if grid is None:
        raise ConfigurationError("kato_norm needs a grid")
    if grid.dim < 3:
        raise UnsupportedSizeError(f"Kato functional is implemented for n = 3, got n={grid.dim}")
    if radius is None:
        radius = 8 * max(grid.spacing)
    if not radius > 0:
        raise DomainError(f"radius must be positive, got {radius}")
    v = np.asarray(as_values(V), dtype=float)
    if np.any(v < 0):
        raise DomainError("kato_norm expects a nonnegative potential")
    if grid.periodic and any(2 * radius >= L for L in grid.lengths):
        raise UnsupportedSizeError("radius must be below half the torus length")
    if at is not None:
        d = grid.distances_from(at)
        mask = (d > 0) & (d <= radius * (1 + 1e-12))
        return float(np.sum(grid.weight * v[mask] * d[mask] ** (2 - grid.dim)))
    kernel = _kato_kernel(grid, radius)
    mode = "wrap" if grid.periodic else "constant"
    field_ = ndimage.correlate(v.reshape(grid.sizes), kernel, mode=mode, cval=0.0)
    return float(field_.max())


__all__: Sequence[str] = [
    "SelfAdjointOperator",
    "PotentialSpec",
    "laplacian",
    "schrodinger",
    "magnetic_schrodinger",
    "elliptic",
    "build_operator",
    "kato_norm",
    "gamma_n",
    "preset_field",
]
