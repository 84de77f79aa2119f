"""Functional calculus φ(L) through a dense eigendecomposition or a Chebyshev
expansion, plus the on-disk decomposition cache."""

from __future__ import annotations

import logging
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, NumericalError, PreconditionError, UnsupportedSizeError
from .grid import Grid, GridFunction, as_values
from .operators import SelfAdjointOperator

log = logging.getLogger(__name__)

DENSE_CAP = 4096
CACHE_ENV = "BESOVLAB_CACHE_DIR"
CACHE_MAGIC = b"BESOVEIG"
CACHE_SCHEMA = 1
CACHE_SUFFIX = ".eig"
_HEADER = struct.Struct("<8sII64sQ")

ScalarFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a self-adjoint operator; columns of ``eigenvectors`` are
    orthonormal in the plain Euclidean inner product."""

    operator_fingerprint: str
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    grid: Grid

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    @property
    def weight(self) -> float:
        return self.grid.weight

    def coefficients(self, f) -> np.ndarray:
        return self.eigenvectors.conj().T @ as_values(f)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return self.eigenvectors @ coeffs

    def evaluate(self, phi: ScalarFunction) -> np.ndarray:
        """``φ(λ_k)`` for every eigenvalue, with the finiteness check."""
        vals = np.asarray(phi(self.eigenvalues))
        if vals.shape == ():
            vals = np.full(self.size, vals)
        if not np.all(np.isfinite(vals)):
            raise DomainError("function is not finite on the spectrum")
        return vals


def _check_decomposition(op: SelfAdjointOperator, lam: np.ndarray, vecs: np.ndarray) -> None:
    resid = op.matrix @ vecs - vecs * lam
    err = np.linalg.norm(resid, axis=0) / np.maximum(1.0, np.abs(lam))
    worst = float(err.max(initial=0.0))
    if worst > 1e-8:
        raise NumericalError("eigendecomposition residual too large", residual=worst)


def eig(op: SelfAdjointOperator, cache_dir=None, dense_cap: int = DENSE_CAP) -> SpectralDecomposition:
    """Full dense eigendecomposition, reusing the on-disk cache when available."""
    n = op.grid.n_nodes
    if n > dense_cap:
        raise UnsupportedSizeError(
            f"{n} nodes exceed the dense cap of {dense_cap}; use chebyshev_apply for vector application"
        )
    cache_dir = cache_dir if cache_dir is not None else os.environ.get(CACHE_ENV)
    if cache_dir:
        cached = load_decomposition(op.fingerprint, cache_dir, op.grid)
        if cached is not None:
            op.refine_bounds(cached.eigenvalues[0], cached.eigenvalues[-1])
            return cached
    dense = op.matrix.toarray()
    try:
        lam, vecs = np.linalg.eigh(dense)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    _check_decomposition(op, lam, vecs)
    lam.flags.writeable = False
    vecs.flags.writeable = False
    dec = SpectralDecomposition(op.fingerprint, lam, vecs, op.grid)
    op.refine_bounds(lam[0], lam[-1])
    if cache_dir:
        save_decomposition(dec, cache_dir)
    return dec


def _wrap(f, values):
    return GridFunction(f.grid, values) if isinstance(f, GridFunction) else values


def apply_function(dec: SpectralDecomposition, phi: ScalarFunction, f):
    """``Σ_k φ(λ_k) <e_k, f> e_k``. ``f`` may hold several columns."""
    vals = dec.evaluate(phi)
    c = dec.coefficients(f)
    c = c * (vals if c.ndim == 1 else vals[:, None])
    return _wrap(f, dec.synthesize(c))


@dataclass(frozen=True)
class KernelMatrix:
    """Kernel density ``K(x, y)``: ``(φ(L)f)(x) = Σ_y weight K(x, y) f(y)``."""

    values: np.ndarray = field(repr=False)
    weight: float
    normalization: str = "density"

    def apply(self, f) -> np.ndarray:
        return self.weight * (self.values @ as_values(f))


def kernel_matrix(dec: SpectralDecomposition, phi: ScalarFunction) -> KernelMatrix:
    vals = dec.evaluate(phi)
    e = dec.eigenvectors
    k = (e * vals) @ e.conj().T / dec.weight
    return KernelMatrix(k, dec.weight)


def heat_kernel(dec: SpectralDecomposition, t: float) -> KernelMatrix:
    if not t > 0:
        raise DomainError(f"heat time must be positive, got {t}")
    return kernel_matrix(dec, lambda lam: np.exp(-t * lam))


@dataclass(frozen=True)
class ChebyshevResult:
    values: np.ndarray = field(repr=False)
    error_estimate: float
    degree: int
    warning: bool


def chebyshev_coefficients(phi: ScalarFunction, lo: float, hi: float, degree: int) -> np.ndarray:
    half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
    return np.polynomial.chebyshev.chebinterpolate(lambda x: phi(half * x + mid), degree)


def chebyshev_apply(op: SelfAdjointOperator, phi: ScalarFunction, f, degree: int,
                    bounds: Optional[tuple[float, float]] = None, tol: float = 1e-8) -> ChebyshevResult:
    """Apply ``φ(L)`` through a degree-``degree`` Chebyshev interpolant on the
    spectral interval, using only matrix-vector products.

    ``error_estimate`` is the size of the two trailing coefficients relative to
    the largest one; ``warning`` is set when it exceeds ``tol``.
    """
    if degree < 1:
        raise PreconditionError("degree must be at least 1")
    lo, hi = bounds if bounds is not None else op.spectral_bounds
    if not hi > lo:
        hi = lo + 1.0
    coef = chebyshev_coefficients(phi, lo, hi, degree)
    half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
    m = op.matrix
    v = np.asarray(as_values(f))
    scaled = lambda x: (m @ x - mid * x) / half  # noqa: E731
    t_prev, t_cur = v, scaled(v)
    out = coef[0] * t_prev + coef[1] * t_cur
    for c in coef[2:]:
        t_prev, t_cur = t_cur, 2.0 * scaled(t_cur) - t_prev
        out = out + c * t_cur
    scale = float(np.max(np.abs(coef))) or 1.0
    est = float(np.sum(np.abs(coef[-2:]))) / scale
    return ChebyshevResult(out, est, degree, est > tol)


# -- on-disk cache ------------------------------------------------------------------


def _cache_path(cache_dir, fingerprint: str) -> Path:
    return Path(cache_dir) / f"{fingerprint}{CACHE_SUFFIX}"


def save_decomposition(dec: SpectralDecomposition, cache_dir) -> Path:
    """Write the container atomically (temp file then rename); never overwrites."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    target = _cache_path(cache_dir, dec.operator_fingerprint)
    if target.exists():
        return target
    is_complex = np.iscomplexobj(dec.eigenvectors)
    header = _HEADER.pack(CACHE_MAGIC, CACHE_SCHEMA, int(is_complex),
                          dec.operator_fingerprint.encode("ascii"), dec.size)
    fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(dec.eigenvalues, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(dec.eigenvectors, dtype="<c16" if is_complex else "<f8").tobytes())
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return target


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise ValueError(f"{path}: truncated cache header")
    magic, schema, flags, fp, m = _HEADER.unpack(raw)
    if magic != CACHE_MAGIC:
        raise ValueError(f"{path}: not a decomposition cache file")
    return {"schema": schema, "complex": bool(flags & 1), "fingerprint": fp.decode("ascii"), "m": m}


def load_decomposition(fingerprint: str, cache_dir, grid: Grid) -> Optional[SpectralDecomposition]:
    path = _cache_path(cache_dir, fingerprint)
    if not path.exists():
        return None
    try:
        head = read_header(path)
    except ValueError as exc:
        log.warning("ignoring cache entry: %s", exc)
        return None
    if head["schema"] != CACHE_SCHEMA or head["fingerprint"] != fingerprint or head["m"] != grid.n_nodes:
        log.warning("ignoring stale cache entry %s", path)
        return None
    m = head["m"]
    data = path.read_bytes()[_HEADER.size:]
    vec_dtype = np.dtype("<c16" if head["complex"] else "<f8")
    expected = 8 * m + vec_dtype.itemsize * m * m
    if len(data) != expected:
        log.warning("ignoring truncated cache entry %s", path)
        return None
    lam = np.frombuffer(data[: 8 * m], dtype="<f8").astype(float)
    vecs = np.frombuffer(data[8 * m:], dtype=vec_dtype).reshape(m, m)
    vecs = vecs.astype(complex if head["complex"] else float)
    lam.flags.writeable = False
    vecs.flags.writeable = False
    return SpectralDecomposition(fingerprint, lam, vecs, grid)


def list_cache(cache_dir) -> list[dict]:
    cache_dir = Path(cache_dir)
    if not cache_dir.exists():
        return []
    entries = []
    for path in sorted(cache_dir.glob(f"*{CACHE_SUFFIX}")):
        try:
            head = read_header(path)
        except ValueError:
            continue
        entries.append({"fingerprint": head["fingerprint"], "m": head["m"],
                        "complex": head["complex"], "bytes": path.stat().st_size,
                        "path": str(path)})
    return entries


def purge_cache(cache_dir) -> int:
    removed = 0
    for entry in list_cache(cache_dir):
        Path(entry["path"]).unlink()
        removed += 1
    return removed
