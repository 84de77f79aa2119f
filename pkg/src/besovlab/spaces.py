"""Besov and Triebel–Lizorkin norms adapted to an operator, and the
retraction pair ``S: f -> {φ_j(L) f}``, ``R: g -> Σ ψ_j(L) g_j``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import SpectralDecomposition
from .errors import DomainError
from .grid import Grid, GridFunction, as_values, weighted_lp
from .partition import DyadicSystem, PartitionPair

FLAVORS = ("besov", "triebel_lizorkin")


@dataclass(frozen=True)
class SpaceParams:
    s: float
    p: float
    q: float
    flavor: str = "besov"

    def __post_init__(self):
        if not (self.p >= 1 and self.q >= 1):
            raise DomainError(f"need p, q >= 1, got p={self.p}, q={self.q}")
        if self.flavor not in FLAVORS:
            raise DomainError(f"flavor must be one of {FLAVORS}, got {self.flavor!r}")


@dataclass(frozen=True)
class BlockSequence:
    """Blocks ``g_0..g_J`` stored as rows of an array of shape ``(J + 1, n_nodes)``."""

    grid: Grid
    blocks: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.asarray(self.blocks)
        if b.ndim != 2 or b.shape[1] != self.grid.n_nodes:
            raise DomainError(f"blocks must have shape (J + 1, {self.grid.n_nodes}), got {b.shape}")

    def __len__(self):
        return self.blocks.shape[0]

    def __add__(self, other):
        return BlockSequence(self.grid, self.blocks + other.blocks)

    def __mul__(self, alpha):
        return BlockSequence(self.grid, alpha * self.blocks)

    __rmul__ = __mul__


def window_values(dec: SpectralDecomposition, sys: DyadicSystem) -> np.ndarray:
    """``φ_j(λ_k)``, shape ``(m, J + 1)``."""
    return sys.matrix(dec.eigenvalues)


def blocks_of(dec: SpectralDecomposition, sys: DyadicSystem, F: np.ndarray) -> np.ndarray:
    """``φ_j(L)`` applied to each column of ``F`` (shape ``(n, T)``).

    Returns an array of shape ``(T, J + 1, n)``.
    """
    F = np.asarray(F)
    single = F.ndim == 1
    if single:
        F = F[:, None]
    phi = window_values(dec, sys)
    c = dec.eigenvectors.conj().T @ F
    weighted = phi.T[None, :, :] * c.T[:, None, :]
    out = weighted @ dec.eigenvectors.T
    if not np.iscomplexobj(F) and not np.iscomplexobj(dec.eigenvectors):
        out = out.real
    return out[0] if single else out


def S_op(f, dec: SpectralDecomposition, sys: DyadicSystem) -> BlockSequence:
    return BlockSequence(dec.grid, blocks_of(dec, sys, as_values(f)))


def R_op(g: BlockSequence, dec: SpectralDecomposition, pair: PartitionPair):
    if len(g) != len(pair.psi):
        raise DomainError(f"block count {len(g)} does not match the {len(pair.psi)} companion windows")
    psi = pair.psi_matrix(dec.eigenvalues)
    c = g.blocks @ dec.eigenvectors.conj()  # row j: coefficients of g_j
    out = dec.eigenvectors @ np.sum(psi.T * c, axis=0)
    if not np.iscomplexobj(g.blocks) and not np.iscomplexobj(dec.eigenvectors):
        out = out.real
    return GridFunction(dec.grid, out)


def _scale_weights(n_blocks: int, s: float) -> np.ndarray:
    return 2.0 ** (s * np.arange(n_blocks))


def lq(values: np.ndarray, q: float, axis: int = -1) -> np.ndarray:
    return weighted_lp(values, q, 1.0, axis=axis)


def besov_from_blocks(blocks: np.ndarray, prm: SpaceParams, weight: float) -> np.ndarray:
    """``ℓ^q_j(2^{js} ||g_j||_p)`` for blocks of shape ``(..., J + 1, n)``."""
    norms = weighted_lp(blocks, prm.p, weight, axis=-1)
    return lq(norms * _scale_weights(blocks.shape[-2], prm.s), prm.q, axis=-1)


def tl_from_blocks(blocks: np.ndarray, prm: SpaceParams, weight: float) -> np.ndarray:
    """``L^p_x(ℓ^q_j(2^{js} |g_j(x)|))`` for blocks of shape ``(..., J + 1, n)``."""
    if math.isinf(prm.p):
        raise DomainError("Triebel–Lizorkin norm is not supported at p = inf")
    w = _scale_weights(blocks.shape[-2], prm.s)[:, None]
    inner = lq(np.abs(blocks) * w, prm.q, axis=-2)
    return weighted_lp(inner, prm.p, weight, axis=-1)


def vector_norm(g: BlockSequence, prm: SpaceParams, sys: DyadicSystem | None = None) -> float:
    """``ℓ^{s,q}(L^p)`` norm (Besov flavor) or ``L^p(ℓ^{s,q})`` norm (TL flavor)."""
    if sys is not None and len(g) != len(sys):
        raise DomainError("block count does not match the dyadic system")
    fn = besov_from_blocks if prm.flavor == "besov" else tl_from_blocks
    return float(fn(np.asarray(g.blocks), prm, g.grid.weight))


def besov_norm(f, dec: SpectralDecomposition, sys: DyadicSystem, prm: SpaceParams) -> float:
    if prm.flavor != "besov":
        raise DomainError("besov_norm needs flavor='besov'")
    return float(besov_from_blocks(blocks_of(dec, sys, as_values(f)), prm, dec.weight))


def tl_norm(f, dec: SpectralDecomposition, sys: DyadicSystem, prm: SpaceParams) -> float:
    if prm.flavor != "triebel_lizorkin":
        raise DomainError("tl_norm needs flavor='triebel_lizorkin'")
    return float(tl_from_blocks(blocks_of(dec, sys, as_values(f)), prm, dec.weight))


def space_norm(f, dec: SpectralDecomposition, sys: DyadicSystem, prm: SpaceParams) -> float:
    return besov_norm(f, dec, sys, prm) if prm.flavor == "besov" else tl_norm(f, dec, sys, prm)


def space_norms(F: np.ndarray, dec: SpectralDecomposition, sys: DyadicSystem, prm: SpaceParams) -> np.ndarray:
    """Norms of every column of ``F``."""
    blocks = blocks_of(dec, sys, F if np.ndim(F) == 2 else np.asarray(F)[:, None])
    fn = besov_from_blocks if prm.flavor == "besov" else tl_from_blocks
    return fn(blocks, prm, dec.weight)


def spectral_projection(f, dec: SpectralDecomposition, lo: float, hi: float):
    """Keep only eigencomponents with ``lo <= |λ| <= hi``."""
    keep = (np.abs(dec.eigenvalues) >= lo) & (np.abs(dec.eigenvalues) <= hi)
    c = dec.coefficients(f)
    c = c * (keep if c.ndim == 1 else keep[:, None])
    out = dec.synthesize(c)
    return GridFunction(f.grid, out) if isinstance(f, GridFunction) else out
