import math

import numpy as np
import pytest

from besovlab.calculus import apply_function, eig
from besovlab.errors import DomainError
from besovlab.grid import GridFunction, build_grid, lp_norm, weighted_lp
from besovlab.operators import PotentialSpec, preset_field, schrodinger
from besovlab.partition import build_pair
from besovlab.spaces import (BlockSequence, R_op, S_op, SpaceParams, besov_norm, space_norms, spectral_projection,
                             tl_norm, vector_norm)

from conftest import system_for

B = "besov"
F = "triebel_lizorkin"


def eigvec_at(dec, lam):
    k = int(np.argmin(np.abs(dec.eigenvalues - lam)))
    return k, dec.eigenvectors[:, k]


def test_space_params_validated():
    with pytest.raises(DomainError):
        SpaceParams(0.0, 0.5, 2)
    with pytest.raises(DomainError):
        SpaceParams(0.0, 2, 2, "sobolev")


def test_single_window_eigenvector(free_dec, free_sys):
    # free periodic Laplacian with h = 1/8 has the eigenvalue 2/h^2 = 128 = 2^7, where only window 8 is nonzero
    k, e = eigvec_at(free_dec, 128.0)
    assert free_dec.eigenvalues[k] == pytest.approx(128.0, abs=1e-10)
    assert np.count_nonzero(free_sys.matrix(free_dec.eigenvalues[k:k + 1]) > 1e-12) == 1
    f = GridFunction(free_dec.grid, e)
    for s, p, q in [(0.5, 2, 2), (1.0, 1, 3), (-0.5, math.inf, 1)]:
        expected = 2.0 ** (8 * s) * lp_norm(f, p)
        assert besov_norm(f, free_dec, free_sys, SpaceParams(s, p, q)) == pytest.approx(expected, rel=1e-10)
        if not math.isinf(p):
            assert tl_norm(f, free_dec, free_sys, SpaceParams(s, p, q, F)) == pytest.approx(expected, rel=1e-10)


def test_sup_over_blocks_at_q_infinity(schr_dec, schr_sys, rng):
    f = rng.standard_normal(256)
    blocks = [apply_function(schr_dec, w, f) for w in schr_sys.windows]
    for p in (1, 2, math.inf):
        expected = max(float(weighted_lp(b, p, schr_dec.weight)) for b in blocks)
        assert besov_norm(f, schr_dec, schr_sys, SpaceParams(0.0, p, math.inf)) == pytest.approx(expected, rel=1e-12)


def test_zero_function(schr_dec, schr_sys):
    z = np.zeros(256)
    assert besov_norm(z, schr_dec, schr_sys, SpaceParams(1, 2, 2)) == 0
    assert tl_norm(z, schr_dec, schr_sys, SpaceParams(1, 2, 2, F)) == 0
    assert not np.any(S_op(z, schr_dec, schr_sys).blocks)


def test_flavor_checks(schr_dec, schr_sys):
    with pytest.raises(DomainError):
        besov_norm(np.ones(256), schr_dec, schr_sys, SpaceParams(0, 2, 2, F))
    with pytest.raises(DomainError):
        tl_norm(np.ones(256), schr_dec, schr_sys, SpaceParams(0, math.inf, 2, F))


@pytest.mark.parametrize("s, p", [(0.0, 1.0), (0.5, 2.0), (-1.0, 3.0), (1.5, 1.5)])
def test_triebel_lizorkin_equals_besov_when_p_equals_q(schr_dec, schr_sys, rng, s, p):
    Fm = rng.standard_normal((256, 100))
    b = space_norms(Fm, schr_dec, schr_sys, SpaceParams(s, p, p, B))
    f = space_norms(Fm, schr_dec, schr_sys, SpaceParams(s, p, p, F))
    np.testing.assert_allclose(f, b, rtol=1e-12)


def test_single_block_triebel_lizorkin(free_dec, free_sys, rng):
    # the eigenspace of 128 is two-dimensional and lies where only window 8 is nonzero
    idx = np.flatnonzero(np.abs(free_dec.eigenvalues - 128.0) < 1e-9)
    assert idx.size == 2
    f = free_dec.eigenvectors[:, idx] @ rng.standard_normal(2)
    block = apply_function(free_dec, free_sys.windows[8], f)
    prm = SpaceParams(0.7, 1.5, 3.0, F)
    expected = 2 ** (8 * 0.7) * float(weighted_lp(block, 1.5, free_dec.weight))
    assert tl_norm(f, free_dec, free_sys, prm) == pytest.approx(expected, rel=1e-12)


def test_eigenvector_between_windows_has_two_blocks(free_dec, free_sys):
    k, e = eigvec_at(free_dec, 100.0)
    active = np.flatnonzero(free_sys.matrix(free_dec.eigenvalues[k:k + 1])[0])
    assert active.tolist() == [7, 8]
    g = S_op(e, free_dec, free_sys)
    norms = np.linalg.norm(g.blocks, axis=1)
    assert np.all(norms[active] > 1e-3)
    assert np.all(np.delete(norms, active) < 1e-12)


def test_blocks_sum_to_f(schr_dec, schr_sys, rng):
    f = rng.standard_normal(256)
    np.testing.assert_allclose(S_op(f, schr_dec, schr_sys).blocks.sum(axis=0), f, atol=1e-12)


def test_retraction_identity(schr_dec, schr_sys, rng):
    pair = build_pair(schr_sys)
    for _ in range(20):
        f = spectral_projection(rng.standard_normal(256), schr_dec, 0.0, schr_sys.covered)
        back = R_op(S_op(f, schr_dec, schr_sys), schr_dec, pair)
        assert np.linalg.norm(back.values - f) <= 1e-9 * np.linalg.norm(f)


def test_R_ignores_blocks_outside_companion_support(free_dec, free_sys):
    pair = build_pair(free_sys)
    _, e = eigvec_at(free_dec, 128.0)
    blocks = np.zeros((len(free_sys), 256))
    blocks[3] = e  # psi_3 vanishes beyond 16
    assert np.linalg.norm(R_op(BlockSequence(free_dec.grid, blocks), free_dec, pair).values) < 1e-12


def test_R_is_linear(schr_dec, schr_sys, rng):
    pair = build_pair(schr_sys)
    n = len(schr_sys)
    g = BlockSequence(schr_dec.grid, rng.standard_normal((n, 256)))
    h = BlockSequence(schr_dec.grid, rng.standard_normal((n, 256)))
    lhs = R_op(2.5 * g + (-0.5) * h, schr_dec, pair).values
    rhs = 2.5 * R_op(g, schr_dec, pair).values - 0.5 * R_op(h, schr_dec, pair).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * np.abs(rhs).max())


def test_R_block_count_checked(schr_dec, schr_sys):
    with pytest.raises(DomainError):
        R_op(BlockSequence(schr_dec.grid, np.zeros((2, 256))), schr_dec, build_pair(schr_sys))


def test_vector_norm_of_S_is_the_space_norm(schr_dec, schr_sys, rng):
    f = rng.standard_normal(256)
    g = S_op(f, schr_dec, schr_sys)
    for prm in (SpaceParams(0.5, 2, 2), SpaceParams(-1, 1, math.inf), SpaceParams(1, math.inf, 1)):
        assert vector_norm(g, prm, schr_sys) == besov_norm(f, schr_dec, schr_sys, prm)
    for prm in (SpaceParams(0.5, 2, 3, F), SpaceParams(1, 1, math.inf, F)):
        assert vector_norm(g, prm, schr_sys) == tl_norm(f, schr_dec, schr_sys, prm)


def test_vector_norm_single_block_and_zero(schr_dec, rng):
    blocks = np.zeros((6, 256))
    blocks[4] = rng.standard_normal(256)
    g = BlockSequence(schr_dec.grid, blocks)
    expected = 2 ** (4 * 0.3) * float(weighted_lp(blocks[4], 3, schr_dec.weight))
    assert vector_norm(g, SpaceParams(0.3, 3, 1.5)) == pytest.approx(expected, rel=1e-14)
    assert vector_norm(BlockSequence(schr_dec.grid, np.zeros((6, 256))), SpaceParams(0.3, 3, 1.5)) == 0


def test_norm_monotone_in_s_and_q(schr_dec, schr_sys, rng):
    f = rng.standard_normal(256)
    by_s = [besov_norm(f, schr_dec, schr_sys, SpaceParams(s, 2, 2)) for s in (-1, 0, 0.5, 1, 2)]
    assert all(a < b for a, b in zip(by_s, by_s[1:]))
    by_q = [besov_norm(f, schr_dec, schr_sys, SpaceParams(0.5, 2, q)) for q in (1, 1.5, 2, 4, math.inf)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(by_q, by_q[1:]))


def test_R_boundedness_stable_across_grids():
    prm = SpaceParams(0.5, 2, 2)
    worst = []
    for N in (64, 128, 256):
        g = build_grid(1, N, 0.125)
        op = schrodinger(g, PotentialSpec.from_values(preset_field(g, {"preset": "cosine", "amplitude": 4.0})))
        dec, sys_ = eig(op), system_for(op)
        pair = build_pair(sys_)
        rng = np.random.default_rng([7, N])
        ratios = []
        for _ in range(200):
            blk = BlockSequence(g, rng.standard_normal((len(sys_), N)))
            ratios.append(besov_norm(R_op(blk, dec, pair), dec, sys_, prm) / vector_norm(blk, prm))
        worst.append(max(ratios))
    assert np.all(np.isfinite(worst))
    assert max(worst) / min(worst) <= 1.2
