import math

import numpy as np
import pytest
import scipy.sparse as sp

from besovlab.calculus import (CACHE_MAGIC, apply_function, chebyshev_apply, eig, heat_kernel, kernel_matrix,
                               list_cache, load_decomposition, purge_cache, read_header, save_decomposition)
from besovlab.errors import DomainError, PreconditionError, UnsupportedSizeError
from besovlab.grid import GridFunction, build_grid
from besovlab.operators import PotentialSpec, _make, laplacian, magnetic_schrodinger, preset_field, schrodinger
from besovlab.partition import build_dyadic_system, j_max_for


def test_small_periodic_laplacian_eigenvalues():
    dec = eig(laplacian(build_grid(1, 4, 1.0)))
    np.testing.assert_allclose(dec.eigenvalues, [0, 2, 2, 4], atol=1e-14)


def test_diagonal_input_gives_standard_basis():
    g = build_grid(1, 5, 1.0)
    d = np.array([3.0, -1.0, 0.5, 7.0, 2.0])
    dec = eig(_make("custom", g, sp.diags(d)))
    np.testing.assert_allclose(dec.eigenvalues, np.sort(d), atol=0)
    np.testing.assert_allclose(np.abs(dec.eigenvectors), np.eye(5)[:, np.argsort(d)], atol=0)


@pytest.mark.parametrize("n", [16, 64])
def test_orthonormal_despite_repeated_eigenvalues(n):
    dec = eig(laplacian(build_grid(1, n, 0.5)))
    e = dec.eigenvectors
    np.testing.assert_allclose(e.T @ e, np.eye(n), atol=1e-10)


def test_eig_over_cap_points_to_chebyshev():
    with pytest.raises(UnsupportedSizeError, match="chebyshev"):
        eig(laplacian(build_grid(1, 64, 0.5)), dense_cap=32)


def test_eig_refines_spectral_bounds():
    op = laplacian(build_grid(1, 32, 0.5))
    dec = eig(op)
    assert op.spectral_bounds == (dec.eigenvalues[0], dec.eigenvalues[-1])


def test_identity_function_leaves_f_unchanged(schr_dec, rng):
    f = rng.standard_normal(256)
    np.testing.assert_allclose(apply_function(schr_dec, lambda lam: np.ones_like(lam), f), f, atol=1e-10)


def test_linear_function_reproduces_operator(schr_op, schr_dec, rng):
    f = GridFunction(schr_op.grid, rng.standard_normal(256))
    out = apply_function(schr_dec, lambda lam: lam, f)
    assert isinstance(out, GridFunction)
    ref = schr_op.matvec(f)
    assert np.linalg.norm(out.values - ref) <= 1e-8 * np.linalg.norm(ref)


def test_indicator_of_zero_projects_onto_mean(free_dec, rng):
    f = rng.standard_normal(256)
    out = apply_function(free_dec, lambda lam: (np.abs(lam) < 1e-9).astype(float), f)
    np.testing.assert_allclose(out, np.full(256, f.mean()), atol=1e-12)


def test_non_finite_function_is_a_domain_error(free_dec):
    with pytest.raises(DomainError):
        apply_function(free_dec, lambda lam: np.where(lam < 1e-9, np.inf, 1.0), np.ones(256))


def test_kernel_of_identity_is_delta_density(free_dec):
    K = kernel_matrix(free_dec, lambda lam: np.ones_like(lam))
    np.testing.assert_allclose(K.values, np.eye(256) / free_dec.weight, atol=1e-10)
    assert np.all(kernel_matrix(free_dec, lambda lam: np.zeros_like(lam)).values == 0)


def test_kernel_is_hermitian_and_reproduces_action(rng):
    g = build_grid(2, (6, 6), 0.5)
    a = (rng.standard_normal(36), rng.standard_normal(36))
    dec = eig(magnetic_schrodinger(g, PotentialSpec.from_values(np.zeros(36), a)))
    phi = lambda lam: np.exp(-0.3 * lam)  # noqa: E731
    K = kernel_matrix(dec, phi)
    np.testing.assert_allclose(K.values, K.values.conj().T, atol=1e-12)
    f = rng.standard_normal(36) + 1j * rng.standard_normal(36)
    np.testing.assert_allclose(K.apply(f), apply_function(dec, phi, f), atol=1e-12)


def test_heat_short_time_first_order(free_op, free_dec, rng):
    f = rng.standard_normal(256)
    t = 1e-8
    diff = np.linalg.norm(heat_kernel(free_dec, t).apply(f) - f)
    assert diff <= 2 * t * np.linalg.norm(free_op.matvec(f))


@pytest.mark.parametrize("t", [1e-3, 0.1, 1.0, 10.0])
def test_periodic_heat_conserves_mass(free_dec, t):
    K = heat_kernel(free_dec, t)
    np.testing.assert_allclose(K.weight * K.values.sum(axis=1), 1.0, atol=1e-10)


@pytest.mark.parametrize("t", [1e-3, 0.1, 1.0, 10.0])
def test_nonnegative_potential_heat_is_sub_markov(schr_dec, t):
    K = heat_kernel(schr_dec, t)
    rows = K.weight * K.values.sum(axis=1)
    assert rows.min() >= -1e-12 and rows.max() <= 1 + 1e-12


def test_heat_rejects_nonpositive_time(free_dec):
    with pytest.raises(DomainError):
        heat_kernel(free_dec, 0.0)


def test_multiplicativity_linearity_parseval_semigroup(schr_dec, rng):
    f, g = rng.standard_normal(256), rng.standard_normal(256)
    phi = lambda lam: np.exp(-0.01 * lam)  # noqa: E731
    psi = lambda lam: 1.0 / (1.0 + lam)  # noqa: E731
    both = apply_function(schr_dec, lambda lam: phi(lam) * psi(lam), f)
    comp = apply_function(schr_dec, phi, apply_function(schr_dec, psi, f))
    np.testing.assert_allclose(both, comp, atol=1e-9 * np.abs(both).max())

    lin = apply_function(schr_dec, lambda lam: 2 * phi(lam) - 3 * psi(lam), 0.5 * f + g)
    ref = (2 * apply_function(schr_dec, phi, 0.5 * f + g) - 3 * apply_function(schr_dec, psi, 0.5 * f)
           - 3 * apply_function(schr_dec, psi, g))
    np.testing.assert_allclose(lin, ref, atol=1e-12 * np.abs(ref).max())

    c = schr_dec.coefficients(f)
    assert np.sum(np.abs(c) ** 2) == pytest.approx(np.sum(f**2), rel=1e-10)

    st = heat_kernel(schr_dec, 0.3).apply(f)
    s_then_t = heat_kernel(schr_dec, 0.1).apply(heat_kernel(schr_dec, 0.2).apply(f))
    np.testing.assert_allclose(st, s_then_t, atol=1e-9 * np.abs(st).max())


def test_chebyshev_reproduces_linear_function(schr_op, rng):
    f = rng.standard_normal(256)
    ref = schr_op.matvec(f)
    for degree in (1, 5):
        out = chebyshev_apply(schr_op, lambda lam: lam, f, degree)
        assert np.linalg.norm(out.values - ref) <= 1e-12 * np.linalg.norm(ref)


@pytest.fixture(scope="module")
def wide():
    op = laplacian(build_grid(1, 1024, 1 / 16))
    dec = eig(op)
    return op, dec, build_dyadic_system(j_max_for(op.spectral_bounds[1]), measure=False)


def test_chebyshev_matches_dense_path_on_wide_windows(wide, rng):
    # at degree 200 the transition of a window must span a fixed fraction of the spectrum
    op, dec, sys = wide
    f = rng.standard_normal(op.grid.n_nodes)
    for j in (sys.J_max - 1, sys.J_max):
        cheb = chebyshev_apply(op, sys.windows[j], f, 200)
        ref = apply_function(dec, sys.windows[j], f)
        assert np.linalg.norm(cheb.values - ref) <= 1e-6 * np.linalg.norm(f)


def test_chebyshev_smooth_function_converges(wide, rng):
    op, dec, _ = wide
    f = rng.standard_normal(op.grid.n_nodes)
    phi = lambda lam: np.exp(-lam / 200.0)  # noqa: E731
    out = chebyshev_apply(op, phi, f, 80)
    assert not out.warning
    np.testing.assert_allclose(out.values, apply_function(dec, phi, f), atol=1e-10 * np.abs(f).max())


def test_chebyshev_flags_discontinuous_function(wide, rng):
    op, _, _ = wide
    f = rng.standard_normal(op.grid.n_nodes)
    step = lambda lam: (lam < 300.0).astype(float)  # noqa: E731
    estimates = [chebyshev_apply(op, step, f, d) for d in (100, 200, 400)]
    assert all(e.warning for e in estimates)
    assert min(e.error_estimate for e in estimates) > 1e-4


def test_chebyshev_rejects_zero_degree(schr_op):
    with pytest.raises(PreconditionError):
        chebyshev_apply(schr_op, lambda lam: lam, np.ones(256), 0)


def test_cache_roundtrip_list_purge(tmp_path):
    g = build_grid(2, (5, 6), 0.5)
    real = schrodinger(g, PotentialSpec.from_values(preset_field(g, {"preset": "random", "seed": 9})))
    cplx = magnetic_schrodinger(g, PotentialSpec.from_values(np.zeros(30), (np.full(30, 0.3), np.zeros(30))))
    assert list_cache(tmp_path) == []
    dec = eig(real, cache_dir=tmp_path)
    entries = list_cache(tmp_path)
    assert [e["fingerprint"] for e in entries] == [real.fingerprint]
    assert entries[0]["m"] == 30 and not entries[0]["complex"]
    with open(entries[0]["path"], "rb") as fh:
        assert fh.read(8) == CACHE_MAGIC
    back = load_decomposition(real.fingerprint, tmp_path, g)
    np.testing.assert_array_equal(back.eigenvalues, dec.eigenvalues)
    np.testing.assert_array_equal(back.eigenvectors, dec.eigenvectors)
    # a second eig call is served from the cache
    again = eig(schrodinger(g, PotentialSpec.from_values(preset_field(g, {"preset": "random", "seed": 9}))),
                cache_dir=tmp_path)
    np.testing.assert_array_equal(again.eigenvectors, dec.eigenvectors)

    cdec = eig(cplx, cache_dir=tmp_path)
    head = read_header(tmp_path / f"{cplx.fingerprint}.eig")
    assert head["complex"] and head["m"] == 30
    np.testing.assert_array_equal(load_decomposition(cplx.fingerprint, tmp_path, g).eigenvectors,
                                  cdec.eigenvectors)
    assert len(list_cache(tmp_path)) == 2
    assert purge_cache(tmp_path) == 2
    assert list_cache(tmp_path) == []


def test_cache_ignores_truncated_entries(tmp_path):
    g = build_grid(1, 16, 0.5)
    op = laplacian(g)
    path = save_decomposition(eig(op), tmp_path)
    path.write_bytes(path.read_bytes()[:-8])
    assert load_decomposition(op.fingerprint, tmp_path, g) is None
    dec = eig(op, cache_dir=tmp_path)
    assert math.isclose(dec.eigenvalues[-1], 4 / 0.25, rel_tol=1e-12)
