import numpy as np
import pytest

from besovlab.errors import PreconditionError
from besovlab.partition import (DyadicSystem, build_dyadic_system, build_pair, indicator_system, j_max_for,
                                make_cutoff, nominal_support, partition_defect, smooth_step, verify_conditions)


@pytest.fixture(scope="module")
def system():
    return build_dyadic_system(8)


def test_smooth_step_endpoints_and_monotone():
    x = np.linspace(-0.5, 1.5, 2001)
    s = smooth_step(x)
    assert np.all(s[x <= 0] == 0) and np.all(s[x >= 1] == 1)
    assert np.all(np.diff(s) >= 0)
    np.testing.assert_allclose(s + smooth_step(1 - x), 1.0, atol=1e-15)


def test_cutoff_is_even_and_flat():
    chi = make_cutoff()
    lam = np.linspace(-3, 3, 601)
    np.testing.assert_array_equal(chi(lam), chi(-lam))
    assert np.all(chi(lam[np.abs(lam) <= 0.5]) == 1) and np.all(chi(lam[np.abs(lam) >= 1]) == 0)


def test_windows_vanish_below_their_support(system):
    for j in range(2, system.J_max + 1):
        assert system(j, 2.0 ** (j - 3)) == 0.0


def test_partition_of_unity(system):
    lam = np.linspace(0, system.covered, 1000)
    np.testing.assert_allclose(system.matrix(lam).sum(axis=1), 1.0, atol=1e-12)
    assert system.partition_defect <= 1e-12


def test_scaling_law_is_exact(system):
    lam = np.linspace(0, 2.0 ** system.J_max, 5001)
    for j in range(1, system.J_max):
        np.testing.assert_array_equal(system(j + 1, 2 * lam), system(j, lam))


def test_mother_bump_generates_windows(system):
    lam = np.geomspace(0.01, 512, 3001)
    for j in range(1, system.J_max + 1):
        np.testing.assert_array_equal(system.mother(2.0 ** (-j) * lam), system(j, lam))


def test_at_most_two_windows_overlap(system):
    lam = np.linspace(0, system.covered, 20001)
    assert np.max(np.count_nonzero(system.matrix(lam), axis=1)) <= 2


def test_derivative_constants_uniform_over_j(system):
    consts = system.deriv_constants
    for k in range(5):
        vals = np.array(consts[k][1:])
        assert vals.max() / vals.min() <= 2.0
    assert max(consts[0]) <= 1 + system.partition_defect


def test_verify_conditions_passes_and_is_refinement_stable(system):
    rep = verify_conditions(system, k_max=4)
    assert rep.passed
    assert rep.support_violations == []
    assert all(d <= 0.05 for d in rep.refinement_drift.values())
    assert set(rep.as_dict()) >= {"passed", "deriv_constants", "partition_defect", "support_violations"}


def test_shifted_window_is_reported(system):
    windows = list(system.windows)
    windows[1] = lambda lam, w=system.windows[1]: w(np.asarray(lam) * 0.6)
    bad = DyadicSystem(system.J_max, windows)
    rep = verify_conditions(bad, k_max=2)
    assert not rep.support_ok
    assert any(v["j"] == 1 for v in rep.support_violations)


def test_derivative_order_capped():
    with pytest.raises(PreconditionError):
        verify_conditions(build_dyadic_system(3, measure=False), k_max=5)


def test_j_max_floor():
    with pytest.raises(PreconditionError):
        build_dyadic_system(1)


@pytest.mark.parametrize("lam_max, J", [(0.5, 2), (2.0, 2), (2.01, 3), (1024, 11), (1025, 12)])
def test_j_max_for_covers_spectrum(lam_max, J):
    assert j_max_for(lam_max) == J
    assert lam_max <= 2.0 ** (J - 1)


def test_smootherstep_profile_also_valid():
    rep = verify_conditions(build_dyadic_system(6, profile="smootherstep"), k_max=2)
    assert rep.partition_ok and rep.support_ok


def test_unknown_profile_rejected():
    with pytest.raises(PreconditionError):
        build_dyadic_system(4, profile="boxcar")


def test_pair_identity(system):
    pair = build_pair(system)
    lam = np.linspace(0, system.covered, 1000)
    total = np.sum(pair.psi_matrix(lam) * system.matrix(lam), axis=1)
    np.testing.assert_allclose(total, 1.0, atol=1e-12)


def test_pair_support(system):
    pair = build_pair(system)
    for j in range(2, system.J_max + 1):
        lo, hi = 2.0 ** (j - 3), 2.0 ** (j + 1)
        outside = np.concatenate([np.linspace(0, lo, 200), np.linspace(hi, 4 * hi, 200)])
        assert np.all(pair.psi[j](outside) == 0)


def test_pair_smallest_system():
    sys2 = build_dyadic_system(2)
    pair = build_pair(sys2)
    lam = np.linspace(0, 1, 1000)
    np.testing.assert_array_equal(pair.psi[0](lam), sys2(0, lam) + sys2(1, lam))
    np.testing.assert_allclose(np.sum(pair.psi_matrix(lam) * sys2.matrix(lam), axis=1), 1.0, atol=1e-12)


def test_pair_rejects_far_overlap(system):
    windows = list(system.windows)
    windows[3] = lambda lam: np.ones_like(np.asarray(lam, dtype=float))
    with pytest.raises(PreconditionError):
        build_pair(DyadicSystem(system.J_max, windows))


def test_indicator_control_partitions_but_is_not_smooth():
    ind = indicator_system(6)
    assert partition_defect(ind) == 0.0
    rep = verify_conditions(ind, k_max=1)
    assert not rep.passed
    assert rep.refinement_drift[1] > 0.05


def test_nominal_support():
    assert nominal_support(0) == (0.0, 1.0)
    assert nominal_support(5) == (8.0, 32.0)
