"""Acceptance criteria 1-13, each at its stated tolerance and runtime budget.

A summary section at the end of the pytest run prints one PASS/FAIL line per
criterion.
"""

import json
import math
from pathlib import Path

import numpy as np

from besovlab import bounds, interp
from besovlab.calculus import eig
from besovlab.cli import main
from besovlab.grid import build_grid, random_trig_functions
from besovlab.operators import PotentialSpec, gamma_n, gershgorin_bounds, kato_norm, laplacian, preset_field, schrodinger
from besovlab.partition import build_dyadic_system, build_pair, indicator_system, j_max_for, verify_conditions
from besovlab.spaces import R_op, S_op, SpaceParams, spectral_projection
from besovlab.suites import k_invariants, maximal_test_functions

from conftest import system_for, torus_decay_constant

ORACLES = Path(__file__).parent / "oracles"


def schrodinger_1d(N, h, amplitude=4.0):
    g = build_grid(1, N, h, "periodic")
    return schrodinger(g, PotentialSpec.from_values(preset_field(g, {"preset": "cosine", "amplitude": amplitude})))


def test_01_partition_contract(criterion):
    with criterion(1, "partition contract", 1.0) as c:
        lo, hi = gershgorin_bounds(schrodinger_1d(256, 0.125).matrix)
        sys_ = build_dyadic_system(j_max_for(max(abs(lo), abs(hi))))
        rep = verify_conditions(sys_, k_max=4, partition_tol=1e-12, variation_cap=2.0)
        variation = max(rep.derivative_variation.values())
        c.note(f"J_max={sys_.J_max} defect={rep.partition_defect:.1e} variation={variation:.3f}")
        assert rep.partition_ok and rep.partition_defect <= 1e-12
        assert rep.support_ok and set(rep.derivative_variation) >= {0, 1, 2, 3, 4}
        assert variation <= 2.0 and rep.passed


def test_02_retraction(criterion, rng):
    with criterion(2, "retraction R(S f) = f", 30.0) as c:
        op = schrodinger_1d(256, 0.125)
        dec, sys_ = eig(op), system_for(op)
        pair = build_pair(sys_)
        worst = 0.0
        for _ in range(100):
            f = spectral_projection(rng.standard_normal(256), dec, 0.0, sys_.covered)
            back = R_op(S_op(f, dec, sys_), dec, pair).values
            worst = max(worst, np.linalg.norm(back - f) / np.linalg.norm(f))
        c.note(f"max relative error {worst:.1e}")
        assert worst <= 1e-9


def test_03_kernel_decay(criterion):
    with criterion(3, "kernel decay", 120.0) as c:
        reps = {}
        for name, op in (("free", laplacian(build_grid(1, 256, 0.125))), ("schrodinger", schrodinger_1d(256, 0.125))):
            dec, sys_ = eig(op), system_for(op)
            rep = bounds.decay_suite(dec, sys_, eps=1.0)
            reps[name] = (dec, sys_, rep)
            c.note(f"{name} ratio {rep.ratio:.2f}")
            assert all(math.isfinite(v) for v in rep.constants)
            assert rep.ratio <= 10

        dec, sys_, rep = reps["free"]
        grid, lam_max = dec.grid, dec.eigenvalues[-1]
        worst = 1.0
        for j in range(len(sys_)):
            if 2.0**j > lam_max or not rep.active[j]:
                continue
            oracle = torus_decay_constant(sys_.windows[j], j, grid.lengths[0], grid.spacing[0])
            r = rep.constants[j] / oracle
            worst = max(worst, r, 1 / r)
        c.note(f"continuum oracle factor {worst:.2f}")
        assert worst <= 2.0

        ind = []
        for N, h in ((256, 0.125), (512, 0.0625)):
            op = laplacian(build_grid(1, N, h))
            ind.append(bounds.decay_suite(eig(op), indicator_system(system_for(op).J_max)))
        control = bounds.refinement_stability(ind, 1.5)
        c.note(f"indicator growth {control['growth']:.2f}")
        assert not control["passed"]


def test_04_heat_bound(criterion):
    with criterion(4, "heat bound", 60.0) as c:
        grid = build_grid(1, 256, 0.125)
        times = bounds.dyadic_times(grid, 4.0, 1.0)
        assert times[0] == 4 * 0.125**2 and times[-1] == 1.0
        free = bounds.heat_bound_fit(eig(laplacian(grid)), times)
        ratio = free.c_n / (4 * math.pi) ** -0.5
        pot = bounds.heat_bound_fit(eig(schrodinger_1d(256, 0.125)), times)
        excess = max(a - b for a, b in zip(pot.per_t, free.per_t))
        c.note(f"free/continuum {ratio:.3f}, potential excess {excess:.1e}")
        assert 0.5 <= ratio <= 2.0
        assert excess <= 1e-9


def test_05_k_functional(criterion):
    with criterion(5, "K-functional solver", 60.0) as c:
        cases = json.loads((ORACLES / "kfunc_cases.json").read_text())["cases"]
        assert len(cases) >= 50
        worst, couples = 0.0, {}
        for case in cases:
            cp = interp.SequenceCouple(np.array(case["values"]), case["s0"], float(case["q0"]),
                                       case["s1"], float(case["q1"]))
            assert cp.J <= 3
            couples[json.dumps([case[k] for k in ("values", "s0", "q0", "s1", "q1")])] = cp
            k = interp.k_functional(case["t"], cp).value
            worst = max(worst, abs(k - case["K"]) / case["K"])
        inv = [k_invariants(cp, 1e-8, 1e-10) for cp in couples.values()]
        c.note(f"{len(cases)} cases, max deviation {worst:.1e}, "
               f"concavity gap {max(i['concavity_gap'] for i in inv):.1e}")
        assert worst <= 1e-4
        assert all(i["passed"] for i in inv)


def test_06_closed_form(criterion, rng):
    with criterion(6, "real-interpolation closed form", 10.0) as c:
        worst = 0.0
        for theta in (0.25, 0.5, 0.75):
            for r in (1.0, 2.0, math.inf):
                want = 1.0 if math.isinf(r) else (1 / ((1 - theta) * r) + 1 / (theta * r)) ** (1 / r)
                for q in (1.0, 2.0, math.inf):
                    cp = interp.SequenceCouple(rng.standard_normal(5), 0.3, q, 0.3, q)
                    got = interp.real_interp_norm(cp, interp.ThetaParams(theta, r))
                    worst = max(worst, abs(got / (cp.norm(0) * want) - 1))
        c.note(f"max relative error {worst:.1e}")
        assert worst <= 1e-6


SEQUENCE_CASES = [
    (interp.ThetaParams(0.5, 2.0), ((0.0, 2.0), (1.0, 2.0))),
    (interp.ThetaParams(0.25, 1.0), ((-1.0, 1.0), (1.0, math.inf))),
    (interp.ThetaParams(0.75, math.inf), ((0.5, 3.0), (2.0, 1.5))),
]


def test_07_sequence_identity(criterion):
    with criterion(7, "sequence identity", 120.0) as c:
        for prm, sides in SEQUENCE_CASES:
            rep = interp.verify_sequence_identity(100, [8, 16, 32], prm, sides, seed=0, stability=0.2)
            drift = max(rep.stability["lower_drift"], rep.stability["upper_drift"])
            c.note(f"theta={prm.theta} r={prm.r} drift {drift:.3f}")
            assert all(0 < lo <= hi < math.inf for lo, hi in rep.bands.values())
            assert drift <= 0.2 and rep.passed


def test_08_besov_real_interpolation(criterion):
    with criterion(8, "Besov real interpolation", 300.0) as c:
        cases = {}
        for N, h in ((256, 0.125), (512, 0.0625)):
            op = schrodinger_1d(N, h)
            dec = eig(op)
            F = random_trig_functions(dec.grid, np.random.default_rng(8), 40)
            cases[N] = (F, dec, system_for(op))
        rep = interp.verify_besov_real_interp(cases, 2.0, interp.ThetaParams(0.5, 2.0),
                                              ((0.0, 2.0), (1.0, 2.0)), stability=0.2)
        drift = max(rep.stability["lower_drift"], rep.stability["upper_drift"])
        c.note(f"bands {rep.bands[256][0]:.3f}-{rep.bands[256][1]:.3f} -> "
               f"{rep.bands[512][0]:.3f}-{rep.bands[512][1]:.3f}, drift {drift:.3f}")
        assert drift <= 0.2 and rep.passed


def test_09_holder_log_convexity(criterion, rng):
    with criterion(9, "Hölder log-convexity", 10.0) as c:
        exps = (1.0, 1.5, 2.0, 3.0, math.inf)
        worst, count = 0.0, 0
        for theta in (0.25, 0.5, 0.75, 0.9):
            triples = []
            for _ in range(250):
                n = int(rng.integers(1, 40))
                p0, p1 = rng.choice(exps, 2)
                a = rng.standard_normal(n)
                w0, w1 = np.exp(rng.normal(0, 2, n)), np.exp(rng.normal(0, 2, n))
                triples.append(interp.holder_triple(a, w0, w1, p0, p1, theta))
            rep = interp.log_convexity_check(triples, interp.ThetaParams(theta), C=1.0, tol=1e-12)
            assert rep.passed
            worst, count = max(worst, rep.constant), count + len(rep.ratios)
        c.note(f"{count} triples, empirical constant {worst:.15f}")
        assert count == 1000


def test_10_operator_interpolation(criterion):
    with criterion(10, "operator interpolation", 60.0) as c:
        op = schrodinger_1d(256, 0.125)
        dec, sys_ = eig(op), system_for(op)
        F = random_trig_functions(dec.grid, np.random.default_rng(10), 100)
        ends = (SpaceParams(0.0, 2, 2), SpaceParams(1.0, 2, 2))
        prm = interp.ThetaParams(0.5)
        ops = {"identity": lambda X: X,
               "multiplier_half": interp.multiplier(dec, lambda lam: 0.5 + 0 * lam),
               "heat_multiplier": interp.multiplier(dec, lambda lam: np.exp(-0.01 * lam)),
               "translation": interp.translation(dec.grid, 1),
               "random_contraction": interp.random_contraction(256, np.random.default_rng(11))}
        for name, T in ops.items():
            rep = interp.operator_interp_check(T, F, dec, sys_, ends, ends, prm, name)
            c.note(f"{name} C={rep.constant:.12g}")
            assert math.isfinite(rep.constant)
            if name in ("identity", "multiplier_half"):
                assert abs(rep.constant - 1) <= 1e-10


def test_11_maximal_domination(criterion):
    with criterion(11, "maximal domination", 60.0) as c:
        grid = build_grid(1, 512, 1 / 64, "periodic")
        fs = maximal_test_functions(grid, np.random.default_rng(11), 4)
        maxf = [bounds.hl_maximal(f).values for f in fs]
        below = max(float(np.max(np.abs(f.values) - m)) for f, m in zip(fs, maxf))
        sub = 0.0
        for i in range(len(fs)):
            for k in range(i + 1, len(fs)):
                both = bounds.hl_maximal(fs[i] + fs[k]).values
                sub = max(sub, float(np.max(both - maxf[i] - maxf[k])))
        assert below <= 1e-12 and sub <= 1e-12
        for name in ("ball", "exponential"):
            rep = bounds.maximal_domination_check(name, range(0, 9), fs)
            c.note(f"{name} variation {rep.variation:.3f}")
            assert rep.variation <= 2.0


def test_12_gamma_and_kato(criterion):
    with criterion(12, "gamma_n and Kato", 60.0) as c:
        assert abs(gamma_n(3) - math.pi) <= 1e-12 * math.pi
        assert abs(gamma_n(4) - math.pi**2) <= 1e-12 * math.pi**2
        target = 2 * math.pi * 1.0 * 0.5**2
        errs = []
        for N in (16, 32):
            grid = build_grid(3, N, 2.0 / N, "dirichlet")
            V = (np.linalg.norm(grid.coords, axis=1) <= 0.75).astype(float)
            errs.append(abs(kato_norm(V, 0.5, grid) / target - 1))
        c.note(f"relative errors {errs[0]:.3f} -> {errs[1]:.3f}")
        assert errs[1] < errs[0] and errs[1] <= 0.1


DETERMINISM_CONFIG = """\
seed: 13
grid: {dim: 1, sizes: 128, spacing: 0.125, boundary: periodic}
operator:
  kind: schrodinger
  potential: {preset: cosine, amplitude: 4.0}
suites:
  partition: {}
  retraction: {}
  decay: {}
  heat: {}
  kfunc: {couples: 4}
  realinterp: {J: [8, 16], trials: 40, besov_trials: 10}
  complexinterp: {holder_triples: 200}
  maximal: {}
  kato: {}
"""


def test_13_determinism(criterion, tmp_path):
    with criterion(13, "determinism", 300.0) as c:
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(DETERMINISM_CONFIG)
        runs = []
        for k in range(2):
            out = tmp_path / f"run{k}"
            assert main(["verify", "all", "--config", str(cfg), "--out", str(out)]) == 0
            rep = json.loads((out / "report.json").read_text())
            rep.pop("timestamp")
            rep.pop("environment")
            tables = {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}
            runs.append((rep, tables))
        assert len(runs[0][0]["suites"]) == 9
        assert runs[0][0] == runs[1][0]
        assert runs[0][1] == runs[1][1] and runs[0][1]
        c.note(f"9 suites and {len(runs[0][1])} CSV tables reproduced byte for byte")
