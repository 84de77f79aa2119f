import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from besovlab.calculus import eig
from besovlab.grid import build_grid
from besovlab.operators import PotentialSpec, gershgorin_bounds, laplacian, preset_field, schrodinger
from besovlab.partition import build_dyadic_system, j_max_for

_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def continuum_kernel(window, x, xi_max, panels=200):
    """``(1/π) ∫_0^∞ window(ξ^2) cos(xξ) dξ``, the whole-line kernel of
    ``window(-d²/dx²)``, by panelled Gauss–Legendre on ``[0, xi_max]``."""
    edges = np.linspace(0.0, xi_max, panels + 1)
    a, b = edges[:-1], edges[1:]
    xi = (((a + b) / 2)[:, None] + ((b - a) / 2)[:, None] * _GL_X).ravel()
    w = (((b - a) / 2)[:, None] * _GL_W).ravel()
    return (np.cos(np.outer(x, xi)) * (window(xi**2) * w)).sum(axis=1) / math.pi


def torus_kernel(window, x, length, xi_max, images=40):
    """Continuum kernel on the circle of the given length: periodized images."""
    return sum(continuum_kernel(window, x + m * length, xi_max) for m in range(-images, images + 1))


def torus_decay_constant(window, j, length, h, eps=1.0):
    x = np.arange(int(round(length / (2 * h))) + 1) * h
    k = torus_kernel(window, x, length, 2 ** (j / 2) * 1.01)
    return float(np.max(np.abs(k) * (1 + 2 ** (j / 2) * x) ** (1 + eps) * 2 ** (-j / 2)))


def naive_decay_constant(K, coords, j, n, eps=1.0, periodic_lengths=None):
    """Double loop over node pairs; used to cross-check the vectorized path."""
    best = 0.0
    m = len(coords)
    for x in range(m):
        for y in range(m):
            d = coords[x] - coords[y]
            if periodic_lengths is not None:
                L = np.asarray(periodic_lengths)
                d = np.abs(d)
                d = np.minimum(d, L - d)
            r = math.sqrt(float(np.sum(d**2)))
            best = max(best, abs(K[x, y]) * (1 + 2 ** (j / 2) * r) ** (n + eps) * 2 ** (-n * j / 2))
    return best


def system_for(op):
    lo, hi = gershgorin_bounds(op.matrix)
    return build_dyadic_system(j_max_for(max(abs(lo), abs(hi))), measure=False)


@pytest.fixture(scope="session")
def free_grid():
    return build_grid(1, 256, 0.125, "periodic")


@pytest.fixture(scope="session")
def free_op(free_grid):
    return laplacian(free_grid)


@pytest.fixture(scope="session")
def free_dec(free_op):
    return eig(free_op)


@pytest.fixture(scope="session")
def free_sys(free_op):
    return system_for(free_op)


@pytest.fixture(scope="session")
def schr_op(free_grid):
    V = preset_field(free_grid, {"preset": "cosine", "amplitude": 4.0})
    return schrodinger(free_grid, PotentialSpec.from_values(V))


@pytest.fixture(scope="session")
def schr_dec(schr_op):
    return eig(schr_op)


@pytest.fixture(scope="session")
def schr_sys(schr_op):
    return system_for(schr_op)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


class Criterion:
    def __init__(self):
        self.details = []

    def note(self, text):
        self.details.append(text)


@pytest.fixture
def criterion(request):
    """Context manager that times one acceptance criterion and logs a PASS/FAIL line."""
    log = request.config.stash.setdefault(_ACCEPTANCE, [])

    @contextmanager
    def run(number, title, budget):
        rec = Criterion()
        start = time.perf_counter()
        try:
            yield rec
        except BaseException:
            log.append((number, f"FAIL  {number:2d}. {title} ({time.perf_counter() - start:.1f}s) "
                                + "; ".join(rec.details)))
            raise
        elapsed = time.perf_counter() - start
        ok = elapsed < budget
        rec.note(f"{elapsed:.1f}s of {budget:g}s budget")
        log.append((number, f"{'PASS' if ok else 'FAIL'}  {number:2d}. {title}: " + "; ".join(rec.details)))
        assert ok, f"criterion {number} took {elapsed:.1f}s, budget {budget}s"

    return run


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash.get(_ACCEPTANCE, [])
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(log):
        terminalreporter.write_line(line)
