import numpy as np
import pytest

from defectivity.io import example1, grcar
from defectivity.structure import StructureMode

MODES = ["complex", "real", "pattern-complex", "pattern-real"]

# filled by test_acceptance, printed after the run: key -> list of (ok, detail)
ACCEPTANCE = {}


def record(key, ok, detail):
    """Add one check to an acceptance criterion; ``ok=None`` marks a skip."""
    ACCEPTANCE.setdefault(str(key), []).append((ok, detail))


def random_case(seed, name, n=5, density=0.6):
    """Seeded matrix and mode; real data for real modes, random mask with diagonal."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    if name in ("complex", "pattern-complex"):
        A = A + 1j * rng.standard_normal((n, n))
    mask = (rng.random((n, n)) < density) | np.eye(n, dtype=bool)
    return A, StructureMode.from_name(name, mask)


def random_unit(rng, mode, shape):
    E = rng.standard_normal(shape)
    if not mode.is_real:
        E = E + 1j * rng.standard_normal(shape)
    E = mode.project(E)
    return E / np.linalg.norm(E)


@pytest.fixture
def grcar6():
    return grcar(6)


@pytest.fixture
def ex1():
    return example1()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=int):
        parts = ACCEPTANCE[key]
        oks = [ok for ok, _ in parts if ok is not None]
        status = "SKIP" if not oks else "PASS" if all(oks) else "FAIL"
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {key}: {status}  {detail}")
