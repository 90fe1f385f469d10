import numpy as np
import pytest

from kvn.expr import Var
from kvn.state import ExtendedState
from kvn.superspace import ghost_algebra

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_poly(rng, names, degree=3, terms=6):
    """Random polynomial expression with bounded degree."""
    out = float(rng.normal())
    for _ in range(terms):
        d = int(rng.integers(1, degree + 1))
        t = float(rng.normal())
        for _ in range(d):
            t = t * Var(names[int(rng.integers(len(names)))])
        out = t + out
    return out


def ghost_state(rng, n, lam=None):
    """State whose ghosts are random linear combinations of the generators."""
    alg = ghost_algebra(n)
    n2 = 2 * n
    c = [sum(alg.gen(f"c{j + 1}") * float(rng.normal()) for j in range(n2)) for _ in range(n2)]
    cb = [sum(alg.gen(f"cbar{j + 1}") * float(rng.normal()) for j in range(n2)) for _ in range(n2)]
    lam = rng.normal(size=n2) if lam is None else lam
    return ExtendedState(rng.normal(size=n2), lam, c=c, cbar=cb)


def grassmann_max(x):
    """Largest absolute coefficient of a number or Grassmann element."""
    if hasattr(x, "terms"):
        return max([abs(v) for v in x.terms.values()] + [0.0])
    return abs(x)
