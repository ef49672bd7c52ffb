import functools

import pytest

from morsewigner.grid import sample_grid
from morsewigner.spectrum import MorseParams

WELL_LAMBDAS = (1.0, 2.0, 4.0, 10.0)


@functools.lru_cache(maxsize=None)
def default_grid(kind: str, lam: float, resolution: int = 400):
    """Ground-state lattice on the default window, shared across test modules."""
    return sample_grid(kind, MorseParams(lam), 0, resolution=resolution)


@pytest.fixture(params=WELL_LAMBDAS, ids=lambda v: f"lam{v:g}")
def params(request):
    return MorseParams(request.param)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod and mod.REPORT:
        terminalreporter.section("acceptance")
        for line in mod.REPORT:
            terminalreporter.write_line(line)
