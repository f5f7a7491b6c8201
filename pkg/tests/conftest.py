import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


SMALL_DOMAIN = dict(L_x=0.05, L_y=0.095, inlet_flow=0.3, extension=0.005)
SMALL_PINS = dict(n_pins=3, r_min=0.004, r_max=0.008, min_gap=0.005)
SMALL_GRID = 32


@pytest.fixture(scope="session")
def small_domain():
    from chtsurrogate.solver import DomainSpec

    return DomainSpec(**SMALL_DOMAIN)


@pytest.fixture(scope="session")
def small_constraints(small_domain):
    from chtsurrogate.solver import LayoutConstraints

    return LayoutConstraints(domain=small_domain, **SMALL_PINS)


@pytest.fixture(scope="session")
def tiny_datagen(tmp_path_factory, small_domain, small_constraints):
    """Six solved samples on a miniature plate."""
    from chtsurrogate.solver import datagen

    out = tmp_path_factory.mktemp("datagen")
    datagen(out, 6, seed=3, grid_n=SMALL_GRID, domain=small_domain, constraints=small_constraints)
    return out


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory, tiny_datagen):
    from chtsurrogate.datapipe import assemble_dataset

    out = tmp_path_factory.mktemp("dataset")
    assemble_dataset(tiny_datagen, out, 16, fractions=(4 / 6, 1 / 6, 1 / 6))
    return out


# acceptance reporting -----------------------------------------------------------------------

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): an acceptance criterion, reported as PASS/FAIL")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    name = mark.args[0]
    failed = rep.failed
    if rep.when == "call" or failed:
        prev = _ACCEPTANCE.get(name, "PASS")
        _ACCEPTANCE[name] = "FAIL" if failed or prev == "FAIL" else ("SKIP" if rep.skipped else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in _ACCEPTANCE.items():
        terminalreporter.write_line(f"{verdict} {name}")


# cached desk-scale solver run -----------------------------------------------------------------

ACCEPT_N, ACCEPT_SEED, ACCEPT_GRID = 64, 0, 128


def cache_dir():
    root = Path(os.environ.get("CHTSURROGATE_CACHE", Path.home() / ".cache" / "chtsurrogate"))
    root.mkdir(parents=True, exist_ok=True)
    return root


@pytest.fixture(scope="session")
def desk_datagen():
    """64 solved samples on the full-size plate, generated once and reused across sessions."""
    from chtsurrogate.solver import datagen

    out = cache_dir() / f"datagen_n{ACCEPT_N}_s{ACCEPT_SEED}_g{ACCEPT_GRID}"
    datagen(out, ACCEPT_N, ACCEPT_SEED, ACCEPT_GRID, resume=True)
    return out


@pytest.fixture(scope="session")
def desk_dataset(desk_datagen, tmp_path_factory):
    from chtsurrogate.datapipe import assemble_dataset

    out = tmp_path_factory.mktemp("desk_dataset")
    assemble_dataset(desk_datagen, out, 50)
    return out
