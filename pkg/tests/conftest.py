import numpy as np
import pytest

from fourtank.plant import PlantParams, NOMINAL_OPERATING_POINT, linearize
from fourtank.scenario import load_scenario, paper_scenario_path
from fourtank.simulation import run
from fourtank.synthesis import PoleSet, augment


@pytest.fixture(scope="session")
def params():
    return PlantParams()


@pytest.fixture(scope="session")
def linear_model(params):
    return linearize(params, NOMINAL_OPERATING_POINT)


@pytest.fixture(scope="session")
def augmented(linear_model):
    return augment(linear_model)


@pytest.fixture(scope="session")
def design_poles():
    return PoleSet.completed()


@pytest.fixture(scope="session")
def fault_cfg():
    return load_scenario(paper_scenario_path())


@pytest.fixture(scope="session")
def fault_traces(fault_cfg):
    return {mode: run(fault_cfg, mode) for mode in ("fixed", "reconfigurable")}


def random_controllable(rng, n=6, m=2):
    from fourtank.synthesis import controllability_rank

    while True:
        A = rng.normal(size=(n, n))
        B = rng.normal(size=(n, m))
        if controllability_rank(A, B) == n:
            return A, B


def random_stable_poles(rng, n=6):
    """Random self-conjugate pole set with real parts in [-3, -0.2]."""
    poles = []
    while len(poles) < n:
        if n - len(poles) >= 2 and rng.random() < 0.4:
            re, im = -rng.uniform(0.2, 3.0), rng.uniform(0.1, 2.0)
            poles += [complex(re, im), complex(re, -im)]
        else:
            poles.append(-rng.uniform(0.2, 3.0))
    return PoleSet(tuple(poles))


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record a one-line pass/fail verdict for an acceptance criterion."""
    label = request.node.get_closest_marker("criterion").args[0]
    yield label
    rep = getattr(request.node, "rep_call", None)
    status = "PASS" if rep is not None and rep.passed else "FAIL"
    ACCEPTANCE_LINES.append(f"{status}  {label}")


@pytest.hookimpl(hookwrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion label")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
