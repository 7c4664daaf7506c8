from __future__ import annotations

import numpy as np
import pytest

from ppfsync.graph import Digraph
from ppfsync.plants import PlantSuite, register_suite
from ppfsync.scenario import load_text

# lines collected by test_acceptance.py, echoed once at the end of the session
ACCEPTANCE_LINES: list[str] = []


def random_strong_digraph(rng: np.random.Generator, n: int, extra_p: float = 0.3) -> Digraph:
    """A random cycle through a shuffled node order plus random extra edges and pinning."""
    w = np.zeros((n, n))
    order = rng.permutation(n)
    for a, b in zip(order, np.roll(order, -1)):
        if a != b:
            w[b, a] = rng.uniform(0.2, 3.0)
    extra = (rng.random((n, n)) < extra_p) & (w == 0)
    np.fill_diagonal(extra, False)
    w[extra] = rng.uniform(0.2, 3.0, extra.sum())
    pins = np.where(rng.random(n) < 0.4, rng.uniform(0.2, 3.0, n), 0.0)
    if not pins.any():
        pins[rng.integers(n)] = rng.uniform(0.2, 3.0)
    return Digraph(n, w, pins)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# ---------------------------------------------------------------------------
# noise-free plants for integrator and equilibrium checks

def _smooth(i, x, u, t, noise):
    return -x + 0.5 * np.sin(x) + u


def _integrator(i, x, u, t, noise):
    return u


register_suite(PlantSuite("smooth_test", 1, _smooth, batch=lambda X, U, t, n: -X + 0.5 * np.sin(X) + U),
               replace_existing=True)
register_suite(PlantSuite("integrator", 1, _integrator), replace_existing=True)

SMOOTH_TOML = """
[scenario]
name = "smooth"
plant = "smooth_test"
horizon = {horizon}
step = {step}
decimate = 1

[graph]
nodes = 3
edges = [[1, 2, 1.0], [2, 3, 1.0], [3, 1, 1.0]]
pinning = {{ "1" = 1.0 }}

[leader]
kind = "sinusoid"
amplitude = 1.0
frequency = 1.0

[initial]
states = [0.6, 1.3, 0.9]

[funnel]
rho0 = 7.0
rho_inf = 0.5
ell = 1.0

[transform]
variant = "{variant}"
delta_bar = 7.0
delta_under = 1.0
xi = 20.0

[gains]
c = 2.0
k = 0.5
pi = 2.0

[basis]
neurons = 3
"""


def smooth_config(step=0.01, horizon=1.0, variant="erf"):
    return load_text(SMOOTH_TOML.format(step=step, horizon=horizon, variant=variant), "smooth.toml")


def richardson_ratio(base_step=0.02, horizon=1.0):
    from ppfsync.engine import run_scenario

    finals = []
    for h in (base_step, base_step / 2, base_step / 4):
        lg = run_scenario(smooth_config(h, horizon))
        assert lg.status == "completed" and lg.clamp_steps == 0
        finals.append(lg.x[-1].ravel())
    d1 = np.linalg.norm(finals[0] - finals[1])
    d2 = np.linalg.norm(finals[1] - finals[2])
    return d1 / d2, d1, d2
