import numpy as np
import pytest

from crnsim.config import ScenarioConfig
from crnsim.controller import FixedController
from crnsim.harness import Simulator
from crnsim.network import ActivitySchedule, Case, Node, Role

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def report(request):
    """Record one acceptance line; printed in the terminal summary."""
    lines = request.config.stash[_ACCEPTANCE]

    def _report(number: int, ok: bool, detail: str):
        lines.append((number, ok, detail))
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = sorted(config.stash.get(_ACCEPTANCE, []))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in lines:
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")


def static_config(horizon=300, **overrides):
    """Frozen channel, PUs silent for the whole run, all users update every step."""
    base = dict(count_pu=0, count_su=1, horizon=horizon, correlation=1.0,
                update_mode="synchronous", feasibility_margin=0.0,
                schedule=ActivitySchedule(((0, horizon, Case.CASE1),)))
    base.update(overrides)
    return ScenarioConfig(**base)


def single_user_nodes(link_km=0.5, interferers=((2.0, 0.5), (-2.5, 0.5)), power=0.05):
    """One SU at the origin plus fixed-power interferers ``(x offset km, power W)``."""
    nodes = [Node(0, Role.SU, np.array([0.0, 0.0]), np.array([link_km, 0.0]), power)]
    for j, (dx, p) in enumerate(interferers, start=1):
        tx = np.array([dx, 1.0])
        nodes.append(Node(j, Role.SU, tx, tx + np.array([0.5, 0.0]), p))
    return nodes


def single_user_sim(config, nodes=None):
    """Simulator whose only learning user is node 0; the others hold their power."""
    nodes = nodes if nodes is not None else single_user_nodes()
    fixed = {n.id: FixedController(n.id, n.role, config.targets, config.p_max)
             for n in nodes[1:]}
    return Simulator(config, nodes=nodes, controllers=fixed)


def record_steps(controller):
    """Wrap ``controller.step`` and collect ``(measurement, power, diagnostics)``."""
    log = []
    inner = controller.step

    def step(m):
        p, d = inner(m)
        log.append((m, p, d))
        return p, d
    controller.step = step
    return log
