"""
Scenario stepping loop, metrics and persistence.

Each step of ``run_scenario``:

1. evolve the channel (skipped at step 0),
2. set PU activity from the schedule and measure every user's SIR and
   interference,
3. step the scheduled controller(s) with their own measurements only,
4. apply the commanded powers,
5. record one ``MetricsRecord`` from the post-update SIRs.

Every maximal run of steps with the same activity case is a finite-horizon
segment of its own: controllers restart at each case switch with the
segment length as horizon, and the terminal cost ``E' P_N E`` of every
user active in the segment is charged at its last step.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .config import ScenarioConfig
from .controller import (BaselineController, FHController, Measurement, OracleController,
                         _Controller)
from .dynamics import make_augmented_error
from .estimator import utility
from .network import Case, CRNetwork, Role, admit_placement, place_nodes


@dataclass
class MetricsRecord:
    step: int
    time: float
    case: int
    sir_pu_db: float          # mean over active PUs of their SIR in dB
    sir_su_db: float
    power_pu: float           # mean stored power over active PUs (W)
    power_su: float
    bellman_error: float      # mean |e_FTBE| over users updated this step
    terminal_error: float     # mean ||e_FC|| over users updated this step
    spectrum_efficiency: float
    cumulative_cost: float
    saturations: int          # users clamped at P_max this step


FIELD_NAMES = tuple(f.name for f in fields(MetricsRecord))
_FIELD_TYPES = {"step": int, "case": int, "saturations": int}


def spectrum_efficiency(sir, bandwidth_hz: float = 1.0) -> float:
    """Shannon throughput of the given links divided by the shared bandwidth (bits/s/Hz)."""
    if not bandwidth_hz > 0:
        raise ValueError("bandwidth must be > 0")
    throughput = bandwidth_hz * np.sum(np.log2(1.0 + np.asarray(sir, dtype=float)))
    return float(throughput / bandwidth_hz)


def stage_cost(E, v, Q, S) -> float:
    return utility(E, v, Q, S)


def cumulative_cost(stage_costs, terminal_costs=()) -> float:
    """Sum of stage costs plus terminal charges of a trace fragment."""
    return float(math.fsum(stage_costs) + math.fsum(terminal_costs))


def segments(config: ScenarioConfig):
    """``[(k_start, k_end, case)]`` covering steps ``0 .. N-1`` of the run."""
    sched = config.activity()
    out = []
    for k in range(config.horizon):
        case = sched.case_at(k * config.sample_time)
        if out and out[-1][2] == case:
            out[-1][1] = k + 1
        else:
            out.append([k, k + 1, case])
    return [tuple(s) for s in out]


def mean_sir_db(sir) -> float:
    """Mean of the per-user SIRs in dB; NaN for an empty group, -inf if any user is silent."""
    if len(sir) == 0:
        return float("nan")
    with np.errstate(divide="ignore"):
        return float(np.mean(10.0 * np.log10(sir)))


def _mean(values):
    return float(np.mean(values)) if len(values) else float("nan")


class Simulator:
    """Owns the network, one controller per node and the RNG streams.

    ``controllers`` maps node ids to ready-made controllers and replaces
    the configured kind for those nodes (used for fixed interferers).
    ``nodes`` replaces random placement.
    """

    def __init__(self, config: ScenarioConfig, nodes=None, controllers=None):
        self.config = config
        root = np.random.SeedSequence(config.seed)
        place_seq, chan_seq, ctrl_seq = root.spawn(3)
        if nodes is None:
            nodes = self._place(np.random.default_rng(place_seq))
        self.network = CRNetwork(nodes, config.channel_params, config.noise_floor,
                                 config.p_max, config.min_distance)
        self.channel_rng = np.random.default_rng(chan_seq)
        if self.network.size:
            self.network.init_channel(self.channel_rng)
        ctrl_rngs = [np.random.default_rng(s) for s in ctrl_seq.spawn(self.network.size)]
        overrides = controllers or {}
        self.controllers = [overrides.get(n.id) or self._make_controller(n, ctrl_rngs[i])
                            for i, n in enumerate(self.network.nodes)]
        self.Q, self.S, self.P_N = config.Q, config.s, config.P_N

    def _place(self, rng):
        c = self.config
        nodes = place_nodes(c.count_pu, c.count_su, c.area_km, rng, c.link_distance,
                            (c.p_init_min, c.p_init_max))
        if c.feasibility_margin > 0 and nodes:
            roles = [n.role for n in nodes]
            sets = [[c.targets.for_user(r, case) or 0.0 for r in roles]
                    for case in (Case.CASE1, Case.CASE2)]
            admit_placement(nodes, sets, c.area_km, rng, c.link_distance, c.feasibility_margin,
                            c.min_distance, c.path_loss_exponent)
        return nodes

    def _make_controller(self, node, rng) -> _Controller:
        c = self.config
        if c.controller == "baseline":
            return BaselineController(node.id, node.role, c.targets, c.p_max)
        if c.controller == "oracle":
            return OracleController(node.id, node.role, c.targets, c.p_max, c.Q, c.s, c.P_N)
        return FHController(node.id, node.role, c.targets, c.p_max, c.Q, c.s, c.P_N,
                            alpha=c.alpha_w, basis=c.basis, window=c.window or None,
                            ridge=c.ridge, exploration=c.exploration, rng=rng)

    def _silenced(self, node, case) -> bool:
        return (self.config.deny_su_when_pu_active and node.role is Role.SU
                and case is Case.CASE2)

    def run(self):
        """Run the whole horizon; returns the list of ``MetricsRecord``."""
        cfg, net = self.config, self.network
        trace = []
        self.stage_costs, self.terminal_costs = [], []
        held = {}   # powers of silenced SUs, restored when they may transmit again
        total = 0.0
        for k0, k1, case in segments(cfg):
            net.pu_active = case is Case.CASE2
            for ctrl, node in zip(self.controllers, net.nodes):
                ctrl.start_segment(case, k1 - k0)
                if self._silenced(node, case):
                    held.setdefault(node.id, net.powers[node.id])
                    net.set_power(node.id, 0.0)
                elif node.id in held:
                    net.set_power(node.id, held.pop(node.id))
            active = [i for i, (ctrl, node) in enumerate(zip(self.controllers, net.nodes))
                      if ctrl.active and not self._silenced(node, case)]
            for k in range(k0, k1):
                rec, cost = self._step(k, k - k0, case, active)
                total += cost
                if k == k1 - 1:
                    tc = self._terminal_cost(active)
                    self.terminal_costs.append(tc)
                    total += tc
                rec.cumulative_cost = total
                trace.append(rec)
        return trace

    def _terminal_cost(self, active) -> float:
        sir = self.network.sir()
        cost = 0.0
        for i in active:
            E = make_augmented_error(sir[i], self.controllers[i].target)
            cost += float(E @ self.P_N @ E)
        return cost

    def _step(self, k: int, k_local: int, case: Case, active):
        cfg, net = self.config, self.network
        if k > 0:
            net.evolve(self.channel_rng)
        sir = net.sir()
        interf = net.interference()
        if not active:
            scheduled = []
        elif cfg.update_mode == "synchronous":
            scheduled = active
        else:
            scheduled = [active[k_local % len(active)]]

        bellman, terminal, saturations = [], [], 0
        for i in scheduled:
            m = Measurement(float(sir[i]), float(interf[i]), float(net.powers[i]), k_local)
            p, diag = self.controllers[i].step(m)
            net.set_power(i, p)
            if not math.isnan(diag.bellman_error):
                bellman.append(abs(diag.bellman_error))
            if not math.isnan(diag.terminal_error):
                terminal.append(diag.terminal_error)
            saturations += bool(diag.saturated)

        # stage cost of this step: pre-update error, action held for the next interval
        cost = 0.0
        for i in active:
            E = make_augmented_error(sir[i], self.controllers[i].target)
            cost += stage_cost(E, net.powers[i] / interf[i], self.Q, self.S)
        self.stage_costs.append(cost)

        post = net.sir()
        pu = [i for i in active if net.is_pu[i]]
        su = [i for i in active if not net.is_pu[i]]
        rec = MetricsRecord(
            step=k,
            time=k * cfg.sample_time,
            case=int(case),
            sir_pu_db=mean_sir_db(post[pu]),
            sir_su_db=mean_sir_db(post[su]),
            power_pu=_mean(net.powers[pu]),
            power_su=_mean(net.powers[su]),
            bellman_error=_mean(bellman),
            terminal_error=_mean(terminal),
            spectrum_efficiency=spectrum_efficiency(post[active], cfg.bandwidth_hz) if active else 0.0,
            cumulative_cost=float("nan"),
            saturations=saturations,
        )
        return rec, cost


def run_scenario(config: ScenarioConfig, **kwargs):
    return Simulator(config, **kwargs).run()


# persistence

def write_metrics(trace, fh, fmt: str = "csv"):
    """Write a trace to an open text stream; see ``emit_metrics``."""
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unknown format {fmt!r}")
    if fmt == "csv":
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELD_NAMES)
        for rec in trace:
            w.writerow([repr(getattr(rec, name)) for name in FIELD_NAMES])
    else:
        for rec in trace:
            fh.write(json.dumps(asdict(rec)) + "\n")


def emit_metrics(trace, path, fmt: str = "csv"):
    """Write a trace as CSV (floats in shortest round-trip form) or JSONL."""
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unknown format {fmt!r}")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            write_metrics(trace, fh, fmt)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write metrics to {path}: {exc.strerror}") from exc


def read_metrics(path, fmt: str = "csv"):
    with open(path, encoding="utf-8") as fh:
        if fmt == "jsonl":
            return [MetricsRecord(**json.loads(line)) for line in fh if line.strip()]
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != FIELD_NAMES:
        raise ValueError(f"{path}: unexpected header")
    return [MetricsRecord(**{name: _FIELD_TYPES.get(name, float)(val)
                             for name, val in zip(FIELD_NAMES, row)})
            for row in rows[1:]]
