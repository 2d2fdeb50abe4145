"""Multi-user CRN state: node geometry, gain table, powers, interference and SIR."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

from .channel import ChannelParams, LinkChannelState, evolve_channel, sample_channel


class Role(str, Enum):
    PU = "PU"
    SU = "SU"


class Case(IntEnum):
    """Network activity case: PUs silent (CASE1) or transmitting (CASE2)."""

    CASE1 = 1
    CASE2 = 2


@dataclass
class Node:
    id: int
    role: Role
    tx_position: np.ndarray
    rx_position: np.ndarray
    power: float = 0.0


@dataclass(frozen=True)
class ActivitySchedule:
    """Contiguous, sorted ``(start, end, case)`` intervals starting at t=0.

    Intervals are half-open ``[start, end)`` except the last one, which also
    contains its end point.
    """

    intervals: tuple

    def __post_init__(self):
        ivs = tuple((float(a), float(b), Case(c)) for a, b, c in self.intervals)
        if not ivs:
            raise ValueError("schedule must contain at least one interval")
        if ivs[0][0] != 0.0:
            raise ValueError("schedule must start at t=0")
        for (a, b, _), nxt in zip(ivs, ivs[1:] + (None,)):
            if not b > a:
                raise ValueError(f"empty or reversed interval [{a}, {b}]")
            if nxt is not None and nxt[0] != b:
                raise ValueError(f"schedule has a gap or overlap at t={b}")
        object.__setattr__(self, "intervals", ivs)

    @property
    def end(self) -> float:
        return self.intervals[-1][1]

    def case_at(self, t: float) -> Case:
        return activity_case(t, self)

    def scaled(self, factor: float) -> "ActivitySchedule":
        return ActivitySchedule(tuple((a * factor, b * factor, c) for a, b, c in self.intervals))


def activity_case(t: float, schedule: ActivitySchedule) -> Case:
    ivs = schedule.intervals
    if t < 0 or t > schedule.end:
        raise ValueError(f"t={t} lies outside the schedule [0, {schedule.end}]")
    for a, b, c in ivs:
        if a <= t < b:
            return c
    return ivs[-1][2]


# PUs silent during [500, 800) and [1200, 1800) seconds, active otherwise.
PAPER_SCHEDULE = ActivitySchedule((
    (0, 500, Case.CASE2),
    (500, 800, Case.CASE1),
    (800, 1200, Case.CASE2),
    (1200, 1800, Case.CASE1),
    (1800, 2000, Case.CASE2),
))


def _draw_links(n: int, area_km: float, rng: np.random.Generator, link_distance: float):
    centre = area_km / 2.0
    tx = np.clip(rng.normal(centre, area_km / 4.0, size=(n, 2)), 0.0, area_km)
    angle = rng.uniform(0.0, 2.0 * np.pi, size=n)
    offset = link_distance * np.column_stack([np.cos(angle), np.sin(angle)])
    rx = np.clip(tx + offset, 0.0, area_km)
    return tx, rx


def place_nodes(count_pu: int, count_su: int, area_km: float, rng: np.random.Generator,
                link_distance: float = 0.5, power_range=(0.01, 0.1)) -> list[Node]:
    """Gaussian placement around the area centre (std = area/4), clipped to the area.

    Each receiver sits ``link_distance`` km from its transmitter in a random
    direction (then clipped). PUs get ids ``0..count_pu-1``, SUs follow.
    """
    if count_pu < 0 or count_su < 0:
        raise ValueError("node counts must be >= 0")
    if not area_km > 0:
        raise ValueError("area must be > 0")
    n = count_pu + count_su
    tx, rx = _draw_links(n, area_km, rng, link_distance)
    powers = rng.uniform(power_range[0], power_range[1], size=n)
    return [
        Node(i, Role.PU if i < count_pu else Role.SU, tx[i], rx[i], float(powers[i]))
        for i in range(n)
    ]


def coupling_matrix(nodes, targets, min_distance: float = 0.01, path_loss_exponent: float = 4.0):
    """``F[i, j] = target_i * g_ij / g_ii`` from path loss alone (zero diagonal).

    ``targets`` gives one target per node; a zero target drops that node.
    """
    rx = np.array([n.rx_position for n in nodes], dtype=float).reshape(-1, 2)
    tx = np.array([n.tx_position for n in nodes], dtype=float).reshape(-1, 2)
    d = np.maximum(np.linalg.norm(rx[:, None, :] - tx[None, :, :], axis=-1), min_distance)
    g = d ** -path_loss_exponent
    t = np.asarray(targets, dtype=float)
    F = t[:, None] * g / np.diag(g)[:, None] * (t > 0)[None, :]
    np.fill_diagonal(F, 0.0)
    return F


def spectral_radius(F) -> float:
    F = np.asarray(F, dtype=float)
    return float(np.max(np.abs(np.linalg.eigvals(F)))) if F.size else 0.0


def admit_placement(nodes, target_sets, area_km: float, rng: np.random.Generator,
                    link_distance: float, margin: float, min_distance: float = 0.01,
                    path_loss_exponent: float = 4.0, max_redraws: int = 10_000):
    """Redraw the most strongly coupled link until every target set is feasible.

    A set of targets is accepted when the spectral radius of its path-loss
    coupling matrix is below ``margin`` (< 1 means the targets admit a
    finite power vector). Nodes are modified in place and returned.
    """
    for _ in range(max_redraws):
        worst, worst_rho = None, -1.0
        for targets in target_sets:
            F = coupling_matrix(nodes, targets, min_distance, path_loss_exponent)
            rho = spectral_radius(F)
            if rho >= margin and rho > worst_rho:
                worst, worst_rho = F, rho
        if worst is None:
            return nodes
        i = int(np.argmax(worst.sum(axis=0) + worst.sum(axis=1)))
        tx, rx = _draw_links(1, area_km, rng, link_distance)
        nodes[i].tx_position, nodes[i].rx_position = tx[0], rx[0]
    raise RuntimeError(f"no admissible placement after {max_redraws} redraws")


def interference(gains: np.ndarray, tx_powers: np.ndarray, noise_floor: float, i=None):
    """``I_i = sum_{j != i} h_ij P_j + noise``; all receivers when ``i`` is None."""
    gains = np.asarray(gains, dtype=float)
    p = np.asarray(tx_powers, dtype=float)
    total = gains @ p - np.diag(gains) * p + noise_floor
    return total if i is None else float(total[i])


def compute_sir(gains: np.ndarray, tx_powers: np.ndarray, noise_floor: float, i=None):
    """``R_i = h_ii P_i / I_i``. Zero interference is an error."""
    interf = np.atleast_1d(interference(gains, tx_powers, noise_floor))
    if np.any(interf <= 0):
        raise ValueError("interference is zero; a positive noise floor is required")
    sir = np.diag(np.asarray(gains, dtype=float)) * np.asarray(tx_powers, dtype=float) / interf
    return sir if i is None else float(sir[i])


@dataclass
class CRNetwork:
    """Network snapshot mutated by the stepping loop.

    ``gains[i, j]`` is the gain from the transmitter of node ``j`` to the
    receiver of node ``i``. Stored PU powers survive deactivation; only the
    transmitted powers are masked while PUs are silent.
    """

    nodes: list
    channel_params: ChannelParams = field(default_factory=ChannelParams)
    noise_floor: float = 1.0
    p_max: float = 2.0
    min_distance: float = 0.01
    pu_active: bool = True
    channel: LinkChannelState = None

    def __post_init__(self):
        self.roles = np.array([n.role for n in self.nodes], dtype=object)
        self.is_pu = np.array([n.role is Role.PU for n in self.nodes], dtype=bool)
        self.powers = np.array([n.power for n in self.nodes], dtype=float)
        rx = np.array([n.rx_position for n in self.nodes], dtype=float).reshape(-1, 2)
        tx = np.array([n.tx_position for n in self.nodes], dtype=float).reshape(-1, 2)
        d = np.linalg.norm(rx[:, None, :] - tx[None, :, :], axis=-1)
        self.distances = np.maximum(d, self.min_distance)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def init_channel(self, rng: np.random.Generator):
        self.channel = sample_channel(rng, self.distances, self.channel_params)

    def evolve(self, rng: np.random.Generator):
        self.channel = evolve_channel(self.channel, self.channel_params, rng)

    @property
    def gains(self) -> np.ndarray:
        return self.channel.gain

    def active_mask(self) -> np.ndarray:
        return ~self.is_pu | self.pu_active

    def tx_powers(self) -> np.ndarray:
        return np.where(self.active_mask(), self.powers, 0.0)

    def interference(self, i=None):
        return interference(self.gains, self.tx_powers(), self.noise_floor, i)

    def sir(self, i=None):
        return compute_sir(self.gains, self.tx_powers(), self.noise_floor, i)

    def set_power(self, i: int, power: float):
        self.powers[i] = float(np.clip(power, 0.0, self.p_max))
