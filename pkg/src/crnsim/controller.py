"""
Per-user distributed power controllers.

Every controller sees only its own measurements (SIR, interference, own
power) and returns its next transmit power. ``FHController`` learns the
action-value kernel online and acts on the gain extracted from it;
``BaselineController`` is classical SIR balancing; ``OracleController``
knows its own link gain and solves the quasi-static LQ problem exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import error_system, make_augmented_error
from .estimator import SingularUpdateError, TimeBasis, Transition, ValueEstimator
from .network import Case, Role
from .riccati import backward_riccati

GAIN_EPS = 1e-12
RATIO_CAP = 10.0


class GainSingularityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Targets:
    su_high: float = 0.1       # SUs while PUs are silent (-10 dB)
    pu: float = 0.1995         # PUs while active (-7 dB)
    su_low: float = 0.01       # SUs coexisting with active PUs (-20 dB)

    def __post_init__(self):
        for name in ("su_high", "pu", "su_low"):
            if not getattr(self, name) > 0:
                raise ValueError(f"target {name} must be > 0")

    def for_user(self, role: Role, case: Case):
        """Target SIR for ``(role, case)``; ``None`` for a silent PU."""
        if role is Role.PU:
            return None if case is Case.CASE1 else self.pu
        return self.su_high if case is Case.CASE1 else self.su_low


@dataclass(frozen=True)
class Measurement:
    """What a user observes about itself at step ``k`` of the current case segment."""

    sir: float
    interference: float
    power: float
    step: int


@dataclass
class Diagnostics:
    bellman_error: float = float("nan")
    terminal_error: float = float("nan")
    gain: np.ndarray = None
    saturated: bool = False
    fallback: bool = False
    action: float = 0.0


def gain_from_theta(Theta) -> np.ndarray:
    """``K = Theta_vv^-1 Theta_vE`` from a 3x3 kernel over ``[E, v]``."""
    Theta = np.asarray(Theta, dtype=float)
    vv = Theta[2, 2]
    if abs(vv) < GAIN_EPS:
        raise GainSingularityError(f"input block {vv!r} is numerically zero")
    return Theta[2, :2] / vv


def control_input(K, E, dither: float = 0.0) -> float:
    return float(-np.asarray(K) @ np.asarray(E) + dither)


def power_command(v: float, interference: float, p_max: float):
    """``P = v * I`` clamped to ``[0, p_max]``; returns ``(P, saturated)``."""
    p = v * interference
    if p > p_max:
        return p_max, True
    return max(p, 0.0), False


def initial_admissible_policy(sir: float, target: float, power: float, interference: float) -> float:
    """SIR-balancing step in input units; the correction ratio is capped at 10."""
    ratio = target / max(sir, target / RATIO_CAP)
    return ratio * power / interference


def baseline_sir_tracking(sir: float, target: float, power: float, p_max: float) -> float:
    ratio = target / sir if sir > 0 else RATIO_CAP
    return float(np.clip(ratio * power, 0.0, p_max))


class _Controller:
    kind = "base"

    def __init__(self, user_id: int, role: Role, targets: Targets, p_max: float):
        self.user_id = user_id
        self.role = role
        self.targets = targets
        self.p_max = p_max
        self.target = None
        self.horizon = 0

    def start_segment(self, case: Case, horizon: int):
        self.case = case
        self.target = self.targets.for_user(self.role, case)
        self.horizon = horizon

    @property
    def active(self) -> bool:
        return self.target is not None

    def step(self, m: Measurement):
        raise NotImplementedError


class FixedController(_Controller):
    """Holds its power; used for interferers in controlled experiments."""

    kind = "fixed"

    def step(self, m: Measurement):
        return m.power, Diagnostics(action=m.power / m.interference)


class BaselineController(_Controller):
    kind = "baseline"

    def step(self, m: Measurement):
        if not self.active:
            return 0.0, Diagnostics()
        p = baseline_sir_tracking(m.sir, self.target, m.power, self.p_max)
        return p, Diagnostics(action=p / m.interference, saturated=p >= self.p_max)


class OracleController(_Controller):
    """Riccati gains for the quasi-static model (``phi = 0``, ``rho`` = own gain).

    The own gain is read from ``R * I / P``. The recursion is solved over the
    remaining horizon, truncated to ``lookahead`` steps, and re-solved when
    the gain moves or half of a truncated solution has been used.
    """

    kind = "oracle"

    def __init__(self, user_id, role, targets, p_max, Q, S, P_N, lookahead: int = 200):
        super().__init__(user_id, role, targets, p_max)
        self.Q, self.S, self.P_N = np.asarray(Q), float(S), np.asarray(P_N)
        self.lookahead = lookahead
        self._rho = None
        self._sol = None

    def start_segment(self, case, horizon):
        super().start_segment(case, horizon)
        self._rho = None
        self._sol = None

    def _solve(self, rho, k):
        remaining = self.horizon - k
        n = remaining if self.lookahead is None else min(remaining, self.lookahead)
        A, B = error_system(0.0, rho)
        self._sol = backward_riccati(A, B, self.Q, self.S, self.P_N, n)
        self._rho, self._k0, self._truncated = rho, k, n < remaining

    def step(self, m: Measurement):
        if not self.active:
            return 0.0, Diagnostics()
        if m.step >= self.horizon:
            return m.power, Diagnostics()
        if m.power > 0 and m.sir > 0:
            rho = m.sir * m.interference / m.power
            if (self._sol is None or not np.isclose(rho, self._rho, rtol=1e-12, atol=0.0)
                    or (self._truncated and m.step - self._k0 >= len(self._sol.K) // 2)):
                self._solve(rho, m.step)
        if self._sol is None:
            # nothing transmitted yet: no gain estimate, restart from the cap rule
            v = initial_admissible_policy(m.sir, self.target, m.power, m.interference)
            p, sat = power_command(v, m.interference, self.p_max)
            return p, Diagnostics(saturated=sat, action=p / m.interference, fallback=True)
        K = self._sol.K[min(m.step - self._k0, len(self._sol.K) - 1)]
        E = make_augmented_error(m.sir, self.target)
        p, sat = power_command(control_input(K, E), m.interference, self.p_max)
        return p, Diagnostics(gain=K, saturated=sat, action=p / m.interference)


class FHController(_Controller):
    """Finite-horizon adaptive optimal power allocation for one user.

    Each call runs one iteration: form the augmented error, record the
    transition from the previous own update, refit the estimator, then act
    with the greedy gain of the refit kernel plus a decaying exploration
    dither. Until the estimator window is full the user follows the
    admissible SIR-balancing policy, which is also the policy evaluated
    during that phase.
    """

    kind = "fhaodpa"

    def __init__(self, user_id, role, targets, p_max, Q, S, P_N, alpha=1e-4,
                 basis: TimeBasis = None, window: int = None, ridge: float = 1e-8,
                 exploration: float = 0.05, rng: np.random.Generator = None):
        super().__init__(user_id, role, targets, p_max)
        self.Q, self.S, self.P_N = np.asarray(Q, dtype=float), float(S), np.asarray(P_N, dtype=float)
        self.alpha = alpha
        self.basis = basis or TimeBasis()
        self.window = window
        self.ridge = ridge
        self.exploration = exploration
        self.rng = rng if rng is not None else np.random.default_rng()
        self.estimator = None

    def start_segment(self, case, horizon):
        super().start_segment(case, horizon)
        self.estimator = None
        if self.active and horizon > 0:
            self.estimator = ValueEstimator(horizon, self.Q, self.S, self.P_N, self.alpha,
                                            self.basis, self.window, self.ridge)
        self.gain = None
        self._prev = None
        self._rho_hat = None

    def _learned_gain(self, k):
        """Gain of the current kernel at ``k``, or ``None`` if it is unusable."""
        if not self.estimator.admissible(k):
            # no true action-value kernel looks like this one
            return None
        try:
            K = gain_from_theta(self.estimator.kernel(k))
        except GainSingularityError:
            return None
        if self._rho_hat and abs(self._rho_hat * K[0]) >= 1.0:
            # error feedback that would diverge on the measured own-link gain
            return None
        return K

    def _admissible_action(self, m: Measurement) -> float:
        if m.power <= 0 and self._rho_hat:
            # switched off: restart at the level that meets the target on the last known gain
            return self.target / self._rho_hat
        return initial_admissible_policy(m.sir, self.target, m.power, m.interference)

    def step(self, m: Measurement):
        if not self.active:
            return 0.0, Diagnostics()
        k, N = m.step, self.horizon
        if k >= N:
            return m.power, Diagnostics()
        est = self.estimator
        E = make_augmented_error(m.sir, self.target)
        v_adm = self._admissible_action(m)
        if m.power > 0 and m.sir > 0:
            self._rho_hat = m.sir * m.interference / m.power
        diag = Diagnostics()

        if self._prev is not None:
            E_prev, v_prev, k_prev = self._prev
            est.push(Transition(E_prev, v_prev, k_prev, E, k, v_adm))
            diag.bellman_error = float(est.bellman_residuals()[-1])
            diag.terminal_error = float(np.linalg.norm(est.terminal_residual()))
            try:
                est.update()
            except SingularUpdateError:
                diag.fallback = True

        v = v_adm
        if est.ready:
            K = self._learned_gain(k)
            v_learned = control_input(K, E) if K is not None else 0.0
            if v_learned > 0:
                self.gain, v = K, v_learned
            else:
                # unusable kernel, or an action that would switch the link off
                diag.fallback = True
        diag.gain = self.gain

        # clamp first so that a saturated user still explores below the cap
        v_max = self.p_max / m.interference
        diag.saturated = v >= v_max
        v = min(v, v_max)
        # dither sized by the steady-state input gamma / rho, but never larger
        # than the action itself so that it cannot switch the transmitter off
        dither = 0.0
        if self._rho_hat and v > 0:
            scale = self.exploration * min(self.target / self._rho_hat, v) * (1.0 - k / N)
            dither = scale * self.rng.uniform(-1.0, 1.0)

        p, _ = power_command(v + dither, m.interference, self.p_max)
        diag.action = p / m.interference
        self._prev = (E, diag.action, k)
        return p, diag


def step_user(controller: _Controller, measurement: Measurement):
    """Advance one user's controller by one of its own updates."""
    return controller.step(measurement)
