"""
Online estimation of a time-varying quadratic action-value function.

The value of ``z = [E0, E1, v]`` at step ``k`` of an ``N``-step horizon is

    V_k(z) = sigma(tau_k) @ W @ zbar(z),      tau_k = (N - k) / N

where ``zbar`` holds the six quadratic monomials of ``z`` and ``sigma`` is a
time basis with ``sigma(0) = [1, 0, ..., 0]``, so the first row of ``W`` is
the estimate of the terminal kernel. ``W`` is refit at every step by a
windowed least-squares problem whose solution drives every Bellman residual
in the window, and the terminal residual, to ``alpha`` times their previous
values.

The window stores raw transitions. Until it is full the successor action of
each transition is the one the admissible reference policy took; after
that every transition is relabelled with the greedy action of the current
estimate before each refit (fitted policy iteration). Refits that would
invalidate a valid kernel are rejected, see ``update``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

N_FEATURES = 6
# upper-triangle index pairs in zbar order
_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


class SingularUpdateError(np.linalg.LinAlgError):
    pass


def kron_basis(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return np.array([z[a] * z[b] for a, b in _PAIRS])


def theta_from_matrix(Theta) -> np.ndarray:
    """Vectorize a symmetric 3x3 kernel so that ``theta @ zbar == z @ Theta @ z``."""
    Theta = np.asarray(Theta, dtype=float)
    return np.array([Theta[a, b] * (1.0 if a == b else 2.0) for a, b in _PAIRS])


def matrix_from_theta(theta) -> np.ndarray:
    Theta = np.empty((3, 3))
    for t, (a, b) in zip(theta, _PAIRS):
        if a == b:
            Theta[a, a] = t
        else:
            Theta[a, b] = Theta[b, a] = 0.5 * t
    return Theta


def terminal_theta(P_N) -> np.ndarray:
    Theta = np.zeros((3, 3))
    Theta[:2, :2] = P_N
    return theta_from_matrix(Theta)


def utility(E, v: float, Q, S: float) -> float:
    E = np.asarray(E, dtype=float)
    return float(E @ np.asarray(Q) @ E + S * v * v)


def check_weights(Q, S: float):
    """Reject a non positive-definite state weight or non-positive input weight."""
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (2, 2) or not np.allclose(Q, Q.T):
        raise ValueError("Q must be a symmetric 2x2 matrix")
    if np.linalg.eigvalsh(Q).min() <= 0:
        raise ValueError("Q must be positive definite")
    if not S > 0:
        raise ValueError("S must be > 0")


def admissible_kernels(theta, Q, S: float, rtol: float = 1e-3) -> np.ndarray:
    """Which vectorized kernels could be a true action-value kernel.

    Any finite-horizon LQ kernel has ``Theta_vv >= S`` and a cost-to-go
    ``G = Theta_EE - Theta_Ev Theta_vv^-1 Theta_vE`` with ``G - Q`` positive
    semidefinite, whatever the plant. ``theta`` may be ``(6,)`` or ``(n, 6)``;
    the checks allow a relative slack of ``rtol``.
    """
    t = np.atleast_2d(np.asarray(theta, dtype=float))
    Q = np.asarray(Q, dtype=float)
    vv = t[:, 5]
    ok = vv >= S * (1.0 - rtol)
    vv = np.where(ok, vv, 1.0)
    ev0, ev1 = 0.5 * t[:, 2], 0.5 * t[:, 4]
    d00 = t[:, 0] - ev0 * ev0 / vv - Q[0, 0]
    d01 = 0.5 * t[:, 1] - ev0 * ev1 / vv - Q[0, 1]
    d11 = t[:, 3] - ev1 * ev1 / vv - Q[1, 1]
    # smallest eigenvalue of the symmetric 2x2 block G - Q
    lam = 0.5 * (d00 + d11 - np.hypot(d00 - d11, 2.0 * d01))
    ok &= lam >= -rtol * np.max(np.abs(t[:, [0, 1, 3]]), axis=1)
    return ok if np.ndim(theta) > 1 else bool(ok[0])


@dataclass(frozen=True)
class TimeBasis:
    """Time regression ``sigma(tau)`` of length ``L``.

    ``polynomial``: ``[1, tau, ..., tau**(L-1)]``.
    ``terminal-step``: ``[1, 1{tau > 0}, tau, ..., tau**(L-2)]``. The step
    feature lets the kernel jump between the last decision step and the
    terminal kernel, which carries no input block.
    """

    length: int = 3
    kind: str = "terminal-step"

    def __post_init__(self):
        if self.kind not in ("polynomial", "terminal-step"):
            raise ValueError(f"unknown time basis {self.kind!r}")
        if self.length < (2 if self.kind == "terminal-step" else 1):
            raise ValueError("time basis too short")

    def __call__(self, tau: float) -> np.ndarray:
        if self.kind == "polynomial":
            return tau ** np.arange(self.length, dtype=float)
        out = np.empty(self.length)
        out[0] = 1.0
        out[1] = 1.0 if tau > 0 else 0.0
        out[2:] = tau ** np.arange(1, self.length - 1, dtype=float)
        return out


@dataclass(frozen=True)
class Transition:
    E_prev: np.ndarray
    v_prev: float
    k_prev: int
    E: np.ndarray
    k: int
    v_ref: float    # reference-policy action at the successor


@dataclass(frozen=True)
class Sample:
    utility: float
    regressor: np.ndarray   # (L, 6)
    step: int


def bellman_residual(W, sample: Sample) -> float:
    return float(sample.utility + np.sum(W * sample.regressor))


def terminal_residual(W, theta_N, sigma0) -> np.ndarray:
    return np.asarray(theta_N, dtype=float) - np.asarray(W).T @ sigma0


def update_w(W, samples, theta_N, sigma0, alpha: float, ridge: float = 1e-8) -> np.ndarray:
    """One least-squares step of the estimator.

    Minimizes over ``W``::

        sum_j (r_j + <W, dPhi_j> - alpha * e_j)^2
          + |theta_N - W' sigma0 - alpha * e_fc|^2
          + ridge * |D (W - W_k)|^2

    where ``e_j`` and ``e_fc`` are the residuals under the current ``W_k``
    and ``D`` scales each unknown by its regressor column norm. With
    ``ridge == 0`` and a consistent system every residual contracts by
    exactly ``alpha``.
    """
    W = np.asarray(W, dtype=float)
    regs = np.array([s.regressor.ravel() for s in samples]).reshape(len(samples), W.size)
    utils = np.array([s.utility for s in samples], dtype=float)
    return solve_update(W, regs, utils, theta_N, sigma0, alpha, ridge)


def solve_update(W, regressors, utilities, theta_N, sigma0, alpha: float,
                 ridge: float = 1e-8) -> np.ndarray:
    """``update_w`` on stacked arrays: ``regressors`` is ``(n, L*6)``."""
    W = np.asarray(W, dtype=float)
    L = W.shape[0]
    n = L * N_FEATURES
    w = W.ravel()
    e = utilities + regressors @ w
    # terminal rows: W' sigma0 picks out theta_N one feature at a time
    T = np.kron(sigma0, np.eye(N_FEATURES))
    e_fc = terminal_residual(W, theta_N, sigma0)
    M = np.vstack([regressors, T])
    target = np.concatenate([alpha * e - utilities, np.asarray(theta_N) - alpha * e_fc])
    b = target - M @ w

    if ridge == 0:
        if np.linalg.matrix_rank(M) < n:
            raise SingularUpdateError(
                "normal equations are rank deficient; use a positive ridge")
        delta = np.linalg.lstsq(M, b, rcond=None)[0]
    else:
        scale = np.linalg.norm(M, axis=0)
        scale[scale == 0] = 1.0
        Ms = np.vstack([M / scale, np.sqrt(ridge) * np.eye(n)])
        bs = np.concatenate([b, np.zeros(n)])
        delta = np.linalg.lstsq(Ms, bs, rcond=None)[0] / scale
    return W + delta.reshape(L, N_FEATURES)


def default_window(basis_length: int) -> int:
    return max(24, 6 * basis_length + 6)


class ValueEstimator:
    """Per-user estimator of the action-value kernel over one finite horizon."""

    def __init__(self, horizon: int, Q, S: float, P_N, alpha: float = 1e-4,
                 basis: TimeBasis = None, window: int = None, ridge: float = 1e-8):
        if horizon <= 0:
            raise ValueError("horizon must be > 0")
        if not 0 <= alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        check_weights(Q, S)
        self.horizon = horizon
        self.Q = np.asarray(Q, dtype=float)
        self.S = float(S)
        self.theta_N = terminal_theta(P_N)
        self.alpha = alpha
        self.basis = basis or TimeBasis()
        self.ridge = ridge
        self.window = deque(maxlen=window or default_window(self.basis.length))
        self.W = self.prior_weights(P_N)
        self.sigma0 = self.basis(0.0)
        self.updates = 0
        self.rejected = 0

    def prior_weights(self, P_N) -> np.ndarray:
        """Prior: the terminal kernel everywhere, plus ``S`` on the input block at ``tau = 1``."""
        W = np.zeros((self.basis.length, N_FEATURES))
        W[0] = self.theta_N
        tail = np.zeros(N_FEATURES)
        tail[-1] = self.S
        W[1] = tail
        return W

    def sigma(self, k: int) -> np.ndarray:
        return self.basis((self.horizon - k) / self.horizon)

    def theta(self, k: int) -> np.ndarray:
        return self.W.T @ self.sigma(k)

    def kernel(self, k: int) -> np.ndarray:
        return matrix_from_theta(self.theta(k))

    def value(self, z, k: int) -> float:
        return float(self.theta(k) @ kron_basis(z))

    def make_sample(self, E_prev, v_prev, k_prev: int, E, v, k: int) -> Sample:
        """Transition from ``(E_prev, v_prev)`` at ``k_prev`` to ``E`` at ``k``.

        ``v`` is the action the evaluated policy takes at ``k``; it enters
        only the value of the successor.
        """
        z_prev = np.array([E_prev[0], E_prev[1], v_prev])
        z = np.array([E[0], E[1], v])
        reg = (np.outer(self.sigma(k), kron_basis(z))
               - np.outer(self.sigma(k_prev), kron_basis(z_prev)))
        return Sample(utility(E_prev, v_prev, self.Q, self.S), reg, k)

    @property
    def ready(self) -> bool:
        """Window full: enough data to evaluate the greedy policy."""
        return len(self.window) == self.window.maxlen

    def push(self, t: Transition):
        z_prev = np.array([t.E_prev[0], t.E_prev[1], t.v_prev])
        self.window.append((t, utility(t.E_prev, t.v_prev, self.Q, self.S),
                            np.outer(self.sigma(t.k_prev), kron_basis(z_prev)).ravel(),
                            self.sigma(t.k)))

    @property
    def transitions(self) -> list:
        return [entry[0] for entry in self.window]

    def admissible(self, k: int, W=None) -> bool:
        W = self.W if W is None else W
        return admissible_kernels(W.T @ self.sigma(k), self.Q, self.S)

    def greedy_action(self, E, k: int, W=None):
        """``-Theta_vv^-1 Theta_vE E`` at step ``k``; ``None`` for an inadmissible kernel."""
        W = self.W if W is None else W
        if not self.admissible(k, W):
            return None
        Theta = matrix_from_theta(W.T @ self.sigma(k))
        return float(-(Theta[2, :2] @ np.asarray(E)) / Theta[2, 2])

    def design(self, W=None, greedy=None):
        """Stacked ``(regressors (n, L*6), utilities (n,))`` for the window, labelled under ``W``."""
        W = self.W if W is None else W
        greedy = self.ready if greedy is None else greedy
        n = len(self.window)
        if n == 0:
            return np.empty((0, W.size)), np.empty(0)
        E = np.array([entry[0].E for entry in self.window])
        v = np.array([entry[0].v_ref for entry in self.window])
        sig = np.array([entry[3] for entry in self.window])
        if greedy:
            theta = sig @ W                        # (n, 6) kernel at each successor step
            ok = admissible_kernels(theta, self.Q, self.S)
            vv = np.where(ok, theta[:, 5], 1.0)
            # theta stores 2 * Theta_vE off the diagonal
            vg = -(0.5 * theta[:, 2] * E[:, 0] + 0.5 * theta[:, 4] * E[:, 1]) / vv
            v = np.where(ok, vg, v)
        z = np.column_stack([E, v])
        zbar = np.column_stack([z[:, a] * z[:, b] for a, b in _PAIRS])
        regs = (sig[:, :, None] * zbar[:, None, :]).reshape(n, -1)
        regs -= np.array([entry[2] for entry in self.window])
        utils = np.array([entry[1] for entry in self.window])
        return regs, utils

    def samples(self, W=None, greedy=None) -> list:
        """Window transitions as ``Sample`` objects, labelled under ``W``."""
        W = self.W if W is None else W
        regs, utils = self.design(W, greedy)
        return [Sample(u, r.reshape(W.shape), entry[0].k)
                for u, r, entry in zip(utils, regs, self.window)]

    def bellman_residuals(self, W=None) -> np.ndarray:
        W = self.W if W is None else W
        regs, utils = self.design(W)
        return utils + regs @ W.ravel()

    def terminal_residual(self, W=None) -> np.ndarray:
        return terminal_residual(self.W if W is None else W, self.theta_N, self.sigma0)

    def update(self) -> np.ndarray:
        """Refit ``W`` on the window; returns the kept weights.

        Once the greedy phase has started, a refit that turns a valid kernel
        at the latest step into an invalid one is rejected. This happens when
        a near-converged policy stops exciting the system and the fit becomes
        ill-conditioned.
        """
        regs, utils = self.design()
        W = solve_update(self.W, regs, utils, self.theta_N, self.sigma0,
                         self.alpha, self.ridge)
        k = self.window[-1][0].k if self.window else 0
        if self.ready and self.admissible(k) and not self.admissible(k, W):
            self.rejected += 1
            return self.W
        self.W = W
        self.updates += 1
        return self.W
