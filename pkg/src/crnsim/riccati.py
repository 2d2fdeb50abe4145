"""Known-dynamics finite-horizon LQ solution used as ground truth."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OracleSolution:
    G: np.ndarray       # (N+1, 2, 2), G[N] = P_N
    Theta: np.ndarray   # (N, 3, 3) action-value kernels
    K: np.ndarray       # (N, 2), optimal input is v = -K[k] @ E

    @property
    def horizon(self) -> int:
        return len(self.K)


def _as_sequence(M, N, shape):
    M = np.asarray(M, dtype=float)
    if M.shape == shape:
        return np.broadcast_to(M, (N,) + shape)
    if M.shape != (N,) + shape:
        raise ValueError(f"expected shape {shape} or {(N,) + shape}, got {M.shape}")
    return M


def q_kernel(A, B, Q, S: float, G_next) -> np.ndarray:
    """Action-value kernel over ``[E, v]`` given the next cost-to-go ``G_next``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(2)
    GA = G_next @ A
    GB = G_next @ B
    theta = np.empty((3, 3))
    theta[:2, :2] = Q + A.T @ GA
    theta[:2, 2] = A.T @ GB
    theta[2, :2] = B @ GA
    theta[2, 2] = S + B @ GB
    return theta


def backward_riccati(A, B, Q, S: float, P_N, N: int) -> OracleSolution:
    """Backward recursion over ``k = N-1 .. 0``.

    ``A`` and ``B`` may be constant or given per step (leading axis ``N``),
    e.g. a realized time-varying trace.
    """
    if N < 0:
        raise ValueError("horizon must be >= 0")
    Q = np.asarray(Q, dtype=float)
    P_N = np.asarray(P_N, dtype=float)
    As = _as_sequence(A, N, (2, 2))
    B = np.asarray(B, dtype=float)
    if B.shape == (2, 1):
        B = B.reshape(2)
    elif B.ndim == 3:
        B = B.reshape(B.shape[0], 2)
    Bs = _as_sequence(B, N, (2,))
    G = np.empty((N + 1, 2, 2))
    Theta = np.empty((N, 3, 3))
    K = np.empty((N, 2))
    G[N] = P_N
    for k in range(N - 1, -1, -1):
        th = q_kernel(As[k], Bs[k], Q, S, G[k + 1])
        assert th[2, 2] > 0, "S + B'GB must be positive"
        K[k] = th[2, :2] / th[2, 2]
        G[k] = th[:2, :2] - np.outer(th[:2, 2], K[k])
        G[k] = 0.5 * (G[k] + G[k].T)
        Theta[k] = th
    return OracleSolution(G=G, Theta=Theta, K=K)


def optimal_cost(E0, G0) -> float:
    E0 = np.asarray(E0, dtype=float)
    return float(E0 @ np.asarray(G0) @ E0)
