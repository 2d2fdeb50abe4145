"""
Discrete-time SIR dynamics and the augmented tracking-error system.

For a user ``i`` the SIR obeys ``R[k+1] = phi[k] * R[k] + rho[k] * nu[k]``
with ``rho = h_ii`` and ``nu = P_i[k+1] / I_i[k]``. Writing the error
against a constant target ``gamma`` as the state ``E = [R - gamma, gamma]``
gives the linear system ``E[k+1] = A E[k] + B nu[k]`` with

    A = [[phi, phi - 1],        B = [rho, 0]
         [0,   1      ]]

All quantities are linear-scale ratios.
"""

import numpy as np


def make_augmented_error(sir: float, target: float) -> np.ndarray:
    if not target > 0:
        raise ValueError("target SIR must be > 0")
    return np.array([sir - target, target], dtype=float)


def error_system(phi: float, rho: float):
    """Return ``(A, B)`` for the given drift and own gain; ``B`` is 1-D."""
    A = np.array([[phi, phi - 1.0], [0.0, 1.0]])
    B = np.array([rho, 0.0])
    return A, B


def exact_phi_rho_nu(i: int, gains_k, gains_next, powers_k, powers_next, interference_k: float):
    """Exact per-step coefficients of the SIR recursion for user ``i``.

    Needs both time slices, so only the simulator (never a controller) can
    call it. The cross term is grouped as
    ``(h[k+1] - h[k]) P[k] + (P[k+1] - P[k]) h[k]``.
    """
    if not interference_k > 0:
        raise ValueError("interference must be > 0")
    gk = np.asarray(gains_k, dtype=float)
    gn = np.asarray(gains_next, dtype=float)
    pk = np.asarray(powers_k, dtype=float)
    pn = np.asarray(powers_next, dtype=float)
    others = np.arange(len(pk)) != i
    cross = (gn[i] - gk[i]) * pk + (pn - pk) * gk[i]
    phi = (gn[i, i] - gk[i, i]) / gk[i, i] - cross[others].sum() / interference_k
    return float(phi), float(gk[i, i]), float(pn[i] / interference_k)


def predict_sir_recursion(sir: float, phi: float, rho: float, nu: float) -> float:
    return phi * sir + rho * nu


def error_step(E, phi: float, rho: float, nu: float) -> np.ndarray:
    A, B = error_system(phi, rho)
    return A @ np.asarray(E, dtype=float) + B * nu
