from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crnsim.controller import OracleController, gain_from_theta
from crnsim.dynamics import error_system, make_augmented_error
from crnsim.estimator import utility
from crnsim.riccati import backward_riccati, optimal_cost, q_kernel

from conftest import record_steps, single_user_nodes, single_user_sim, static_config

A2 = np.array([[0.5, -0.5], [0.0, 1.0]])
B2 = np.array([0.2, 0.0])
Q2 = np.diag([1.0, 0.01])

# frozen from an exact rational hand recursion for (A2, B2, Q2, S=1, P_N=I, N=2)
K1 = [Fraction(5, 52), Fraction(-5, 52)]
K0 = [Fraction(645, 5458), Fraction(-895, 5458)]
G1 = [[Fraction(129, 104), Fraction(-25, 104)], [Fraction(-25, 104), Fraction(3251, 2600)]]


def test_two_step_hand_values():
    sol = backward_riccati(A2, B2, Q2, 1.0, np.eye(2), 2)
    np.testing.assert_allclose(sol.K[1], [float(x) for x in K1], rtol=1e-14)
    np.testing.assert_allclose(sol.K[0], [float(x) for x in K0], rtol=1e-14)
    np.testing.assert_allclose(sol.G[1], [[float(x) for x in r] for r in G1], rtol=1e-14)
    np.testing.assert_array_equal(sol.G[2], np.eye(2))


def test_single_step_closed_form():
    P_N = np.array([[2.0, 0.3], [0.3, 1.0]])
    sol = backward_riccati(A2, B2, Q2, 1.5, P_N, 1)
    K = (B2 @ P_N @ A2) / (1.5 + B2 @ P_N @ B2)
    np.testing.assert_allclose(sol.K[0], K, rtol=1e-15)


def test_zero_input_gives_zero_gain():
    sol = backward_riccati(A2, np.zeros(2), Q2, 1.0, np.eye(2), 10)
    assert np.all(sol.K == 0)


def test_gain_from_theta_consistency():
    A, B = error_system(0.2, 7.0)
    sol = backward_riccati(A, B, Q2, 1.0, np.eye(2), 50)
    for k in range(50):
        np.testing.assert_array_equal(gain_from_theta(sol.Theta[k]), sol.K[k])


def test_cost_to_go_psd_and_symmetric():
    A, B = error_system(-0.3, 5.0)
    sol = backward_riccati(A, B, Q2, 1.0, np.eye(2), 100)
    for G in sol.G:
        np.testing.assert_array_equal(G, G.T)
        assert np.linalg.eigvalsh(G).min() >= -1e-12
    assert np.all(np.isfinite(sol.G))


def test_time_varying_sequence():
    rng = np.random.default_rng(0)
    As = np.array([error_system(p, 1.0)[0] for p in rng.uniform(-0.5, 0.5, 5)])
    Bs = np.array([error_system(0.0, r)[1] for r in rng.uniform(1.0, 10.0, 5)])
    sol = backward_riccati(As, Bs, Q2, 1.0, np.eye(2), 5)
    G = np.eye(2)
    for k in range(4, -1, -1):
        th = q_kernel(As[k], Bs[k], Q2, 1.0, G)
        np.testing.assert_allclose(sol.Theta[k], th, rtol=1e-14)
        G = sol.G[k]
    with pytest.raises(ValueError):
        backward_riccati(As[:3], Bs, Q2, 1.0, np.eye(2), 5)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_bellman_block_identity(seed):
    rng = np.random.default_rng(seed)
    A, B = error_system(rng.uniform(-1, 1), rng.uniform(0.1, 20))
    sol = backward_riccati(A, B, Q2, 1.0, np.eye(2), 5)
    k = int(rng.integers(0, 5))
    E, v = rng.normal(size=2), rng.normal()
    z = np.array([*E, v])
    nxt = A @ E + B * v
    rhs = utility(E, v, Q2, 1.0) + nxt @ sol.G[k + 1] @ nxt
    assert z @ sol.Theta[k] @ z == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def _simulate(A, B, K, E0, P_N):
    E, cost = np.asarray(E0, dtype=float), 0.0
    for Kk in K:
        v = -Kk @ E
        cost += utility(E, v, Q2, 1.0)
        E = A @ E + B * v
    return cost + E @ P_N @ E


def test_optimal_cost_examples():
    A, B = error_system(0.0, 4.0)
    sol = backward_riccati(A, B, Q2, 1.0, np.eye(2), 30)
    assert optimal_cost([0, 0], sol.G[0]) == 0.0
    E0 = np.array([-0.08, 0.1])
    J = optimal_cost(E0, sol.G[0])
    assert optimal_cost(3 * E0, sol.G[0]) == pytest.approx(9 * J, rel=1e-14)
    assert _simulate(A, B, sol.K, E0, np.eye(2)) == pytest.approx(J, rel=1e-8)


def test_perturbing_any_gain_never_helps():
    A, B = error_system(0.0, 4.0)
    N = 20
    sol = backward_riccati(A, B, Q2, 1.0, np.eye(2), N)
    E0 = np.array([-0.08, 0.1])
    best = _simulate(A, B, sol.K, E0, np.eye(2))
    for k in range(N):
        for j in range(2):
            for f in (0.99, 1.01):
                K = sol.K.copy()
                K[k, j] *= f
                assert _simulate(A, B, K, E0, np.eye(2)) >= best - 1e-15 * abs(best)


def test_static_oracle_run_cost():
    # fixed interferers and frozen gains: the own SIR obeys phi = 0 exactly
    cfg = static_config(horizon=150, controller="oracle", seed=1)
    sim = single_user_sim(cfg, single_user_nodes())
    assert isinstance(sim.controllers[0], OracleController)
    log = record_steps(sim.controllers[0])
    sim.run()
    rho = sim.network.gains[0, 0]
    sol = backward_riccati(*error_system(0.0, rho), cfg.Q, cfg.s, cfg.P_N, cfg.horizon)

    gamma = cfg.gamma_su_high
    cost = sum(utility(make_augmented_error(m.sir, gamma), p / m.interference, cfg.Q, cfg.s)
               for m, p, _ in log)
    E_N = make_augmented_error(sim.network.sir(0), gamma)
    cost += E_N @ cfg.P_N @ E_N
    E0 = make_augmented_error(log[0][0].sir, gamma)
    assert len(log) == cfg.horizon
    assert not any(d.saturated for _, _, d in log)
    assert cost == pytest.approx(optimal_cost(E0, sol.G[0]), rel=1e-8)
