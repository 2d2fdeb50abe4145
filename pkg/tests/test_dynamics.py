import numpy as np
import pytest

from crnsim.dynamics import (error_step, error_system, exact_phi_rho_nu, make_augmented_error,
                             predict_sir_recursion)
from crnsim.network import compute_sir, interference


def test_augmented_error():
    np.testing.assert_array_equal(make_augmented_error(0.1, 0.1), [0.0, 0.1])
    np.testing.assert_allclose(make_augmented_error(0.2, 0.1), [0.1, 0.1], rtol=1e-15)
    np.testing.assert_array_equal(make_augmented_error(0.0, 0.01), [-0.01, 0.01])
    with pytest.raises(ValueError):
        make_augmented_error(0.3, 0.0)


def test_error_system_shape():
    A, B = error_system(0.3, 2.0)
    np.testing.assert_array_equal(A, [[0.3, -0.7], [0.0, 1.0]])
    np.testing.assert_array_equal(B, [2.0, 0.0])


def test_one_interferer_phi():
    # static channel, the interferer steps from 1 W to 2 W
    g = np.array([[1.0, 1e-4], [1e-4, 1.0]])
    phi, rho, nu = exact_phi_rho_nu(0, g, g, [1.0, 1.0], [1.0, 2.0], 1e-3)
    assert phi == pytest.approx(-0.1, rel=1e-12)
    assert rho == 1.0 and nu == pytest.approx(1e3)
    assert exact_phi_rho_nu(0, g, g, [1.0, 1.0], [0.0, 1.0], 1e-3)[2] == 0.0


def test_target_component_is_constant():
    E = error_step([0.4, 0.1], 0.7, 3.0, 0.2)
    assert E[1] == 0.1


def _max_recursion_error(eps, seed, steps=1000, n=4, noise=1e-3):
    """Largest gap between the recursion and the direct SIR over a random walk of size ``eps``."""
    rng = np.random.default_rng(seed)
    g = rng.uniform(1e-2, 1.0, (n, n))
    p = rng.uniform(0.1, 1.0, n)
    worst = 0.0
    for _ in range(steps):
        gn = g * np.exp(eps * rng.standard_normal((n, n)))
        pn = p * np.exp(eps * rng.standard_normal(n))
        Ik = interference(g, p, noise, 0)
        phi, rho, nu = exact_phi_rho_nu(0, g, gn, p, pn, Ik)
        pred = predict_sir_recursion(compute_sir(g, p, noise, 0), phi, rho, nu)
        worst = max(worst, abs(pred - compute_sir(gn, pn, noise, 0)))
        g, p = gn, pn
    return worst


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_recursion_error_is_second_order(seed):
    errs = [_max_recursion_error(eps, seed) for eps in (4e-3, 2e-3, 1e-3)]
    # halving the perturbation must cut the error at least quadratically (up to path noise)
    assert errs[0] / errs[1] > 3.5
    assert errs[1] / errs[2] > 3.5


def test_static_recursion_matches_direct_sir():
    # frozen gains and interferer powers: phi = 0, R[k+1] = h_ii P[k+1] / I
    rng = np.random.default_rng(0)
    g = rng.uniform(1e-3, 1.0, (3, 3))
    p = np.array([0.2, 0.5, 0.7])
    for p0_next in (0.1, 0.4, 1.3):
        pn = p.copy()
        pn[0] = p0_next
        Ik = interference(g, p, 0.0, 0)
        phi, rho, nu = exact_phi_rho_nu(0, g, g, p, pn, Ik)
        assert phi == 0.0
        assert abs(predict_sir_recursion(0.0, phi, rho, nu) - compute_sir(g, pn, 0.0, 0)) < 1e-12


def test_error_step_matches_recursion():
    E = make_augmented_error(0.25, 0.1)
    E_next = error_step(E, 0.3, 2.0, 0.05)
    assert E_next[0] + 0.1 == pytest.approx(predict_sir_recursion(0.25, 0.3, 2.0, 0.05), rel=1e-15)


def test_exact_rejects_zero_interference():
    with pytest.raises(ValueError):
        exact_phi_rho_nu(0, np.eye(2), np.eye(2), [1, 1], [1, 1], 0.0)
