import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from crnsim.channel import (ChannelParams, composite_gain, evolve_channel, make_state,
                            path_loss_gain, rayleigh_cdf, rayleigh_pdf, sample_channel,
                            state_from_components)

P = ChannelParams()


def test_path_loss_examples():
    assert path_loss_gain(1.0, P) == 1.0
    assert path_loss_gain(10.0, P) == pytest.approx(1e-4, rel=1e-15)
    with pytest.raises(ValueError):
        path_loss_gain(0.0, P)
    with pytest.raises(ValueError):
        path_loss_gain(np.array([1.0, -2.0]), P)


def test_rayleigh_pdf_examples():
    assert rayleigh_pdf(0.0, 1.0) == 0.0
    assert rayleigh_pdf(-1.0, 1.0) == 0.0
    assert rayleigh_pdf(1.0, 1.0) == pytest.approx(math.exp(-0.5), rel=1e-15)
    with pytest.raises(ValueError):
        rayleigh_pdf(1.0, 0.0)


def test_rayleigh_pdf_integrates_to_cdf():
    x = np.linspace(0.0, 3.0, 30001)
    pdf = rayleigh_pdf(x, 0.7)
    area = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(x))])
    np.testing.assert_allclose(area, rayleigh_cdf(x, 0.7), atol=1e-7)


def test_composite_gain_examples():
    no_shadow = ChannelParams(shadowing_std_db=0.0)
    assert composite_gain(2.0, 0.0, 1.0, no_shadow) == pytest.approx(2.0 ** -4)
    assert composite_gain(1.0, 10.0, 1.0, P) == pytest.approx(10.0, rel=1e-14)


def test_params_validation():
    for bad in (dict(path_loss_exponent=0), dict(reference_gain=-1), dict(shadowing_std_db=-1),
                dict(rayleigh_scale=0), dict(correlation=1.5), dict(correlation=-0.1)):
        with pytest.raises(ValueError):
            ChannelParams(**bad)
    ChannelParams(correlation=1.0)


def test_state_gain_consistency():
    rng = np.random.default_rng(1)
    d = rng.uniform(0.1, 5.0, size=(6, 6))
    s = sample_channel(rng, d, P)
    for _ in range(5):
        recomputed = composite_gain(s.distance, s.shadowing_db, s.fading_amplitude, P)
        np.testing.assert_allclose(s.gain, recomputed, rtol=1e-14)
        s = evolve_channel(s, P, rng)


def test_state_from_components_roundtrip():
    s = state_from_components(np.array([1.0, 2.0]), 3.0, np.array([0.5, 1.5]), P)
    np.testing.assert_allclose(s.fading_amplitude, [0.5, 1.5], rtol=1e-15)
    with pytest.raises(ValueError):
        state_from_components(1.0, 0.0, -1.0, P)
    with pytest.raises(ValueError):
        make_state(np.ones(3), np.zeros(3), np.zeros((2, 2)), P)


def test_fading_second_moment():
    rng = np.random.default_rng(2)
    s = sample_channel(rng, np.ones(100_000), P)
    assert np.mean(s.fading_amplitude ** 2) == pytest.approx(2 * P.rayleigh_scale ** 2, rel=0.02)


def test_frozen_and_independent_evolution():
    rng = np.random.default_rng(3)
    d = np.ones(5000)
    frozen = ChannelParams(correlation=1.0)
    s = sample_channel(rng, d, frozen)
    s2 = evolve_channel(s, frozen, rng)
    np.testing.assert_array_equal(s.gain, s2.gain)

    white = ChannelParams(correlation=0.0)
    s = sample_channel(rng, d, white)
    s2 = evolve_channel(s, white, rng)
    assert abs(np.corrcoef(s.shadowing_db, s2.shadowing_db)[0, 1]) < 0.05


def test_evolution_keeps_marginals():
    rng = np.random.default_rng(4)
    params = ChannelParams(correlation=0.9)
    s = sample_channel(rng, np.ones(20_000), params)
    for _ in range(50):
        s = evolve_channel(s, params, rng)
    assert np.std(s.shadowing_db) == pytest.approx(params.shadowing_std_db, rel=0.03)
    ks = stats.kstest(s.fading_amplitude, lambda x: rayleigh_cdf(x, params.rayleigh_scale))
    assert ks.pvalue > 0.01


def test_determinism():
    a = sample_channel(np.random.default_rng(9), np.ones(10), P)
    b = sample_channel(np.random.default_rng(9), np.ones(10), P)
    np.testing.assert_array_equal(a.gain, b.gain)


@settings(max_examples=50, deadline=None)
@given(d=st.floats(0.01, 50.0), zeta=st.floats(-20.0, 20.0), x=st.floats(0.0, 5.0),
       n=st.floats(2.0, 6.0))
def test_composite_gain_factorizes(d, zeta, x, n):
    params = ChannelParams(path_loss_exponent=n)
    h = composite_gain(d, zeta, x, params)
    expected = d ** -n * 10 ** (zeta / 10) * x * x
    assert h == pytest.approx(expected, rel=1e-12, abs=1e-300)
    assert h >= 0
