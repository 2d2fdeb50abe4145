"""
Link channel model: path loss, log-normal shadowing and Rayleigh fading.

The composite power gain of a link is

    h = h_ref * d**(-n) * 10**(0.1 * zeta) * X**2

where ``zeta`` is the shadowing in dB and ``X`` the Rayleigh fading
envelope. Both are evolved in time with a first-order Gauss-Markov
process so that their stationary marginals are unchanged.

Every function here works elementwise, so a state may describe one link
(scalars) or a whole gain table (arrays of any shape).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelParams:
    """Parameters shared by all links of a scenario.

    ``correlation`` is the per-step AR(1) coefficient of the shadowing and
    of the Gaussian pair behind the fading envelope. A value of exactly 1
    freezes the channel.
    """

    path_loss_exponent: float = 4.0
    reference_gain: float = 1.0
    shadowing_std_db: float = 4.0
    rayleigh_scale: float = 1.0 / np.sqrt(2.0)
    correlation: float = 0.99

    def __post_init__(self):
        if not self.path_loss_exponent > 0:
            raise ValueError("path_loss_exponent must be > 0")
        if not self.reference_gain > 0:
            raise ValueError("reference_gain must be > 0")
        if not self.shadowing_std_db >= 0:
            raise ValueError("shadowing_std_db must be >= 0")
        if not self.rayleigh_scale > 0:
            raise ValueError("rayleigh_scale must be > 0")
        if not 0.0 <= self.correlation <= 1.0:
            raise ValueError("correlation must lie in [0, 1]")


@dataclass(frozen=True)
class LinkChannelState:
    """Channel components of one or many links.

    ``latent`` holds the two standard-normal components (shape ``(2, ...)``)
    whose modulus, scaled by the Rayleigh scale, is the fading envelope.
    """

    distance: np.ndarray
    shadowing_db: np.ndarray
    latent: np.ndarray
    fading_amplitude: np.ndarray
    gain: np.ndarray


def path_loss_gain(d, params: ChannelParams):
    """Inverse n-th power law ``h_ref / d**n``. Raises for ``d <= 0``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = params.reference_gain / d ** params.path_loss_exponent
    return out if out.ndim else float(out)


def rayleigh_pdf(x, sigma: float):
    """Rayleigh density with scale ``sigma``; zero on the negative axis."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    x = np.asarray(x, dtype=float)
    s2 = sigma * sigma
    out = np.where(x >= 0, x / s2 * np.exp(-x * x / (2.0 * s2)), 0.0)
    return out if out.ndim else float(out)


def rayleigh_cdf(x, sigma: float):
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0, 1.0 - np.exp(-x * x / (2.0 * sigma * sigma)), 0.0)


def composite_gain(d, shadowing_db, fading_amplitude, params: ChannelParams):
    """Gain from its three components (path loss, shadowing, fading)."""
    pl = np.asarray(path_loss_gain(d, params))
    shadowing_db = np.asarray(shadowing_db, dtype=float)
    x = np.asarray(fading_amplitude, dtype=float)
    return pl * 10.0 ** (0.1 * shadowing_db) * x * x


def make_state(d, shadowing_db, latent, params: ChannelParams) -> LinkChannelState:
    d = np.asarray(d, dtype=float)
    shadowing_db = np.asarray(shadowing_db, dtype=float)
    latent = np.asarray(latent, dtype=float)
    if latent.shape != (2,) + d.shape:
        raise ValueError(f"latent must have shape {(2,) + d.shape}, got {latent.shape}")
    x = params.rayleigh_scale * np.hypot(latent[0], latent[1])
    return LinkChannelState(
        distance=d,
        shadowing_db=shadowing_db,
        latent=latent,
        fading_amplitude=x,
        gain=composite_gain(d, shadowing_db, x, params),
    )


def state_from_components(d, shadowing_db, fading_amplitude, params: ChannelParams):
    """Build a state with a prescribed envelope (latent pair aligned on axis 0)."""
    d = np.asarray(d, dtype=float)
    x = np.broadcast_to(np.asarray(fading_amplitude, dtype=float), d.shape)
    if np.any(x < 0):
        raise ValueError("fading amplitude must be >= 0")
    latent = np.stack([x / params.rayleigh_scale, np.zeros_like(x)])
    shadowing_db = np.broadcast_to(np.asarray(shadowing_db, dtype=float), d.shape)
    return make_state(d, shadowing_db, latent, params)


def sample_channel(rng: np.random.Generator, d, params: ChannelParams) -> LinkChannelState:
    """Draw stationary shadowing and fading for links of length ``d``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    draws = rng.standard_normal((3,) + d.shape)
    return make_state(d, params.shadowing_std_db * draws[0], draws[1:], params)


def evolve_channel(state: LinkChannelState, params: ChannelParams,
                   rng: np.random.Generator) -> LinkChannelState:
    """One Gauss-Markov step: ``new = c * old + sqrt(1 - c**2) * innovation``.

    Innovations are always drawn, so streams stay aligned across different
    correlation values.
    """
    c = params.correlation
    k = np.sqrt(max(0.0, 1.0 - c * c))
    draws = rng.standard_normal((3,) + state.distance.shape)
    shadowing = c * state.shadowing_db + k * params.shadowing_std_db * draws[0]
    latent = c * state.latent + k * draws[1:]
    return make_state(state.distance, shadowing, latent, params)
