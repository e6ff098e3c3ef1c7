"""Wireless channel generation for the relay network.

Small-scale Rayleigh fading with optional first-order Gauss-Markov time
correlation, deterministic distance path loss applied on top of the fading
matrices, and additive Gaussian channel-estimation error for imperfect CSI.

Array layout conventions (used throughout the package):
    uplink   [K, N, 2*U*Ms, 2*Ms]   cluster k -> relay n, U stacked square blocks
    downlink [N, 2, K, Ms, V*Ms]    relay n -> source side (0 or 1) of cluster k,
                                    V square blocks side by side
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Topology:
    """Node counts and antenna factors of the relay network.

    K clusters (source pairs), N relays, Ms antennas per source.  Each relay
    receives on 2*U*Ms antennas and transmits on Ms antennas chosen out of
    V*Ms, so V*Ms <= 2*U*Ms must hold.
    """

    K: int
    N: int
    Ms: int
    U: int
    V: int

    def __post_init__(self):
        for name in ("K", "N", "Ms", "U", "V"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.V * self.Ms > 2 * self.U * self.Ms:
            raise ValueError("V*Ms must not exceed the 2*U*Ms receive antennas")

    @property
    def uplink_shape(self) -> tuple:
        return (self.K, self.N, 2 * self.U * self.Ms, 2 * self.Ms)

    @property
    def downlink_shape(self) -> tuple:
        return (self.N, 2, self.K, self.Ms, self.V * self.Ms)


@dataclass(frozen=True)
class ChannelParams:
    """Large-scale and temporal parameters of every link.

    gamma and xi set the deterministic path loss sqrt(gamma)*d**(-xi) applied
    to each fading entry; rho is the slot-to-slot Gauss-Markov correlation;
    sigma2 the per-entry small-scale variance.  Distances may be scalars
    (homogeneous network) or arrays matching the uplink/downlink link grids.
    """

    gamma: float = 1.0
    xi: float = 1.0
    rho: float = 0.0
    sigma2: float = 1.0
    uplink_distance: object = 1.0   # scalar or (K, N) array
    downlink_distance: object = 1.0  # scalar or (N, 2, K) array

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be > 0")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        for d in (self.uplink_distance, self.downlink_distance):
            if np.any(np.asarray(d, dtype=float) <= 0):
                raise ValueError("all link distances must be > 0")


@dataclass(frozen=True)
class CsiErrorParams:
    """Gaussian channel-estimation error model.

    The estimate seen by the selection and detection stages is H + He with
    He ~ CN(0, beta * E**(-alpha)) per entry, where E is the energy of the
    phase being estimated (source energy on the uplink, half of it on the
    downlink).  beta = 0 or enabled = False gives perfect CSI.
    """

    beta: float = 0.0
    alpha: float = 0.0
    enabled: bool = False

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    def error_variance(self, energy: float) -> float:
        if not self.enabled or self.beta == 0.0:
            return 0.0
        return self.beta * energy ** (-self.alpha)


@dataclass
class ChannelSet:
    """All link matrices of one time slot (quasi-static within the slot).

    `uplink` / `downlink` carry the path-loss-scaled matrices used on the
    air; `uplink_fading` / `downlink_fading` keep the unscaled small-scale
    processes so the Gauss-Markov recursion stays stationary regardless of
    the path-loss geometry.
    """

    uplink: np.ndarray
    downlink: np.ndarray
    uplink_fading: np.ndarray = field(repr=False, default=None)
    downlink_fading: np.ndarray = field(repr=False, default=None)
    slot_index: int = 0


def draw_iid(shape, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Draw i.i.d. circularly-symmetric complex Gaussian entries.

    Per-entry variance sigma2 (sigma2/2 on each of the real and imaginary
    parts).
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be > 0")
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    if any(s <= 0 for s in shape):
        raise ValueError(f"invalid matrix shape {shape}")
    scale = np.sqrt(sigma2 / 2.0)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return scale * (re + 1j * im)


def evolve(prev: np.ndarray, rho: float, rng: np.random.Generator,
           sigma2: float = 1.0) -> np.ndarray:
    """One Gauss-Markov step: rho * prev + sqrt(1 - rho^2) * fresh draw.

    The innovation has the stationary per-entry variance sigma2, so the
    marginal distribution is preserved when prev is stationary.
    """
    if not -1.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [-1, 1]")
    if not np.all(np.isfinite(prev)):
        raise ValueError("previous channel matrix must be finite")
    if rho == 1.0:
        return prev.copy()
    innovation = draw_iid(prev.shape, sigma2, rng)
    return rho * prev + np.sqrt(1.0 - rho * rho) * innovation


def apply_path_loss(m: np.ndarray, gamma: float, xi: float, d) -> np.ndarray:
    """Scale fading entries by sqrt(gamma) * d**(-xi).

    The squared Frobenius norm then satisfies
    ||H||^2 = gamma * d**(-2*xi) * ||G||^2 exactly.  `d` may be an array
    broadcastable against the leading (link) axes of `m`.
    """
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be > 0")
    scale = np.sqrt(gamma) * d ** (-xi)
    if scale.ndim:
        scale = scale.reshape(scale.shape + (1,) * (m.ndim - scale.ndim))
    return m * scale


def corrupt_csi(m: np.ndarray, err: CsiErrorParams, energy: float,
                rng: np.random.Generator) -> np.ndarray:
    """Return the estimated view of `m`: the matrix plus i.i.d. CN noise
    of per-entry variance beta * energy**(-alpha).  Identity when the error
    model is disabled or beta = 0."""
    if energy <= 0:
        raise ValueError("energy must be > 0")
    var = err.error_variance(energy)
    if var == 0.0:
        return m
    return m + draw_iid(m.shape, var, rng)


def slot_channels(prev: ChannelSet | None, params: ChannelParams,
                  topo: Topology, rng_uplink: np.random.Generator,
                  rng_downlink: np.random.Generator) -> ChannelSet:
    """Produce the channel set of the next time slot.

    The first slot draws every link independently; later slots evolve the
    small-scale matrices with the Gauss-Markov recursion.  Path loss is
    reapplied to the evolved fading so the norm identity holds every slot.
    Uplink and downlink are non-reciprocal (independent draws).
    """
    if prev is None:
        up = draw_iid(topo.uplink_shape, params.sigma2, rng_uplink)
        dn = draw_iid(topo.downlink_shape, params.sigma2, rng_downlink)
        slot = 0
    else:
        if prev.uplink_fading.shape != topo.uplink_shape:
            raise ValueError("previous channel set does not match the topology")
        up = evolve(prev.uplink_fading, params.rho, rng_uplink, params.sigma2)
        dn = evolve(prev.downlink_fading, params.rho, rng_downlink, params.sigma2)
        slot = prev.slot_index + 1
    return ChannelSet(
        uplink=apply_path_loss(up, params.gamma, params.xi, params.uplink_distance),
        downlink=apply_path_loss(dn, params.gamma, params.xi, params.downlink_distance),
        uplink_fading=up,
        downlink_fading=dn,
        slot_index=slot,
    )
