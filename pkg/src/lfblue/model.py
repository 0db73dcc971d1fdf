"""Core network types, unit conversions and per-sensor SNR quantities.

All powers and variances are linear (watts).  Use :func:`dbm_to_watts` and
:func:`db_to_linear` at the boundary when constants are given in dB/dBm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DimensionError",
    "NetworkParams",
    "ChannelRealization",
    "DerivedSnr",
    "db_to_linear",
    "linear_to_db",
    "dbm_to_watts",
    "watts_to_dbm",
    "as_gains",
    "compute_snrs",
    "sensor_power",
    "sensor_powers",
    "total_power",
]


class DimensionError(ValueError):
    """Vectors describing the same network disagree on the number of sensors."""


def _frozen(x, name: str) -> np.ndarray:
    arr = np.array(x, dtype=float, copy=True)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def db_to_linear(x_db):
    """Convert a ratio in dB to linear scale."""
    return _scalar_or_array(10.0 ** (np.asarray(x_db, dtype=float) / 10.0))


def linear_to_db(x):
    return _scalar_or_array(10.0 * np.log10(np.asarray(x, dtype=float)))


def dbm_to_watts(x_dbm):
    """Convert dBm to watts (0 dBm = 1 mW)."""
    return db_to_linear(np.asarray(x_dbm, dtype=float) - 30.0)


def watts_to_dbm(p_watts):
    return _scalar_or_array(linear_to_db(p_watts) + 30.0)


@dataclass(frozen=True, eq=False)
class NetworkParams:
    """Static description of a sensor network.

    Parameters
    ----------
    obs_gains : array_like, shape (K,)
        Observation gains ``h``.  Any real value; only ``h**2`` enters the
        formulas.
    obs_noise_vars : array_like, shape (K,)
        Observation noise variances.
    chan_noise_vars : array_like, shape (K,)
        Additive channel noise variances at the fusion center (watts).
    total_power : float
        Network-wide transmit power budget (watts).
    prior_variance : float
        Variance of the zero-mean parameter being estimated.
    """

    obs_gains: np.ndarray
    obs_noise_vars: np.ndarray
    chan_noise_vars: np.ndarray
    total_power: float
    prior_variance: float = 1.0
    osnr: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = _frozen(self.obs_gains, "obs_gains")
        so = _frozen(self.obs_noise_vars, "obs_noise_vars")
        sc = _frozen(self.chan_noise_vars, "chan_noise_vars")
        if h.size < 1:
            raise ValueError("network needs at least one sensor")
        if not (h.size == so.size == sc.size):
            raise DimensionError(
                f"per-sensor arrays have lengths {h.size}, {so.size}, {sc.size}"
            )
        if np.any(so <= 0) or np.any(sc <= 0):
            raise ValueError("noise variances must be positive")
        if not self.total_power > 0 or not np.isfinite(self.total_power):
            raise ValueError(f"total_power must be positive, got {self.total_power}")
        if not self.prior_variance > 0 or not np.isfinite(self.prior_variance):
            raise ValueError(f"prior_variance must be positive, got {self.prior_variance}")
        beta = h**2 * self.prior_variance / so
        beta.setflags(write=False)
        object.__setattr__(self, "obs_gains", h)
        object.__setattr__(self, "obs_noise_vars", so)
        object.__setattr__(self, "chan_noise_vars", sc)
        object.__setattr__(self, "total_power", float(self.total_power))
        object.__setattr__(self, "prior_variance", float(self.prior_variance))
        object.__setattr__(self, "osnr", beta)

    @property
    def num_sensors(self) -> int:
        return self.obs_gains.size

    def with_power(self, total_power: float) -> NetworkParams:
        """Same network with a different power budget."""
        return NetworkParams(
            self.obs_gains,
            self.obs_noise_vars,
            self.chan_noise_vars,
            total_power,
            self.prior_variance,
        )

    def subset(self, idx) -> NetworkParams:
        idx = np.asarray(idx)
        return NetworkParams(
            self.obs_gains[idx],
            self.obs_noise_vars[idx],
            self.chan_noise_vars[idx],
            self.total_power,
            self.prior_variance,
        )

    def __eq__(self, other):
        if not isinstance(other, NetworkParams):
            return NotImplemented
        return (
            np.array_equal(self.obs_gains, other.obs_gains)
            and np.array_equal(self.obs_noise_vars, other.obs_noise_vars)
            and np.array_equal(self.chan_noise_vars, other.chan_noise_vars)
            and self.total_power == other.total_power
            and self.prior_variance == other.prior_variance
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One draw of the fading magnitudes ``g`` (path loss included)."""

    g: np.ndarray

    def __post_init__(self):
        g = _frozen(self.g, "g")
        if np.any(g < 0):
            raise ValueError("fading magnitudes must be nonnegative")
        object.__setattr__(self, "g", g)

    @property
    def num_sensors(self) -> int:
        return self.g.size

    def __eq__(self, other):
        if not isinstance(other, ChannelRealization):
            return NotImplemented
        return np.array_equal(self.g, other.g)

    __hash__ = None


@dataclass(frozen=True)
class DerivedSnr:
    """Per-sensor observation SNR ``beta``, channel SNR ``gamma`` and ``delta``."""

    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray


def as_gains(chan) -> np.ndarray:
    """Fading magnitudes as an array; accepts a ChannelRealization or an
    array whose last axis runs over sensors."""
    if isinstance(chan, ChannelRealization):
        return chan.g
    return np.asarray(chan, dtype=float)


def _check_k(params: NetworkParams, arr: np.ndarray, what: str):
    if arr.shape[-1:] != (params.num_sensors,):
        raise DimensionError(
            f"{what} has {arr.shape[-1] if arr.ndim else 0} sensors, "
            f"network has {params.num_sensors}"
        )


def compute_snrs(params: NetworkParams, chan) -> DerivedSnr:
    """OSNR, CSNR and the allocation metric ``delta = beta*gamma/(1+beta)``.

    ``chan`` may be batched: ``gamma`` and ``delta`` then carry the same
    leading axes as the fading array.
    """
    g = as_gains(chan)
    _check_k(params, g, "channel")
    beta = params.osnr
    gamma = g**2 / params.chan_noise_vars
    delta = beta * gamma / (1.0 + beta)
    return DerivedSnr(np.broadcast_to(beta, gamma.shape), gamma, delta)


def sensor_powers(params: NetworkParams, a) -> np.ndarray:
    """Transmit power of every sensor, ``a**2 * sigma_o**2 * (1 + beta)``."""
    a = np.asarray(a, dtype=float)
    _check_k(params, a, "gain vector")
    return a**2 * params.obs_noise_vars * (1.0 + params.osnr)


def sensor_power(params: NetworkParams, a, i: int) -> float:
    a = np.asarray(a, dtype=float)
    _check_k(params, a, "gain vector")
    return float(a[i] ** 2 * params.obs_noise_vars[i] * (1.0 + params.osnr[i]))


def total_power(params: NetworkParams, a) -> float | np.ndarray:
    p = sensor_powers(params, a).sum(axis=-1)
    return float(p) if np.ndim(p) == 0 else p
