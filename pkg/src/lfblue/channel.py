"""Random network instances and fading draws.

Defaults reproduce the heterogeneous simulation setup: ``h ~ N(1, 0.09)``,
observation noise variances uniform on (0.05, 0.15), channel noise -90 dBm,
distances uniform on [50, 150] m, -30 dB nominal path gain at 1 m, path-loss
exponent 2 and Rayleigh small-scale fading with unit mean power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import flatfile
from .model import ChannelRealization, NetworkParams, db_to_linear, dbm_to_watts

__all__ = [
    "FadingModel",
    "NetworkModel",
    "path_gain",
    "sample_distances",
    "sample_fading",
    "sample_network",
    "save_network",
    "load_network",
]

RAYLEIGH_CONVENTIONS = ("unit_power", "unit_variance")


@dataclass(frozen=True)
class FadingModel:
    """Large-scale path loss times Rayleigh small-scale fading.

    ``rayleigh`` picks what "unit" means for the Rayleigh variable:
    ``"unit_power"`` (E[f^2] = 1) or ``"unit_variance"`` (Var[f] = 1).
    """

    nominal_gain: float = db_to_linear(-30.0)
    ref_distance: float = 1.0
    path_loss_exp: float = 2.0
    d_min: float = 50.0
    d_max: float = 150.0
    rayleigh: str = "unit_power"

    def __post_init__(self):
        if not self.nominal_gain > 0:
            raise ValueError("nominal_gain must be positive")
        if not self.ref_distance > 0:
            raise ValueError("ref_distance must be positive")
        if not self.path_loss_exp >= 0:
            raise ValueError("path_loss_exp must be nonnegative")
        if not 0 < self.d_min <= self.d_max:
            raise ValueError(f"need 0 < d_min <= d_max, got [{self.d_min}, {self.d_max}]")
        if self.rayleigh not in RAYLEIGH_CONVENTIONS:
            raise ValueError(f"rayleigh must be one of {RAYLEIGH_CONVENTIONS}")

    @property
    def rayleigh_scale(self) -> float:
        if self.rayleigh == "unit_power":
            return math.sqrt(0.5)
        return math.sqrt(2.0 / (4.0 - math.pi))


@dataclass(frozen=True)
class NetworkModel:
    """Distribution of per-sensor network parameters.

    ``h_power_target``, when set, rescales the drawn observation gains so
    that their mean square equals it.
    """

    obs_gain_mean: float = 1.0
    obs_gain_var: float = 0.09
    obs_noise_var_range: tuple[float, float] = (0.05, 0.15)
    chan_noise_var: float = dbm_to_watts(-90.0)
    prior_variance: float = 1.0
    h_power_target: float | None = None

    def __post_init__(self):
        lo, hi = self.obs_noise_var_range
        if not 0 < lo <= hi:
            raise ValueError(f"bad obs_noise_var_range {self.obs_noise_var_range}")
        if not self.obs_gain_var >= 0:
            raise ValueError("obs_gain_var must be nonnegative")
        if not self.chan_noise_var > 0 or not self.prior_variance > 0:
            raise ValueError("variances must be positive")
        if self.h_power_target is not None and not self.h_power_target > 0:
            raise ValueError("h_power_target must be positive")
        object.__setattr__(self, "obs_noise_var_range", (float(lo), float(hi)))


def sample_network(model: NetworkModel, k: int, total_power: float, rng: np.random.Generator) -> NetworkParams:
    if k < 1:
        raise ValueError("need at least one sensor")
    h = rng.normal(model.obs_gain_mean, math.sqrt(model.obs_gain_var), size=k)
    so = rng.uniform(*model.obs_noise_var_range, size=k)
    if model.h_power_target is not None:
        h = h * math.sqrt(model.h_power_target / np.mean(h**2))
    return NetworkParams(
        obs_gains=h,
        obs_noise_vars=so,
        chan_noise_vars=np.full(k, model.chan_noise_var),
        total_power=total_power,
        prior_variance=model.prior_variance,
    )


def sample_distances(fading: FadingModel, k: int, rng: np.random.Generator) -> np.ndarray:
    if k < 1:
        raise ValueError("need at least one sensor")
    return rng.uniform(fading.d_min, fading.d_max, size=k)


def path_gain(fading: FadingModel, distances) -> np.ndarray:
    """Large-scale amplitude gain ``eta0 * (d/d0)**(-alpha/2)``."""
    d = np.asarray(distances, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distances must be positive")
    return fading.nominal_gain * (d / fading.ref_distance) ** (-fading.path_loss_exp / 2.0)


def sample_fading(fading: FadingModel, distances, rng: np.random.Generator | None, size: int | None = None, small_scale=None):
    """Fading magnitudes for sensors at ``distances``.

    Returns a :class:`ChannelRealization` when ``size`` is None, otherwise a
    ``(size, K)`` array of independent draws.  ``small_scale`` overrides the
    Rayleigh draw (used to pin ``f`` in tests).
    """
    pg = path_gain(fading, distances)
    if small_scale is None:
        shape = pg.shape if size is None else (size,) + pg.shape
        small_scale = rng.rayleigh(fading.rayleigh_scale, size=shape)
    g = pg * np.asarray(small_scale, dtype=float)
    return ChannelRealization(g) if size is None and g.ndim == 1 else g


NETWORK_KIND = "lfblue-network"


def save_network(path, params: NetworkParams, distances=None) -> None:
    lines = [
        ("K", [params.num_sensors]),
        ("P_total", [params.total_power]),
        ("prior_variance", [params.prior_variance]),
        ("obs_gains", list(params.obs_gains)),
        ("obs_noise_vars", list(params.obs_noise_vars)),
        ("chan_noise_vars", list(params.chan_noise_vars)),
    ]
    if distances is not None:
        lines.append(("distances", list(np.asarray(distances, dtype=float))))
    flatfile.write(path, NETWORK_KIND, lines)


def load_network(path) -> tuple[NetworkParams, np.ndarray | None]:
    e = flatfile.read(path, NETWORK_KIND)
    params = NetworkParams(
        obs_gains=flatfile.floats(e["obs_gains"][0]),
        obs_noise_vars=flatfile.floats(e["obs_noise_vars"][0]),
        chan_noise_vars=flatfile.floats(e["chan_noise_vars"][0]),
        total_power=flatfile.scalar(e, "P_total"),
        prior_variance=flatfile.scalar(e, "prior_variance"),
    )
    if params.num_sensors != flatfile.scalar(e, "K", int):
        raise flatfile.FormatError(f"{path}: array lengths disagree with K")
    distances = np.array(flatfile.floats(e["distances"][0])) if "distances" in e else None
    return params, distances
