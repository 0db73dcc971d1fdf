"""BLUE fusion at the fusion center and its conditional variance.

Functions broadcast over leading axes: a gain array of shape ``(..., K)``
and a fading array of shape ``(..., K)`` give results of the broadcast
leading shape.  Scalars come back as Python floats.
"""

from __future__ import annotations

import numpy as np

from .model import NetworkParams, _check_k, as_gains

__all__ = [
    "AllSilentError",
    "blue_estimate",
    "blue_variance",
    "information",
    "simulate_measurement",
]


class AllSilentError(ArithmeticError):
    """No sensor reaches the fusion center, so the BLUE normalizer is zero."""


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def information(params: NetworkParams, a, chan) -> np.ndarray:
    """Normalized information ``sum_i beta_i x_i / (1 + x_i)`` with
    ``x_i = gamma_i a_i^2 sigma_o_i^2``.

    Terms are accumulated sensor by sensor in index order, the same order the
    compiled trainer kernels use, so both paths agree bit for bit.
    """
    a = np.asarray(a, dtype=float)
    g = as_gains(chan)
    _check_k(params, a, "gain vector")
    _check_k(params, g, "channel")
    load = g**2 / params.chan_noise_vars * params.obs_noise_vars
    x = a**2 * load
    terms = params.osnr * x / (1.0 + x)
    info = terms[..., 0]
    for k in range(1, params.num_sensors):
        info = info + terms[..., k]
    return info


def blue_variance(params: NetworkParams, a, chan):
    """Conditional variance of the BLUE estimate given gains and fading.

    Returns ``inf`` where every sensor is silent (zero information) so sweeps
    can record degenerate points instead of failing.
    """
    info = information(params, a, chan)
    with np.errstate(divide="ignore"):
        var = np.where(info > 0, params.prior_variance / np.where(info > 0, info, 1.0), np.inf)
    return _out(var)


def blue_estimate(params: NetworkParams, a, chan, y):
    """Fuse received samples ``y`` into the BLUE estimate of theta.

    Raises
    ------
    AllSilentError
        If every sensor has ``a_i * g_i * h_i == 0``.
    """
    a = np.asarray(a, dtype=float)
    g = as_gains(chan)
    y = np.asarray(y, dtype=float)
    _check_k(params, a, "gain vector")
    _check_k(params, g, "channel")
    _check_k(params, y, "received vector")
    h = params.obs_gains
    eff = a * g * h
    noise = (a * g) ** 2 * params.obs_noise_vars + params.chan_noise_vars
    norm = np.sum(eff**2 / noise, axis=-1)
    if np.any(norm == 0):
        raise AllSilentError("all sensors silent; estimate undefined")
    return _out(np.sum(eff * y / noise, axis=-1) / norm)


def _zero_mean(rng: np.random.Generator, var, size, distribution: str):
    std = np.sqrt(var)
    if distribution == "gaussian":
        return rng.standard_normal(size) * std
    if distribution == "uniform":
        half = np.sqrt(3.0) * std
        return rng.uniform(-1.0, 1.0, size) * half
    raise ValueError(f"unknown distribution {distribution!r}")


def simulate_measurement(
    params: NetworkParams,
    a,
    chan,
    rng: np.random.Generator,
    size: int | None = None,
    distribution: str = "gaussian",
):
    """Draw theta and the received vector ``y_i = g_i a_i (h_i theta + n_i) + w_i``.

    ``distribution`` selects the law of theta and the observation noise
    (``"gaussian"`` or moment-matched ``"uniform"``); channel noise is always
    Gaussian.  With ``size=n`` returns ``theta`` of shape ``(n,)`` and ``y``
    of shape ``(n, K)``.
    """
    a = np.asarray(a, dtype=float)
    g = as_gains(chan)
    _check_k(params, a, "gain vector")
    _check_k(params, g, "channel")
    k = params.num_sensors
    shape = () if size is None else (size,)
    theta = _zero_mean(rng, params.prior_variance, shape, distribution)
    n = _zero_mean(rng, params.obs_noise_vars, shape + (k,), distribution)
    w = rng.standard_normal(shape + (k,)) * np.sqrt(params.chan_noise_vars)
    x = params.obs_gains * np.expand_dims(theta, -1) + n
    y = g * a * x + w
    return _out(theta), y
