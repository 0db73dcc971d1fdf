"""Closed-form variance-minimizing power allocation under a sum-power budget.

Sensors are ranked by ``delta = beta*gamma/(1+beta)``.  The best ``K1`` of
them transmit, with gains

    a_i^2 = (sqrt(delta_i) * rho(K1) - 1) / (gamma_i * sigma_o_i^2),

where ``rho(n) = (P + sum_{i<=n} beta_i/delta_i) / sum_{i<=n} beta_i/sqrt(delta_i)``
and ``K1`` is the largest ``n`` with ``sqrt(delta_n) * rho(n) > 1``.  The
rest are silent.  The active set always spends the whole budget.

Numerically the gains are not evaluated in that form.  Writing
``s_j = beta_j / sqrt(delta_j)``,

    sqrt(delta_i) * rho - 1 = (sqrt(delta_i) P + sum_j s_j (sqrt(delta_i/delta_j) - 1)) / sum_j s_j,

which has no cancellation when ``sqrt(delta_i) * rho`` is close to 1 (low
power), and the resulting per-sensor powers are then scaled to sum to
exactly ``P``.  A lone active sensor therefore gets
``a^2 = P / (sigma_o^2 (1 + beta))`` bit for bit, whatever its channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import NetworkParams, as_gains, compute_snrs

__all__ = [
    "ZeroDeltaError",
    "AllocationResult",
    "rho",
    "find_k1",
    "sort_by_delta",
    "optimal_gains",
    "optimal_gains_batch",
]


class ZeroDeltaError(ZeroDivisionError):
    """rho(n) was asked to include a sensor with delta == 0."""


@dataclass(frozen=True, eq=False)
class AllocationResult:
    """Optimal gains in original sensor order.

    ``sort_permutation[r]`` is the original index of the sensor with rank
    ``r`` in the delta-descending order.  ``rho_value`` is NaN when no
    sensor is active.
    """

    gains: np.ndarray
    active_count: int
    rho_value: float
    sort_permutation: np.ndarray

    @property
    def active(self) -> np.ndarray:
        """Boolean mask of transmitting sensors (original order)."""
        return self.gains > 0


def rho(n: int, sorted_beta, sorted_delta, total_power: float) -> float:
    """Water-level-like quantity for the ``n`` best sensors (``n`` is a count)."""
    b = np.asarray(sorted_beta, dtype=float)[:n]
    d = np.asarray(sorted_delta, dtype=float)[:n]
    if n < 1 or b.size < n:
        raise ValueError(f"n={n} outside 1..{len(sorted_beta)}")
    if np.any(d <= 0):
        raise ZeroDeltaError(f"delta is zero among the first {n} sensors")
    return float((total_power + np.sum(b / d)) / np.sum(b / np.sqrt(d)))


def find_k1(sorted_beta, sorted_delta, total_power: float) -> int:
    """Number of active sensors.

    Scans ``n`` downward from the count of strictly positive deltas and
    returns the first ``n`` with ``sqrt(delta_n) * rho(n) > 1``.  Returns 0
    only when every delta is zero.
    """
    d = np.asarray(sorted_delta, dtype=float)
    n_pos = int(np.count_nonzero(d > 0))
    for n in range(n_pos, 0, -1):
        if np.sqrt(d[n - 1]) * rho(n, sorted_beta, d, total_power) > 1.0:
            return n
    # n = 1 qualifies analytically whenever delta_1 > 0; only roundoff lands here
    return min(n_pos, 1)


def sort_by_delta(delta) -> np.ndarray:
    """Stable descending order of ``delta`` along the last axis; ties keep
    the original sensor order and zero deltas end up last."""
    return np.argsort(-np.asarray(delta, dtype=float), axis=-1, kind="stable")


def _active_gains(params: NetworkParams, order, beta_s, delta_s, gamma_s, k1) -> np.ndarray:
    """Gains (sorted order) for ``(N, K)`` sorted SNR arrays and ``(N,)`` active counts."""
    k = delta_s.shape[-1]
    active = np.arange(k) < k1[:, None]
    so_s = params.obs_noise_vars[order]
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.sqrt(delta_s)
        s = np.where(active, beta_s / sq, 0.0)
        ratio = sq[:, :, None] / sq[:, None, :] - 1.0
        num = sq * params.total_power + np.sum(np.where(active[:, None, :], s[:, None, :] * ratio, 0.0), axis=-1)
        num = np.where(active, np.maximum(num, 0.0), 0.0)
        # power_i = a_i^2 sigma_o_i^2 (1 + beta_i), proportional to num_i (1 + beta_i) / gamma_i
        w = np.where(active, num * (1.0 + beta_s) / gamma_s, 0.0)
        tot = np.sum(w, axis=-1, keepdims=True)
        power = np.where(active, params.total_power * (w / np.where(tot > 0, tot, 1.0)), 0.0)
        return np.sqrt(power / (so_s * (1.0 + beta_s)))


def optimal_gains(params: NetworkParams, chan) -> AllocationResult:
    """Optimal amplification gains for one channel realization.

    A channel where every delta is zero yields all-zero gains with
    ``active_count == 0`` rather than an error.
    """
    snr = compute_snrs(params, chan)
    if snr.delta.ndim != 1:
        raise ValueError("optimal_gains takes a single channel; use optimal_gains_batch")
    order = sort_by_delta(snr.delta)
    beta_s = snr.beta[order]
    delta_s = snr.delta[order]
    k1 = find_k1(beta_s, delta_s, params.total_power)
    gains = np.zeros(params.num_sensors)
    if k1 == 0:
        return AllocationResult(gains, 0, float("nan"), order)
    r = rho(k1, beta_s, delta_s, params.total_power)
    a_sorted = _active_gains(params, order, beta_s[None], delta_s[None], snr.gamma[order][None], np.array([k1]))
    gains[order] = a_sorted[0]
    return AllocationResult(gains, k1, r, order)


def optimal_gains_batch(params: NetworkParams, chans) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`optimal_gains` over a ``(N, K)`` array of fading draws.

    Returns the ``(N, K)`` gain matrix and the ``(N,)`` active counts.
    """
    g = np.atleast_2d(as_gains(chans))
    snr = compute_snrs(params, g)
    k = g.shape[1]
    order = sort_by_delta(snr.delta)
    ds = np.take_along_axis(snr.delta, order, axis=1)
    bs = params.osnr[order]
    pos = ds > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        c1 = np.cumsum(np.where(pos, bs / ds, 0.0), axis=1)
        c2 = np.cumsum(np.where(pos, bs / np.sqrt(ds), 0.0), axis=1)
        rho_all = (params.total_power + c1) / c2
        ok = pos & (np.sqrt(ds) * rho_all > 1.0)
    k1 = np.where(ok.any(axis=1), k - np.argmax(ok[:, ::-1], axis=1), 0)
    k1 = np.where((k1 == 0) & pos[:, 0], 1, k1)
    gam_s = np.take_along_axis(snr.gamma, order, axis=1)
    a_sorted = _active_gains(params, order, bs, ds, gam_s, k1)
    gains = np.empty_like(a_sorted)
    np.put_along_axis(gains, order, a_sorted, axis=1)
    return gains, k1
