"""Compiled inner loops for the Lloyd trainer.

Both kernels evaluate the per-(codeword, channel) penalty with the same
arithmetic, so a medoid chosen from cell sums is scored bit-for-bit the same
way when the codebook distortion is recomputed.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _penalty(a_sq, j, load, i, beta, prior, opt_var):
    info = 0.0
    for k in range(beta.shape[0]):
        x = a_sq[j, k] * load[i, k]
        info += beta[k] * x / (1.0 + x)
    ov = opt_var[i]
    if info > 0.0:
        return abs(prior / info - ov)
    return 0.0 if math.isinf(ov) else math.inf


@njit(cache=True)
def penalty_matrix(a_sq, load, beta, prior, opt_var):
    """(M, C) penalties; ``load[i, k] = gamma_ik * sigma_o_k^2``."""
    m = load.shape[0]
    c = a_sq.shape[0]
    out = np.empty((m, c))
    for i in range(m):
        for j in range(c):
            out[i, j] = _penalty(a_sq, j, load, i, beta, prior, opt_var)
    return out


@njit(cache=True)
def penalty_sums(a_sq, load, beta, prior, opt_var):
    """Summed penalty of every candidate over all rows of ``load``."""
    c = a_sq.shape[0]
    out = np.empty(c)
    for j in range(c):
        tot = 0.0
        for i in range(load.shape[0]):
            tot += _penalty(a_sq, j, load, i, beta, prior, opt_var)
        out[j] = tot
    return out
