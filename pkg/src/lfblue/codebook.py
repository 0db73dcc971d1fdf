"""Limited-feedback codebook of power-allocation vectors.

The fusion center quantizes the space of optimal gain vectors with a
generalized Lloyd iteration whose distance is the *variance penalty*

    D_W(a | g) = |Var(a, g) - Var(a_opt(g), g)|

rather than a Euclidean norm.  At run time it broadcasts only the index of
the codeword with the smallest penalty for the observed channel.

The centroid step is a restricted (medoid) search: the new codeword for a
cell is whichever of the cell's own optimal vectors, or the previous
codeword, has the smallest mean penalty over the cell.  Keeping the
previous codeword as a candidate makes the training distortion monotone,
and every codeword is some channel's optimal allocation, so it spends
exactly the power budget.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, flatfile
from .allocator import optimal_gains_batch
from .estimator import blue_variance
from .model import NetworkParams, as_gains

__all__ = [
    "InsufficientTrainingDataError",
    "EmptyCellError",
    "TrainingSample",
    "TrainingSet",
    "Codebook",
    "codeword_distortion",
    "distortion_matrix",
    "codebook_distortion",
    "partition",
    "centroid",
    "train",
    "select_index",
    "select_indices",
    "save_codebook",
    "load_codebook",
]

log = logging.getLogger(__name__)

MAX_ITERATIONS = 500


class InsufficientTrainingDataError(ValueError):
    pass


class EmptyCellError(ValueError):
    """A Lloyd cell received no training samples."""


@dataclass(frozen=True, eq=False)
class TrainingSample:
    chan: np.ndarray
    opt_gains: np.ndarray
    opt_variance: float


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """Training channels with their optimal gains and variances, row-aligned."""

    channels: np.ndarray
    opt_gains: np.ndarray
    opt_variance: np.ndarray

    @classmethod
    def from_channels(cls, params: NetworkParams, channels) -> TrainingSet:
        g = np.atleast_2d(np.array(as_gains(channels), dtype=float))
        gains, _ = optimal_gains_batch(params, g)
        var = np.asarray(blue_variance(params, gains, g), dtype=float).reshape(-1)
        return cls(g, gains, var)

    @classmethod
    def from_samples(cls, samples) -> TrainingSet:
        if isinstance(samples, TrainingSet):
            return samples
        samples = list(samples)
        if not samples:
            return cls(np.empty((0, 0)), np.empty((0, 0)), np.empty(0))
        return cls(
            np.array([as_gains(s.chan) for s in samples], dtype=float),
            np.array([s.opt_gains for s in samples], dtype=float),
            np.array([s.opt_variance for s in samples], dtype=float),
        )

    def __len__(self):
        return self.channels.shape[0]

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return TrainingSample(self.channels[i], self.opt_gains[i], float(self.opt_variance[i]))
        return TrainingSet(self.channels[i], self.opt_gains[i], self.opt_variance[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


@dataclass(frozen=True, eq=False)
class Codebook:
    """``2**bits`` codewords (rows) plus training metadata.

    ``history[0]`` is the distortion of the initial random codebook and
    ``history[-1]`` that of the returned one.
    """

    codewords: np.ndarray
    bits: int
    history: list[float] = field(default_factory=list)
    assignment: np.ndarray | None = None
    total_power: float | None = None
    seed: int | None = None
    train_size: int | None = None
    epsilon: float | None = None
    iterations: int = 0
    converged: bool = True

    def __post_init__(self):
        cw = np.array(self.codewords, dtype=float)
        if cw.ndim != 2 or cw.shape[0] != 2**self.bits:
            raise ValueError(f"expected {2 ** self.bits} codewords, got shape {cw.shape}")
        cw.setflags(write=False)
        object.__setattr__(self, "codewords", cw)

    @property
    def size(self) -> int:
        return self.codewords.shape[0]

    @property
    def num_sensors(self) -> int:
        return self.codewords.shape[1]

    def __len__(self):
        return self.size

    def __getitem__(self, index):
        return self.codewords[index]


def _codewords(book) -> np.ndarray:
    return book.codewords if isinstance(book, Codebook) else np.atleast_2d(np.asarray(book, dtype=float))


def _gap(var, opt_var):
    """|var - opt_var|, defined as 0 when both are infinite (nothing can help)."""
    var = np.asarray(var, dtype=float)
    opt_var = np.asarray(opt_var, dtype=float)
    both_inf = np.isinf(var) & np.isinf(opt_var)
    with np.errstate(invalid="ignore"):
        d = np.abs(var - opt_var)
    return np.where(both_inf, 0.0, d)


def codeword_distortion(params: NetworkParams, a_codeword, sample: TrainingSample) -> float:
    """Variance penalty of using ``a_codeword`` instead of the sample's optimum."""
    var = blue_variance(params, a_codeword, sample.chan)
    return float(_gap(var, sample.opt_variance))


def _load(params: NetworkParams, channels: np.ndarray) -> np.ndarray:
    """Per-sample ``gamma_i * sigma_o_i^2``; the received-SNR term is ``a_i^2`` times this."""
    return np.ascontiguousarray(channels**2 / params.chan_noise_vars * params.obs_noise_vars)


def _penalties(params: NetworkParams, codewords: np.ndarray, ts: TrainingSet) -> np.ndarray:
    return _kernels.penalty_matrix(
        np.ascontiguousarray(codewords**2),
        _load(params, ts.channels),
        np.ascontiguousarray(params.osnr),
        params.prior_variance,
        np.ascontiguousarray(ts.opt_variance),
    )


def distortion_matrix(params: NetworkParams, codewords, samples) -> np.ndarray:
    """``(M, C)`` matrix of penalties of every codeword against every sample."""
    ts = TrainingSet.from_samples(samples)
    return _penalties(params, _codewords(codewords), ts)


def codebook_distortion(params: NetworkParams, book, samples) -> float:
    """Empirical mean over samples of the smallest codeword penalty."""
    ts = TrainingSet.from_samples(samples)
    if len(ts) == 0:
        raise ValueError("need at least one training sample")
    return float(np.mean(distortion_matrix(params, book, ts).min(axis=1)))


def partition(params: NetworkParams, book, samples) -> np.ndarray:
    """Nearest codeword (by penalty) for every sample; ties go to the lowest index."""
    return np.argmin(distortion_matrix(params, book, samples), axis=1)


def _cell_costs(params: NetworkParams, candidates: np.ndarray, cell: TrainingSet) -> np.ndarray:
    """Summed penalty of each candidate over the cell."""
    return _kernels.penalty_sums(
        np.ascontiguousarray(candidates**2),
        _load(params, cell.channels),
        np.ascontiguousarray(params.osnr),
        params.prior_variance,
        np.ascontiguousarray(cell.opt_variance),
    )


def centroid(params: NetworkParams, cell_samples, previous_codeword) -> np.ndarray:
    """Medoid of a Lloyd cell under the variance penalty.

    Candidates are the previous codeword followed by the cell's optimal
    vectors in training order; the first candidate with the lowest mean
    penalty wins.
    """
    cell = TrainingSet.from_samples(cell_samples)
    if len(cell) == 0:
        raise EmptyCellError("cell has no training samples")
    prev = np.asarray(previous_codeword, dtype=float)
    candidates = np.vstack([prev[None, :], cell.opt_gains])
    costs = _cell_costs(params, candidates, cell)
    return candidates[int(np.argmin(costs))].copy()


def _resolve_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng, None
    if rng is None:
        return np.random.default_rng(), None
    return np.random.default_rng(int(rng)), int(rng)


def train(
    params: NetworkParams,
    samples,
    bits: int,
    epsilon: float,
    rng=None,
    *,
    initial_codewords=None,
    max_iterations: int = MAX_ITERATIONS,
) -> Codebook:
    """Design a ``2**bits``-word codebook by generalized Lloyd iteration.

    Parameters
    ----------
    params : NetworkParams
        Network the codebook serves; its ``total_power`` must be the one the
        training samples were optimized for.
    samples : TrainingSet or sequence of TrainingSample
    bits : int
        Feedback bits ``L``.
    epsilon : float
        Stop once an iteration lowers the mean distortion by at most this.
    rng : Generator, int or None
        Source for the random initial codewords (distinct training indices).
        An int seed is recorded in the returned codebook.
    initial_codewords : array_like, optional
        ``(2**bits, K)`` starting codebook replacing the random draw.

    Raises
    ------
    InsufficientTrainingDataError
        Fewer training samples than codewords.
    """
    ts = TrainingSet.from_samples(samples)
    m = len(ts)
    size = 2**bits
    if bits < 0:
        raise ValueError("bits must be nonnegative")
    if m < size:
        raise InsufficientTrainingDataError(f"{m} training samples for {size} codewords")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    gen, seed = _resolve_rng(rng)

    if initial_codewords is None:
        cw = ts.opt_gains[gen.choice(m, size=size, replace=False)].copy()
    else:
        cw = np.array(initial_codewords, dtype=float)
        if cw.shape != (size, ts.opt_gains.shape[1]):
            raise ValueError(f"initial_codewords must have shape {(size, ts.opt_gains.shape[1])}")
    dist = distortion_matrix(params, cw, ts)
    new_cost = float(np.mean(dist.min(axis=1)))
    history = [new_cost]
    iteration = 0
    converged = False
    while iteration < max_iterations:
        iteration += 1
        old_cost = new_cost
        assign = np.argmin(dist, axis=1)
        current = dist[np.arange(m), assign]
        new_cw = cw.copy()
        empty = []
        for ell in range(size):
            members = np.flatnonzero(assign == ell)
            try:
                new_cw[ell] = centroid(params, ts[members], cw[ell])
            except EmptyCellError:
                empty.append(ell)
        if empty:
            # reseed from the worst-served samples, one distinct sample per empty cell
            worst = np.argsort(-current, kind="stable")[: len(empty)]
            for ell, i in zip(empty, worst):
                new_cw[ell] = ts.opt_gains[i]
            log.debug("iteration %d: reseeded empty cells %s", iteration, empty)
        new_dist = distortion_matrix(params, new_cw, ts)
        new_cost = float(np.mean(new_dist.min(axis=1)))
        if new_cost > old_cost:
            # cell sums and the global mean are summed in different orders, so an
            # exact tie between medoid candidates can come out an ulp worse; keep
            # the previous codebook, which is as good in exact arithmetic
            log.debug("iteration %d: roundoff increase %.3g, keeping previous codebook", iteration, new_cost - old_cost)
            new_cost = old_cost
        else:
            cw, dist = new_cw, new_dist
        history.append(new_cost)
        if old_cost - new_cost <= epsilon:
            converged = True
            break
    if not converged:
        log.warning(
            "Lloyd training hit the %d-iteration cap (last improvement %.3g > epsilon %.3g)",
            max_iterations,
            history[-2] - history[-1],
            epsilon,
        )
    return Codebook(
        codewords=cw,
        bits=bits,
        history=history,
        assignment=np.argmin(dist, axis=1),
        total_power=params.total_power,
        seed=seed,
        train_size=m,
        epsilon=float(epsilon),
        iterations=iteration,
        converged=converged,
    )


def select_indices(params: NetworkParams, book, chans):
    """Vectorized index selection over a ``(N, K)`` array of channels.

    Returns ``(indices, quantized_variance, optimal_variance)``, each of
    shape ``(N,)``.
    """
    cw = _codewords(book)
    ts = TrainingSet.from_channels(params, chans)
    dist = distortion_matrix(params, cw, ts)
    idx = np.argmin(dist, axis=1)
    qvar = np.asarray(blue_variance(params, cw[idx], ts.channels), dtype=float).reshape(-1)
    return idx, qvar, ts.opt_variance


def select_index(params: NetworkParams, book, chan) -> int:
    """Index the fusion center broadcasts for one channel realization."""
    g = np.asarray(as_gains(chan), dtype=float)
    if g.ndim != 1:
        raise ValueError("select_index takes a single channel; use select_indices")
    idx, _, _ = select_indices(params, book, g[None, :])
    return int(idx[0])


CODEBOOK_KIND = "lfblue-codebook"


def save_codebook(book: Codebook, path) -> None:
    """Persist a codebook; see the README for the field order."""
    lines = [
        ("K", [book.num_sensors]),
        ("L", [book.bits]),
        ("P_total", [book.total_power]),
        ("seed", [book.seed]),
        ("M", [book.train_size]),
        ("epsilon", [book.epsilon]),
        ("iterations", [book.iterations]),
        ("converged", [bool(book.converged)]),
        ("history", list(book.history)),
    ]
    lines += [("codeword", list(row)) for row in book.codewords]
    if book.assignment is not None:
        lines.append(("assignment", [int(i) for i in book.assignment]))
    flatfile.write(path, CODEBOOK_KIND, lines)


def load_codebook(path) -> Codebook:
    e = flatfile.read(path, CODEBOOK_KIND)
    k = flatfile.scalar(e, "K", int)
    rows = [flatfile.floats(t) for t in e.get("codeword", [])]
    if any(len(r) != k for r in rows):
        raise flatfile.FormatError(f"{path}: codeword length differs from K={k}")
    assignment = e.get("assignment")
    return Codebook(
        codewords=np.array(rows, dtype=float).reshape(len(rows), k),
        bits=flatfile.scalar(e, "L", int),
        history=flatfile.floats(e.get("history", [[]])[0]),
        assignment=None if assignment is None else np.array(assignment[0], dtype=int),
        total_power=flatfile.scalar(e, "P_total"),
        seed=flatfile.scalar(e, "seed", int),
        train_size=flatfile.scalar(e, "M", int),
        epsilon=flatfile.scalar(e, "epsilon"),
        iterations=flatfile.scalar(e, "iterations", int),
        converged=bool(flatfile.scalar(e, "converged", int)),
    )
