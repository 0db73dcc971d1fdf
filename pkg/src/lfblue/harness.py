"""Monte-Carlo experiment driver: full vs. limited feedback sweeps.

Random streams
--------------
Every random quantity comes from its own stream,
``np.random.SeedSequence(master_seed, spawn_key=key)``, with keys

* ``(0, geo, i)``              geometry of sensor ``i`` (h, noise variance, distance)
* ``(1, K, geo)``              training channels (shared by all L and P_total)
* ``(2, K, geo, L, pbits)``    initial codewords, ``pbits`` = IEEE-754 bits of P_total in watts
* ``(3, K, geo)``              evaluation channels (shared by all L and P_total)

where ``geo`` counts geometry draws.  Geometry is keyed per sensor, so
the K-sensor network is the first K sensors of one field and networks of
different sizes are nested.  Because each stream is keyed rather
than drawn sequentially, the trained codebooks do not depend on
``mc_trials`` and results do not depend on the number of worker threads.
Full and limited feedback are evaluated on the same channel draws (common
random numbers), so per-trial comparisons are paired.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import codebook as cb
from .allocator import optimal_gains_batch
from .channel import FadingModel, NetworkModel, sample_distances, sample_fading, sample_network
from .estimator import blue_variance
from .model import NetworkParams, db_to_linear, dbm_to_watts

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ResultRecord",
    "load_config",
    "stream",
    "sample_geometry",
    "full_feedback_variances",
    "limited_feedback_variances",
    "train_codebook",
    "run_full_feedback",
    "run_limited_feedback",
    "run_experiment",
    "write_results",
    "read_results",
    "COLUMNS",
]

log = logging.getLogger(__name__)

GEOMETRY, TRAINING, CODEBOOK_INIT, EVALUATION = range(4)


class ConfigError(ValueError):
    pass


def default_sweep_dbm() -> tuple[float, ...]:
    return tuple(float(x) for x in np.linspace(5.0, 20.0, 16))


@dataclass(frozen=True)
class ExperimentConfig:
    k_values: tuple[int, ...] = (5, 10)
    l_values: tuple[int, ...] = (2, 4)
    p_total_dbm: tuple[float, ...] = field(default_factory=default_sweep_dbm)
    train_size: int = 5000
    epsilon: float = 1e-6
    mc_trials: int = 5000
    master_seed: int = 0
    fading: FadingModel = field(default_factory=FadingModel)
    network: NetworkModel = field(default_factory=NetworkModel)
    geometry_draws: int = 1
    output: str | None = None
    format: str = "csv"
    threads: int = 1
    cache_dir: str | None = None

    def __post_init__(self):
        for name in ("k_values", "l_values", "p_total_dbm"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self):
        if not self.k_values or any(int(k) != k or k < 1 for k in self.k_values):
            raise ConfigError(f"k_values must be positive integers, got {self.k_values}")
        if not self.l_values or any(int(b) != b or b < 0 for b in self.l_values):
            raise ConfigError(f"l_values must be nonnegative integers, got {self.l_values}")
        if not self.p_total_dbm or not all(math.isfinite(p) for p in self.p_total_dbm):
            raise ConfigError("p_total_dbm must be a nonempty list of finite values")
        for name in ("train_size", "mc_trials", "threads", "geometry_draws"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be nonnegative")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        need = 4 * 2 ** max(self.l_values)
        if self.train_size < need:
            raise ConfigError(f"train_size {self.train_size} < 4 * 2**max(L) = {need}")
        if self.format not in ("csv", "jsonl"):
            raise ConfigError(f"format must be csv or jsonl, got {self.format!r}")

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


def _sub(cls, block: dict, renames: dict) -> object:
    block = dict(block)
    for src, (dst, conv) in renames.items():
        if src in block:
            block[dst] = conv(block.pop(src))
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(block) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    if "obs_noise_var_range" in block:
        block["obs_noise_var_range"] = tuple(block["obs_noise_var_range"])
    return cls(**block)


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a config from a JSON-style dict (see README for the key set)."""
    raw = dict(raw)
    try:
        if "p_sweep_dbm" in raw:
            sweep = raw.pop("p_sweep_dbm")
            n = int(round((sweep["stop"] - sweep["start"]) / sweep["step"])) + 1
            raw["p_total_dbm"] = [sweep["start"] + i * sweep["step"] for i in range(n)]
        if "fading" in raw:
            raw["fading"] = _sub(FadingModel, raw["fading"], {"nominal_gain_db": ("nominal_gain", db_to_linear)})
        if "network" in raw:
            raw["network"] = _sub(NetworkModel, raw["network"], {"chan_noise_var_dbm": ("chan_noise_var", dbm_to_watts)})
        names = {f.name for f in dataclasses.fields(ExperimentConfig)}
        unknown = set(raw) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return ExperimentConfig(**raw)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(raw)


def stream(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key)))


def _pbits(p_watts: float) -> int:
    return int(np.float64(p_watts).view(np.uint64))


@dataclass(frozen=True)
class ResultRecord:
    """Averaged BLUE variance at one sweep point.  ``bits is None`` means full feedback."""

    k: int
    bits: int | None
    p_total_dbm: float
    p_total: float
    mean_variance: float
    std_error: float
    trials: int
    num_infinite_trials: int = 0
    codebook_iterations: int = 0
    wall_time: float | None = field(default=None, compare=False)

    @property
    def label(self) -> str:
        return "full" if self.bits is None else str(self.bits)


def sample_geometry(config: ExperimentConfig, k: int, geo: int = 0):
    """Network parameters (at the first sweep power) and distances for one geometry.

    Sensor ``i`` is drawn from its own stream, so ``sample_geometry(config, k)``
    is a prefix of ``sample_geometry(config, k + 1)``.
    """
    one = dataclasses.replace(config.network, h_power_target=None)
    p_total = dbm_to_watts(config.p_total_dbm[0])
    h, so, d = np.empty(k), np.empty(k), np.empty(k)
    for i in range(k):
        rng = stream(config.master_seed, GEOMETRY, geo, i)
        sensor = sample_network(one, 1, p_total, rng)
        h[i], so[i] = sensor.obs_gains[0], sensor.obs_noise_vars[0]
        d[i] = sample_distances(config.fading, 1, rng)[0]
    if config.network.h_power_target is not None:
        h = h * math.sqrt(config.network.h_power_target / np.mean(h**2))
    params = NetworkParams(
        obs_gains=h,
        obs_noise_vars=so,
        chan_noise_vars=np.full(k, config.network.chan_noise_var),
        total_power=p_total,
        prior_variance=config.network.prior_variance,
    )
    return params, d


def full_feedback_variances(params: NetworkParams, channels) -> np.ndarray:
    """Per-trial BLUE variance with exact optimal gains."""
    gains, _ = optimal_gains_batch(params, channels)
    return np.asarray(blue_variance(params, gains, channels), dtype=float).reshape(-1)


def limited_feedback_variances(params: NetworkParams, book, channels) -> np.ndarray:
    """Per-trial BLUE variance using the codeword the fusion center selects."""
    _, qvar, _ = cb.select_indices(params, book, channels)
    return qvar


def _cache_path(config, params, training_channels, bits, key) -> str | None:
    if not config.cache_dir:
        return None
    h = hashlib.sha256()
    for arr in (params.obs_gains, params.obs_noise_vars, params.chan_noise_vars, training_channels):
        h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
    h.update(repr((params.total_power, params.prior_variance, bits, config.epsilon, config.master_seed, key)).encode())
    return os.path.join(config.cache_dir, f"codebook-{h.hexdigest()[:20]}.txt")


def train_codebook(config: ExperimentConfig, params: NetworkParams, training_channels, bits: int, key=()) -> cb.Codebook:
    """Train (or load from the cache) the codebook for ``params.total_power``."""
    path = _cache_path(config, params, training_channels, bits, key)
    if path and os.path.exists(path):
        log.debug("codebook cache hit %s", path)
        return cb.load_codebook(path)
    samples = cb.TrainingSet.from_channels(params, training_channels)
    rng = stream(config.master_seed, CODEBOOK_INIT, *key, bits, _pbits(params.total_power))
    book = cb.train(params, samples, bits, config.epsilon, rng)
    book = dataclasses.replace(book, seed=config.master_seed)
    if path:
        os.makedirs(config.cache_dir, exist_ok=True)
        cb.save_codebook(book, path)
    return book


def _map(config: ExperimentConfig, fn, jobs):
    if config.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(fn, jobs))
    return [fn(job) for job in jobs]


def _full_points(config, params, channels):
    channels = np.atleast_2d(channels)

    def job(p_dbm):
        t0 = time.perf_counter()
        p = params.with_power(dbm_to_watts(p_dbm))
        return (None, p_dbm), full_feedback_variances(p, channels), 0, time.perf_counter() - t0

    return _map(config, job, list(config.p_total_dbm))


def _limited_points(config, params, channels, training_channels, key):
    channels = np.atleast_2d(channels)
    jobs = [(bits, p_dbm) for bits in config.l_values for p_dbm in config.p_total_dbm]

    def job(item):
        bits, p_dbm = item
        t0 = time.perf_counter()
        p = params.with_power(dbm_to_watts(p_dbm))
        book = train_codebook(config, p, training_channels, bits, key)
        var = limited_feedback_variances(p, book, channels)
        return item, var, book.iterations, time.perf_counter() - t0

    return _map(config, job, jobs)


def _summarize(k, point, var, iterations, wall_time) -> ResultRecord:
    bits, p_dbm = point
    finite = np.isfinite(var)
    v = var[finite]
    return ResultRecord(
        k=k,
        bits=bits,
        p_total_dbm=float(p_dbm),
        p_total=dbm_to_watts(p_dbm),
        mean_variance=float(np.mean(v)) if v.size else float("nan"),
        std_error=float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0,
        trials=int(var.size),
        num_infinite_trials=int(var.size - v.size),
        codebook_iterations=int(iterations),
        wall_time=wall_time,
    )


def run_full_feedback(config: ExperimentConfig, params: NetworkParams, channels) -> list[ResultRecord]:
    """Average variance with exact-gain feedback at every sweep power.

    Trials where no sensor can be active (infinite variance) are counted in
    ``num_infinite_trials`` and left out of the mean.
    """
    return [_summarize(params.num_sensors, *pt) for pt in _full_points(config, params, channels)]


def run_limited_feedback(
    config: ExperimentConfig,
    params: NetworkParams,
    channels,
    training_channels,
    key=(),
) -> list[ResultRecord]:
    """Train one codebook per (L, P_total) and average the quantized-gain variance.

    ``channels`` are the evaluation draws and must not overlap the training
    draws; ``key`` prefixes the codebook-initialization stream key.
    """
    points = _limited_points(config, params, channels, training_channels, key)
    return [_summarize(params.num_sensors, *pt) for pt in points]


def run_experiment(config: ExperimentConfig) -> list[ResultRecord]:
    """Full sweep over K, L and P_total; writes ``config.output`` when set.

    Rows come out grouped by K, then feedback ("full" first, then each L),
    then P_total in sweep order.  With several geometry draws the trials of
    all geometries are pooled per sweep point.
    """
    records: list[ResultRecord] = []
    for k in config.k_values:
        pooled: dict = {}
        for geo in range(config.geometry_draws):
            params, distances = sample_geometry(config, k, geo)
            train_g = sample_fading(config.fading, distances, stream(config.master_seed, TRAINING, k, geo), size=config.train_size)
            eval_g = sample_fading(config.fading, distances, stream(config.master_seed, EVALUATION, k, geo), size=config.mc_trials)
            points = _full_points(config, params, eval_g) + _limited_points(config, params, eval_g, train_g, (k, geo))
            for point, var, iters, wall in points:
                acc = pooled.setdefault(point, ([], 0, 0.0))
                acc[0].append(var)
                pooled[point] = (acc[0], max(acc[1], iters), acc[2] + wall)
        for point, (vars_, iters, wall) in pooled.items():
            records.append(_summarize(k, point, np.concatenate(vars_), iters, wall))
    if config.output:
        write_results(records, config.output, config.format)
    return records


COLUMNS = (
    "K",
    "L",
    "P_total_dBm",
    "P_total_W",
    "mean_variance",
    "std_error",
    "trials",
    "num_infinite_trials",
    "codebook_iterations",
)


def _row(rec: ResultRecord) -> dict:
    return {
        "K": rec.k,
        "L": rec.label,
        "P_total_dBm": rec.p_total_dbm,
        "P_total_W": rec.p_total,
        "mean_variance": rec.mean_variance,
        "std_error": rec.std_error,
        "trials": rec.trials,
        "num_infinite_trials": rec.num_infinite_trials,
        "codebook_iterations": rec.codebook_iterations,
    }


def _from_row(row: dict) -> ResultRecord:
    label = str(row["L"])
    return ResultRecord(
        k=int(row["K"]),
        bits=None if label == "full" else int(label),
        p_total_dbm=float(row["P_total_dBm"]),
        p_total=float(row["P_total_W"]),
        mean_variance=float(row["mean_variance"]),
        std_error=float(row["std_error"]),
        trials=int(row["trials"]),
        num_infinite_trials=int(row["num_infinite_trials"]),
        codebook_iterations=int(row["codebook_iterations"]),
    )


def write_results(records, path, format: str = "csv") -> None:
    """Write records as CSV (header + one row each) or JSON lines.

    Floats are written with ``repr`` so reading them back is exact.  Wall
    time is not written, which keeps the files byte-reproducible.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    buf = io.StringIO()
    if format == "csv":
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for rec in records:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in _row(rec).values()])
    elif format == "jsonl":
        for rec in records:
            buf.write(json.dumps(_row(rec)) + "\n")
    else:
        raise ValueError(f"unknown format {format!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_results(path, format: str | None = None) -> list[ResultRecord]:
    if format is None:
        format = "jsonl" if str(path).endswith((".jsonl", ".json")) else "csv"
    with open(path, encoding="utf-8", newline="") as fh:
        if format == "csv":
            return [_from_row(row) for row in csv.DictReader(fh)]
        return [_from_row(json.loads(line)) for line in fh if line.strip()]
