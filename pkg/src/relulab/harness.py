"""Experiment orchestration for the scaling and shattering studies.

Synthesizes linear-target regression data on the unit ball, runs (d, n, seed)
training sweeps with a width-proportional-to-n rule, fits log-log MSE slopes,
runs the paired large-step vs weight-decay comparison, and persists every
artifact (CSV tables, JSON summaries, a manifest with config and file hashes)
deterministically: the same config and seed always produce the same bytes.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import metadata

import numpy as np

from .nets import Dataset, TwoLayerNet, forward, kaiming_init
from .numerics import derive_rng, loglog_slope, make_rng, sample_uniform_ball
from .shattering import NeuronStats, neuron_stats, neuron_stats_to_csv, shattering_report
from .sharpness import sharpness
from .training import TrainConfig, TrainLog, TrainingDivergedError, train, train_log_to_csv

__all__ = [
    "MSE_MODES",
    "EPOCH_PRESETS",
    "SWEEP_SCHEMA",
    "SWEEP_CSV_COLUMNS",
    "FAILURE_CSV_COLUMNS",
    "TRAIN_DATA_CHANNEL",
    "INIT_CHANNEL",
    "HOLDOUT_CHANNEL",
    "SHARPNESS_CHANNEL",
    "SchemaMismatchError",
    "SweepConfig",
    "RunRecord",
    "CellFailure",
    "SweepResult",
    "ShatterConfig",
    "ShatterResult",
    "preset_epochs",
    "apply_epoch_preset",
    "config_hash",
    "cell_rng",
    "make_regression_dataset",
    "risk_gap",
    "generalization_gap",
    "run_single_cell",
    "run_cell_with_log",
    "run_mse_sweep",
    "run_shattering_experiment",
    "write_sweep_csv",
    "append_sweep_records",
    "write_manifest",
]

MSE_MODES = ("in_sample_vs_f0", "holdout_vs_f0", "both")
EPOCH_PRESETS = ("appendix-A1", "appendix-A2")

SWEEP_SCHEMA = "sweep-v1"
SWEEP_CSV_COLUMNS = (
    "config_hash",
    "d",
    "n",
    "seed",
    "width",
    "final_train_loss",
    "in_sample_mse_vs_f0",
    "holdout_mse_vs_f0",
    "generalization_gap",
    "final_sharpness",
    "median_activation",
    "sparse_neuron_share",
    "dead_neuron_share",
)
FAILURE_CSV_COLUMNS = ("d", "n", "seed", "error")

# Per-cell random streams.  Every stream derives from
# (master_seed, d, n, seed_index, channel) so results never depend on the
# order cells are scheduled in.
TRAIN_DATA_CHANNEL = 0
INIT_CHANNEL = 1
HOLDOUT_CHANNEL = 2
SHARPNESS_CHANNEL = 3


class SchemaMismatchError(RuntimeError):
    """An existing CSV file has a header other than the current schema."""


def preset_epochs(preset: str, eta: float) -> int:
    """Epoch budget for a named preset.

    "appendix-A1" is a flat 20000 epochs; "appendix-A2" fixes the product
    eta * epochs = 10000, rounded to the nearest integer.
    """
    if eta <= 0.0:
        raise ValueError(f"step size must be positive, got {eta}")
    if preset == "appendix-A1":
        return 20000
    if preset == "appendix-A2":
        return round(10000.0 / eta)
    raise ValueError(f"unknown epoch preset {preset!r}; expected one of {EPOCH_PRESETS}")


def apply_epoch_preset(config: TrainConfig, preset: str) -> TrainConfig:
    """Copy of ``config`` with the epoch budget replaced by the preset's."""
    return dataclasses.replace(config, epochs=preset_epochs(preset, config.eta))


@dataclass(frozen=True)
class SweepConfig:
    """Grid layout for an MSE-vs-n sweep.

    Width per cell is ``width_rule * n``.  ``mse_mode`` selects which MSE
    column the slope tables are fitted on; every RunRecord always carries
    both columns so the CSV schema stays fixed.
    """

    dims: tuple
    sample_sizes: tuple
    train: TrainConfig
    sigma: float
    seeds_per_cell: int = 5
    width_rule: int = 4
    mse_mode: str = "both"
    holdout_size: int = 10000
    master_seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        sizes = tuple(int(n) for n in self.sample_sizes)
        if not dims or not sizes:
            raise ValueError("dims and sample_sizes must be nonempty")
        if min(dims) < 1 or min(sizes) < 1:
            raise ValueError("dims and sample_sizes must be positive")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.seeds_per_cell < 1:
            raise ValueError(f"seeds_per_cell must be >= 1, got {self.seeds_per_cell}")
        if self.width_rule < 1:
            raise ValueError(f"width_rule must be >= 1, got {self.width_rule}")
        if self.mse_mode not in MSE_MODES:
            raise ValueError(f"mse_mode must be one of {MSE_MODES}, got {self.mse_mode!r}")
        if self.holdout_size < 1:
            raise ValueError(f"holdout_size must be >= 1, got {self.holdout_size}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "sample_sizes", sizes)

    def as_dict(self) -> dict:
        """JSON-ready view of the science-relevant fields.

        ``output_dir`` is excluded on purpose: where artifacts land must not
        change the config hash.
        """
        out = dataclasses.asdict(self)
        del out["output_dir"]
        out["dims"] = list(self.dims)
        out["sample_sizes"] = list(self.sample_sizes)
        return out


@dataclass(frozen=True)
class RunRecord:
    """Metrics from one trained cell.  Every metric must be finite."""

    config_hash: str
    d: int
    n: int
    seed: int
    width: int
    final_train_loss: float
    in_sample_mse_vs_f0: float
    holdout_mse_vs_f0: float
    generalization_gap: float
    final_sharpness: float
    median_activation: float
    sparse_neuron_share: float
    dead_neuron_share: float

    def __post_init__(self):
        for field in dataclasses.fields(self):
            if field.type == "float":
                value = getattr(self, field.name)
                if not np.isfinite(value):
                    raise ValueError(f"metric {field.name} is not finite: {value!r}")


@dataclass(frozen=True)
class CellFailure:
    """A cell whose training run raised; the sweep records it and moves on."""

    d: int
    n: int
    seed: int
    error: str


@dataclass(frozen=True)
class SweepResult:
    """Sweep output: per-cell records, failures, per-(d, n) medians of the
    two MSE columns, and per-d log-log slopes for the selected mode(s).

    ``slopes[mode][d]`` is None when fewer than two (d, n) cells survive
    with a positive median.
    """

    records: tuple
    failures: tuple
    medians: dict
    slopes: dict


def config_hash(config) -> str:
    """sha256 over the canonical JSON form of a config (or plain dict)."""
    payload = config if isinstance(config, dict) else config.as_dict()
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def cell_rng(master_seed: int, d: int, n: int, seed_index: int, channel: int):
    """Generator for one (cell, channel) pair; independent of sweep order."""
    return derive_rng(master_seed, d, n, seed_index, channel)


def make_regression_dataset(rng, d: int, n: int, sigma: float) -> Dataset:
    """n points uniform on the unit ball with labels x_1 + sigma * noise.

    The ground truth is the fixed linear functional f0(x) = e1 . x; the
    noise stream is consumed even at sigma == 0 so the generator position
    after the call does not depend on sigma.
    """
    if d < 1 or n < 1:
        raise ValueError(f"need d >= 1 and n >= 1, got d={d}, n={n}")
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    rng = make_rng(rng)
    x = sample_uniform_ball(rng, d, n)
    noise = rng.standard_normal(n)
    direction = np.zeros(d)
    direction[0] = 1.0
    return Dataset(
        inputs=x,
        labels=x[:, 0] + sigma * noise,
        f0_direction=direction,
        noise_sigma=sigma,
    )


def _holdout_dataset(data: Dataset, size: int, rng) -> Dataset:
    if data.f0_direction is None or data.noise_sigma is None:
        raise ValueError("dataset lacks a ground-truth descriptor or noise level")
    x = sample_uniform_ball(rng, data.d, size)
    noise = rng.standard_normal(size)
    return Dataset(
        inputs=x,
        labels=x @ data.f0_direction + data.noise_sigma * noise,
        f0_direction=data.f0_direction,
        noise_sigma=data.noise_sigma,
    )


def risk_gap(net: TwoLayerNet, train_data: Dataset, holdout_data: Dataset) -> float:
    """|holdout risk - train risk| where risk is the mean squared error
    against the noisy labels of each set."""
    risk_in = float(np.mean((forward(net, train_data.inputs) - train_data.labels) ** 2))
    risk_out = float(np.mean((forward(net, holdout_data.inputs) - holdout_data.labels) ** 2))
    return abs(risk_out - risk_in)


def generalization_gap(net: TwoLayerNet, data: Dataset, holdout_size: int, rng) -> float:
    """Plug-in gap estimate against a fresh holdout sample.

    The holdout is drawn from the generative process recorded on ``data``
    (same f0 direction, same noise level).
    """
    if holdout_size < 1:
        raise ValueError(f"holdout_size must be >= 1, got {holdout_size}")
    holdout = _holdout_dataset(data, holdout_size, make_rng(rng))
    return risk_gap(net, data, holdout)


def _measure_cell(
    chash: str,
    d: int,
    n: int,
    seed: int,
    log: TrainLog,
    data: Dataset,
    train_config: TrainConfig,
    holdout_size: int,
    holdout_rng,
    sharpness_rng,
) -> RunRecord:
    """Assemble the RunRecord for a finished training run."""
    net = log.net
    in_sample = float(np.mean((forward(net, data.inputs) - data.f0_values(data.inputs)) ** 2))
    holdout = _holdout_dataset(data, holdout_size, holdout_rng)
    predictions = forward(net, holdout.inputs)
    holdout_mse = float(np.mean((predictions - holdout.f0_values(holdout.inputs)) ** 2))
    risk_out = float(np.mean((predictions - holdout.labels) ** 2))
    gap = abs(risk_out - 2.0 * log.final_loss)
    final_sharpness = sharpness(
        net,
        data,
        rel_tol=train_config.telemetry_rel_tol,
        max_iters=train_config.telemetry_max_iters,
        rng=sharpness_rng,
    )
    report = shattering_report(neuron_stats(net, data.inputs))
    return RunRecord(
        config_hash=chash,
        d=d,
        n=n,
        seed=seed,
        width=net.width,
        final_train_loss=log.final_loss,
        in_sample_mse_vs_f0=in_sample,
        holdout_mse_vs_f0=holdout_mse,
        generalization_gap=gap,
        final_sharpness=final_sharpness,
        median_activation=report.median_activation,
        sparse_neuron_share=report.sparse_neuron_share,
        dead_neuron_share=report.dead_neuron_share,
    )


def run_cell_with_log(cfg: SweepConfig, d: int, n: int, seed: int):
    """Data, init, train, measure for one grid cell.

    Returns (record, log, data) so callers can persist the trained network
    and the loss history.  Raises :class:`TrainingDivergedError` if the run
    blows up; the sweep driver converts that into a :class:`CellFailure`.
    """
    data = make_regression_dataset(
        cell_rng(cfg.master_seed, d, n, seed, TRAIN_DATA_CHANNEL), d, n, cfg.sigma
    )
    width = cfg.width_rule * n
    net0 = kaiming_init(cell_rng(cfg.master_seed, d, n, seed, INIT_CHANNEL), d, width)
    log = train(net0, data, cfg.train)
    record = _measure_cell(
        config_hash(cfg),
        d,
        n,
        seed,
        log,
        data,
        cfg.train,
        cfg.holdout_size,
        cell_rng(cfg.master_seed, d, n, seed, HOLDOUT_CHANNEL),
        cell_rng(cfg.master_seed, d, n, seed, SHARPNESS_CHANNEL),
    )
    return record, log, data


def run_single_cell(cfg: SweepConfig, d: int, n: int, seed: int) -> RunRecord:
    """Record only; see :func:`run_cell_with_log`."""
    return run_cell_with_log(cfg, d, n, seed)[0]


def _attempt_cell(cfg: SweepConfig, cell):
    d, n, seed = cell
    try:
        return run_single_cell(cfg, d, n, seed)
    except TrainingDivergedError as exc:
        return CellFailure(d=d, n=n, seed=seed, error=str(exc))


def _median_table(cfg: SweepConfig, records) -> dict:
    medians = {}
    for d in cfg.dims:
        for n in cfg.sample_sizes:
            cell = [r for r in records if r.d == d and r.n == n]
            if not cell:
                continue
            medians[(d, n)] = {
                "in_sample_mse_vs_f0": float(np.median([r.in_sample_mse_vs_f0 for r in cell])),
                "holdout_mse_vs_f0": float(np.median([r.holdout_mse_vs_f0 for r in cell])),
            }
    return medians


_MODE_COLUMNS = {
    "in_sample_vs_f0": "in_sample_mse_vs_f0",
    "holdout_vs_f0": "holdout_mse_vs_f0",
}


def _slope_table(cfg: SweepConfig, medians: dict) -> dict:
    modes = ("in_sample_vs_f0", "holdout_vs_f0") if cfg.mse_mode == "both" else (cfg.mse_mode,)
    slopes = {}
    for mode in modes:
        column = _MODE_COLUMNS[mode]
        per_d = {}
        for d in cfg.dims:
            # log-log fit needs strictly positive medians; a cell trained to
            # exactly zero error is dropped from the fit.
            points = [
                (n, medians[(d, n)][column])
                for n in cfg.sample_sizes
                if (d, n) in medians and medians[(d, n)][column] > 0.0
            ]
            per_d[d] = loglog_slope(points)[0] if len(points) >= 2 else None
        slopes[mode] = per_d
    return slopes


def run_mse_sweep(cfg: SweepConfig, threads: int = 1) -> SweepResult:
    """Train every (d, n, seed) cell and fit per-d log-log MSE slopes.

    Individual divergences are recorded as failures and the sweep continues.
    With ``threads > 1`` cells run on a thread pool; results are identical
    to the serial order because every cell derives its own random streams.
    When ``cfg.output_dir`` is set, writes sweep.csv, failures.csv,
    slopes.json, and manifest.json there (overwriting, so a rerun of the
    same config reproduces the same bytes).
    """
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    cells = [
        (d, n, seed)
        for d in cfg.dims
        for n in cfg.sample_sizes
        for seed in range(cfg.seeds_per_cell)
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(lambda cell: _attempt_cell(cfg, cell), cells))
    else:
        outcomes = [_attempt_cell(cfg, cell) for cell in cells]
    records = tuple(o for o in outcomes if isinstance(o, RunRecord))
    failures = tuple(o for o in outcomes if isinstance(o, CellFailure))
    medians = _median_table(cfg, records)
    slopes = _slope_table(cfg, medians)
    result = SweepResult(records=records, failures=failures, medians=medians, slopes=slopes)
    if cfg.output_dir is not None:
        _persist_sweep(cfg, result)
    return result


@dataclass(frozen=True)
class ShatterConfig:
    """Paired comparison: large-step GD vs small-step GD with weight decay,
    from the same initialization on the same data.

    The clip threshold is deliberately tighter than the generic trainer
    default.  At eta_large the very first descent steps catapult; clamping
    them to a modest norm keeps enough neurons alive that the run settles
    into the sparse-activation memorizing regime instead of collapsing to a
    signal-only fit, and it gets there in a fraction of the epochs.
    """

    d: int = 10
    n: int = 512
    width: int = 2048
    sigma: float = 1.0
    epochs: int = 20000
    eta_large: float = 0.9
    eta_decay: float = 0.01
    weight_decay: float = 0.1
    clip_threshold: float = 10.0
    sharpness_every: int = 0
    telemetry_rel_tol: float = 1e-6
    telemetry_max_iters: int = 5000
    master_seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        if self.d < 1 or self.n < 1 or self.width < 1:
            raise ValueError("d, n, and width must be positive")
        if self.sigma < 0.0 or self.epochs < 0:
            raise ValueError("sigma must be >= 0 and epochs >= 0")

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        del out["output_dir"]
        return out

    def train_configs(self) -> tuple[TrainConfig, TrainConfig]:
        common = dict(
            epochs=self.epochs,
            clip_threshold=self.clip_threshold,
            sharpness_every=self.sharpness_every,
            telemetry_rel_tol=self.telemetry_rel_tol,
            telemetry_max_iters=self.telemetry_max_iters,
            seed=self.master_seed,
        )
        large = TrainConfig(eta=self.eta_large, **common)
        decay = TrainConfig(eta=self.eta_decay, weight_decay=self.weight_decay, **common)
        return large, decay


@dataclass(frozen=True)
class ShatterResult:
    """Both arms of the comparison plus per-neuron scatter data."""

    large_step: RunRecord
    weight_decay: RunRecord
    large_step_log: TrainLog
    weight_decay_log: TrainLog
    large_step_stats: NeuronStats
    weight_decay_stats: NeuronStats


def run_shattering_experiment(cfg: ShatterConfig) -> ShatterResult:
    """Run both arms from shared data and a shared initialization.

    When ``cfg.output_dir`` is set, writes per-neuron scatter CSVs, per-arm
    training logs, a records JSON, and a manifest.
    """
    d, n = cfg.d, cfg.n
    data = make_regression_dataset(
        cell_rng(cfg.master_seed, d, n, 0, TRAIN_DATA_CHANNEL), d, n, cfg.sigma
    )
    net0 = kaiming_init(cell_rng(cfg.master_seed, d, n, 0, INIT_CHANNEL), d, cfg.width)
    large_cfg, decay_cfg = cfg.train_configs()

    arms = {}
    for arm, train_cfg in (("large_step", large_cfg), ("weight_decay", decay_cfg)):
        log = train(net0, data, train_cfg)
        payload = cfg.as_dict()
        payload["arm"] = arm
        record = _measure_cell(
            config_hash(payload),
            d,
            n,
            0,
            log,
            data,
            train_cfg,
            10000,
            cell_rng(cfg.master_seed, d, n, 0, HOLDOUT_CHANNEL),
            cell_rng(cfg.master_seed, d, n, 0, SHARPNESS_CHANNEL),
        )
        arms[arm] = (record, log, neuron_stats(log.net, data.inputs))

    result = ShatterResult(
        large_step=arms["large_step"][0],
        weight_decay=arms["weight_decay"][0],
        large_step_log=arms["large_step"][1],
        weight_decay_log=arms["weight_decay"][1],
        large_step_stats=arms["large_step"][2],
        weight_decay_stats=arms["weight_decay"][2],
    )
    if cfg.output_dir is not None:
        _persist_shatter(cfg, result)
    return result


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _record_row(record: RunRecord) -> list:
    return [_format_cell(getattr(record, col)) for col in SWEEP_CSV_COLUMNS]


def write_sweep_csv(path, records) -> None:
    """Write header plus one row per record, replacing any existing file."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_COLUMNS)
        for record in records:
            writer.writerow(_record_row(record))


def append_sweep_records(path, records) -> None:
    """Append rows to an existing sweep CSV after checking its header.

    Creates the file (with header) when absent.  A header that does not
    match :data:`SWEEP_CSV_COLUMNS` raises :class:`SchemaMismatchError`.
    """
    if not os.path.exists(path) or os.path.getsize(path) == 0:
        write_sweep_csv(path, records)
        return
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    if tuple(header) != SWEEP_CSV_COLUMNS:
        raise SchemaMismatchError(
            f"{path} has columns {header}, expected {list(SWEEP_CSV_COLUMNS)} ({SWEEP_SCHEMA})"
        )
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        for record in records:
            writer.writerow(_record_row(record))


def _write_failures_csv(path, failures) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FAILURE_CSV_COLUMNS)
        for failure in failures:
            writer.writerow([failure.d, failure.n, failure.seed, failure.error])


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(directory, config_dict: dict, filenames) -> str:
    """Write manifest.json: config, its hash, library versions, file hashes.

    Deliberately timestamp-free so reruns are byte-identical.  Returns the
    manifest path.
    """
    manifest = {
        "schema": SWEEP_SCHEMA,
        "config": config_dict,
        "config_sha256": config_hash(config_dict),
        "versions": {
            "python": platform.python_version(),
            "numpy": metadata.version("numpy"),
            "scipy": metadata.version("scipy"),
            "relulab": metadata.version("relulab"),
        },
        "files": {name: _sha256_file(os.path.join(directory, name)) for name in sorted(filenames)},
    }
    path = os.path.join(directory, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _persist_sweep(cfg: SweepConfig, result: SweepResult) -> None:
    os.makedirs(cfg.output_dir, exist_ok=True)
    write_sweep_csv(os.path.join(cfg.output_dir, "sweep.csv"), result.records)
    _write_failures_csv(os.path.join(cfg.output_dir, "failures.csv"), result.failures)
    summary = {
        "slopes": {
            mode: {str(d): slope for d, slope in per_d.items()}
            for mode, per_d in result.slopes.items()
        },
        "medians": [
            {"d": d, "n": n, **values} for (d, n), values in sorted(result.medians.items())
        ],
        "n_records": len(result.records),
        "n_failures": len(result.failures),
    }
    with open(os.path.join(cfg.output_dir, "slopes.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(cfg.output_dir, cfg.as_dict(), ["sweep.csv", "failures.csv", "slopes.json"])


def _persist_shatter(cfg: ShatterConfig, result: ShatterResult) -> None:
    os.makedirs(cfg.output_dir, exist_ok=True)
    files = []
    for arm in ("large_step", "weight_decay"):
        scatter = f"scatter_{arm}.csv"
        neuron_stats_to_csv(getattr(result, f"{arm}_stats"), os.path.join(cfg.output_dir, scatter))
        log_name = f"training_log_{arm}.csv"
        train_log_to_csv(getattr(result, f"{arm}_log"), os.path.join(cfg.output_dir, log_name))
        files.extend([scatter, log_name])
    records = {
        arm: dataclasses.asdict(getattr(result, arm)) for arm in ("large_step", "weight_decay")
    }
    with open(os.path.join(cfg.output_dir, "records.json"), "w") as fh:
        json.dump(records, fh, indent=2, sort_keys=True)
        fh.write("\n")
    files.append("records.json")
    write_manifest(cfg.output_dir, cfg.as_dict(), files)
