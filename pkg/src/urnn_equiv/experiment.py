"""Hidden-unit sweeps over constraint modes, with per-cell reproducibility.

A sweep cell is (mode, hidden_units, realization seed). Each cell
regenerates its true system and dataset from the seed (cheap and
deterministic), trains one student, and contributes one CSV row. Rows are
sorted before writing so worker scheduling never changes the output.

The ``urnn`` mode reports ``adjusted_units = hidden_units / 2``: a unitary
network with 2n states is the natural peer of an unconstrained network
with n states, so curves should be compared at equal adjusted units.
"""

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from statistics import median
from typing import Dict, List, Tuple

from .errors import DivergenceError, InvalidInputError
from .serialize import recorded_wall_time, write_json, _atomic_write_bytes
from .synth import SystemSpec, generate_dataset, generate_system
from .training import TrainConfig, evaluate, init_student, oracle_optimal_r2, train

MODES = {"rnn": "none", "contrnn": "contractive", "urnn": "unitary"}
CSV_COLUMNS = (
    "mode",
    "hidden_units",
    "adjusted_units",
    "seed",
    "test_r2",
    "optimal_r2",
    "epochs",
    "wall_time",
)
THREADS_ENV = "URNN_EQUIV_THREADS"


@dataclass(frozen=True)
class ExperimentConfig:
    n_true: int = 4
    m: int = 2
    p: int = 2
    epsilon: float = 0.01
    activation_target: float = 0.6
    input_std: float = 1.0
    input_sparsity: float = 1.0
    n_train: int = 700
    n_test: int = 300
    t_len: int = 1000
    snr_db: float = 20.0
    modes: Tuple[str, ...] = ("rnn", "urnn")
    units_by_mode: Tuple[Tuple[str, Tuple[int, ...]], ...] = (
        ("rnn", (2, 4, 6, 8, 10, 12, 14)),
        ("urnn", (2, 4, 6, 8, 10, 12, 14)),
    )
    seeds: Tuple[int, ...] = tuple(range(30))
    learning_rate: float = 0.01
    batch_size: int = 10
    max_epochs: int = 200
    patience: int = 10
    validation_fraction: float = 0.15
    contractive_cap: float = 0.999

    def units_for(self, mode: str) -> Tuple[int, ...]:
        for name, units in self.units_by_mode:
            if name == mode:
                return units
        raise InvalidInputError(f"no hidden-unit grid configured for mode {mode!r}")

    def __post_init__(self):
        if not self.modes or not self.seeds:
            raise InvalidInputError("modes and seeds must be nonempty")
        for mode in self.modes:
            if mode not in MODES:
                raise InvalidInputError(f"unknown mode {mode!r}; expected one of {sorted(MODES)}")
            if not self.units_for(mode):
                raise InvalidInputError(f"empty hidden-unit grid for mode {mode!r}")


def desk_preset(seeds: Tuple[int, ...] = (0, 1, 2)) -> ExperimentConfig:
    """Shrunk sweep that finishes in minutes: T=200, 100/50 sequences,
    eps=0.05, SNR 20 dB, three seeds."""
    return ExperimentConfig(
        n_true=4,
        epsilon=0.05,
        n_train=100,
        n_test=50,
        t_len=200,
        snr_db=20.0,
        modes=("rnn", "urnn"),
        units_by_mode=(("rnn", (2, 4, 8)), ("urnn", (4, 8, 16))),
        seeds=seeds,
        max_epochs=150,
        patience=12,
    )


def _adjusted_units(mode: str, units: int) -> float:
    return units / 2 if mode == "urnn" else float(units)


def run_cell(config: ExperimentConfig, mode: str, units: int, seed: int) -> Dict:
    """Train one (mode, units, seed) cell; returns a CSV row dict."""
    spec = SystemSpec(
        n=config.n_true,
        m=config.m,
        p=config.p,
        epsilon=config.epsilon,
        seed=seed,
        activation_target=config.activation_target,
        input_std=config.input_std,
        input_sparsity=config.input_sparsity,
    )
    system = generate_system(spec)
    dataset = generate_dataset(
        system, spec, config.n_train, config.n_test, config.t_len, config.snr_db, seed=seed
    )
    train_config = TrainConfig(
        hidden_units=units,
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        max_epochs=config.max_epochs,
        constraint=MODES[mode],
        contractive_cap=config.contractive_cap,
        patience=config.patience,
        validation_fraction=config.validation_fraction,
        seed=seed,
    )
    student = init_student(units, config.m, config.p, train_config)
    row = {
        "mode": mode,
        "hidden_units": units,
        "adjusted_units": _adjusted_units(mode, units),
        "seed": seed,
        "optimal_r2": oracle_optimal_r2(dataset),
    }
    try:
        best, report = train(student, dataset, train_config)
    except DivergenceError as exc:
        row.update(test_r2=None, epochs=exc.epoch, wall_time=None, error=str(exc))
        return row
    row.update(
        test_r2=evaluate(best, dataset.test),
        epochs=report.epochs_run,
        wall_time=report.wall_time_s,
        error=None,
    )
    return row


def _run_cell_packed(packed) -> Dict:
    return run_cell(*packed)


def worker_count(cells: int) -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        cap = int(raw)
    except ValueError:
        raise InvalidInputError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    return max(1, min(cap, cells))


def run_experiment(config: ExperimentConfig, out_dir: str) -> Tuple[List[Dict], int]:
    """Run all cells, write sweep.csv and summary.json, and return
    (rows, number of failed cells)."""
    cells = [
        (config, mode, units, seed)
        for mode in config.modes
        for units in config.units_for(mode)
        for seed in config.seeds
    ]
    workers = worker_count(len(cells))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell_packed, cells))
    else:
        rows = [run_cell(*cell) for cell in cells]
    rows.sort(key=lambda r: (r["mode"], r["hidden_units"], r["seed"]))

    os.makedirs(out_dir, exist_ok=True)
    _write_csv(os.path.join(out_dir, "sweep.csv"), rows)
    summary = _summarize(config, rows)
    write_json(os.path.join(out_dir, "summary.json"), summary)
    n_failed = sum(1 for r in rows if r["test_r2"] is None)
    return rows, n_failed


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: str, rows: List[Dict]) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        wall = recorded_wall_time(row["wall_time"]) if row["wall_time"] is not None else None
        values = dict(row, wall_time=wall)
        writer.writerow([_format_cell(values[col]) for col in CSV_COLUMNS])
    _atomic_write_bytes(path, buffer.getvalue().encode("utf-8"))


def _summarize(config: ExperimentConfig, rows: List[Dict]) -> Dict:
    cells = {}
    for row in rows:
        key = (row["mode"], row["hidden_units"])
        cells.setdefault(key, []).append(row)
    summary_cells = []
    for (mode, units), group in sorted(cells.items()):
        scores = [r["test_r2"] for r in group if r["test_r2"] is not None]
        summary_cells.append(
            {
                "mode": mode,
                "hidden_units": units,
                "adjusted_units": _adjusted_units(mode, units),
                "median_test_r2": median(scores) if scores else None,
                "median_optimal_r2": median(r["optimal_r2"] for r in group),
                "seeds": len(group),
                "failed": len(group) - len(scores),
            }
        )
    return {
        "format_version": 1,
        "config": asdict(config),
        "cells": summary_cells,
    }
