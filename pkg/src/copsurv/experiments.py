"""Replicate experiments and the model-comparison table.

A comparison runs every requested (architecture, activation) variant over R
replicates.  Replicate r simulates a fresh population with seed ``base+r``,
trains with the same seed, and scores residuals on the held-out tail of the
window sequence (time-ordered split, no shuffling across the boundary).
Because a replicate depends only on its own seed, running replicates in
parallel, in any order, or one at a time in separate processes gives the
same table.

Aggregation across replicates: Mean_Residual and SD_Residual average the
per-replicate residual mean and SD; Mean_ARL and SD_ARL are the mean and
sample SD of the replicates whose ARL is defined, written as NA when none
(or, for the SD, fewer than two) are.
"""

import csv
import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from .charts import K_SIGMA_DEFAULT, detect_and_arl
from .dataio import ComparisonRow
from .model import ARCHITECTURES, VARIANTS, ModelSpec, build_model
from .simulate import SimConfig, make_windows, simulate_dataset
from .training import TrainConfig, train_model

MODEL_LABELS = {"lstm": "LSTM", "cnn-lstm": "CNN-LSTM"}
VARIANT_LABELS = {
    "clayton": "Clayton",
    "gumbel": "Gumbel",
    "clayton-gumbel": "Clayton-Gumbel",
    "relu": "ReLU",
    "clayton-relu": "Clayton-ReLU",
    "sigmoid": "Sigmoid",
}

PREDICTIONS_HEADER = ("index", "response", "actual", "predicted", "delta")


def all_variants():
    """The full grid: 2 architectures x 6 activations."""
    return [(arch, variant) for arch in ARCHITECTURES for variant in VARIANTS]


def variant_label(arch, variant):
    return "%s %s" % (MODEL_LABELS[arch], VARIANT_LABELS[variant])


@dataclass
class ExperimentConfig:
    """Everything a comparison needs: simulation, training, and layout."""

    n: int = 500
    rho: float = 0.9
    k: float = 1.5
    lam: float = 2.0
    noise_sd: float = 0.5
    censor_rate: float = 0.1
    binary_threshold: float = 5.0
    cat_cuts: tuple = (2.0, 5.0)
    seed: int = 0
    replicates: int = 30
    variants: list = None
    timesteps: int = 10
    split: float = 0.8
    epochs: int = 50
    learning_rate: float = 1e-3
    batch_size: int = 32
    optimizer: str = "adam"
    continuous_mode: str = "plain-mse"
    out: str = None

    def __post_init__(self):
        if self.variants is None:
            self.variants = all_variants()
        self.variants = [tuple(v) for v in self.variants]
        if not self.variants:
            raise ValueError("variant list is empty")
        for arch, variant in self.variants:
            if arch not in MODEL_LABELS:
                raise ValueError("unknown architecture %r" % (arch,))
            if variant not in VARIANT_LABELS:
                raise ValueError("unknown activation variant %r" % (variant,))
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1, got %r"
                             % (self.replicates,))
        if not 0.0 < self.split < 1.0:
            raise ValueError("split fraction must lie in (0, 1), got %r"
                             % (self.split,))

    def sim_config(self, replicate):
        return SimConfig(n=self.n, k=self.k, lam=self.lam, rho=self.rho,
                         noise_sd=self.noise_sd, censor_rate=self.censor_rate,
                         binary_threshold=self.binary_threshold,
                         cat_cuts=self.cat_cuts, seed=self.seed + replicate)

    def train_config(self, replicate):
        return TrainConfig(learning_rate=self.learning_rate, epochs=self.epochs,
                           batch_size=self.batch_size, optimizer=self.optimizer,
                           seed=self.seed + replicate,
                           continuous_mode=self.continuous_mode)


def split_after_windowing(X, y, delta, fraction):
    """Time-ordered split: the first ``fraction`` of windows train, the rest
    test.  Both sides need at least two rows (batch norm and sample SDs)."""
    n = X.shape[0]
    n_train = int(fraction * n)
    if n_train < 2 or n - n_train < 2:
        raise ValueError("split %g leaves %d train / %d test windows; "
                         "need at least 2 of each" % (fraction, n_train, n - n_train))
    train = (X[:n_train], y[:n_train], delta[:n_train])
    test = (X[n_train:], y[n_train:], delta[n_train:])
    return train, test


@dataclass
class FitResult:
    model: object
    log: object
    actual: np.ndarray
    predicted: np.ndarray
    delta: np.ndarray


def fit_variant(dataset, arch, variant, timesteps, train_config, split=0.8,
                verbose=False):
    """Window, split, build, train, and predict the held-out tail."""
    X, y, delta = make_windows(dataset, timesteps)
    train, test = split_after_windowing(X, y, delta, split)
    spec = ModelSpec(architecture=arch, variant=variant, timesteps=timesteps,
                     features=X.shape[2])
    model = build_model(spec, np.random.default_rng(train_config.seed))
    log = train_model(model, train[0], train[1], train[2], train_config,
                      verbose=verbose)
    predicted = model.predict(test[0])
    return FitResult(model=model, log=log, actual=test[1], predicted=predicted,
                     delta=test[2])


@dataclass
class ResponseStats:
    mean_residual: float
    sd_residual: float
    arl: float = None


def response_stats(actual, predicted, k=K_SIGMA_DEFAULT):
    """Per-response residual mean/SD and empirical ARL on one test set."""
    stats = []
    for j in range(actual.shape[1]):
        report = detect_and_arl(actual[:, j] - predicted[:, j], k=k)
        stats.append(ResponseStats(mean_residual=report.center,
                                   sd_residual=report.sigma, arl=report.arl))
    return stats


def run_replicate(config, arch, variant, replicate):
    """One (variant, replicate) cell: fresh data, fresh model, test stats."""
    dataset = simulate_dataset(config.sim_config(replicate))
    fit = fit_variant(dataset, arch, variant, config.timesteps,
                      config.train_config(replicate), split=config.split)
    return response_stats(fit.actual, fit.predicted)


def aggregate_rows(label, replicate_stats):
    """Across-replicate aggregation for one variant; see module top."""
    rows = []
    for j in range(len(replicate_stats[0])):
        means = [stats[j].mean_residual for stats in replicate_stats]
        sds = [stats[j].sd_residual for stats in replicate_stats]
        arls = [stats[j].arl for stats in replicate_stats
                if stats[j].arl is not None]
        rows.append(ComparisonRow(
            model=label,
            response="Response_%d" % (j + 1),
            mean_residual=float(np.mean(means)),
            sd_residual=float(np.mean(sds)),
            mean_arl=float(np.mean(arls)) if arls else None,
            sd_arl=float(np.std(arls, ddof=1)) if len(arls) > 1 else None,
        ))
    return rows


def _comparison_task(task):
    config, arch, variant, replicate = task
    return run_replicate(config, arch, variant, replicate)


def run_comparison(config, jobs=1, progress=None):
    """All (variant, replicate) cells, aggregated and sorted (Model, Response).

    ``jobs > 1`` fans the cells out over a process pool; each cell is seeded
    by its replicate index alone, so the table is schedule-independent.
    """
    tasks = [(config, arch, variant, r)
             for arch, variant in config.variants
             for r in range(config.replicates)]
    if jobs > 1:
        with multiprocessing.Pool(processes=jobs) as pool:
            results = []
            for result in pool.imap(_comparison_task, tasks, chunksize=1):
                results.append(result)
                if progress:
                    progress(len(results), len(tasks))
    else:
        results = []
        for task in tasks:
            results.append(_comparison_task(task))
            if progress:
                progress(len(results), len(tasks))

    rows = []
    for i, (arch, variant) in enumerate(config.variants):
        chunk = results[i * config.replicates:(i + 1) * config.replicates]
        rows.extend(aggregate_rows(variant_label(arch, variant), chunk))
    rows.sort(key=lambda row: (row.model, row.response))
    return rows


def write_predictions_csv(actual, predicted, delta, path):
    """Long-format per-sample predictions: one row per (sample, response)."""
    actual = np.asarray(actual, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if actual.shape != predicted.shape or actual.shape != delta.shape:
        raise ValueError("actual/predicted/delta shapes differ: %s %s %s"
                         % (actual.shape, predicted.shape, delta.shape))
    with open(path, "w", newline="") as fh:
        fh.write(",".join(PREDICTIONS_HEADER) + "\n")
        for i in range(actual.shape[0]):
            for j in range(actual.shape[1]):
                fh.write("%d,Response_%d,%s,%s,%d\n" % (
                    i + 1, j + 1,
                    repr(float(actual[i, j])), repr(float(predicted[i, j])),
                    int(delta[i, j]),
                ))


def read_predictions_csv(path):
    """Predictions grouped by response, in file order.

    Returns ``{response: (actual, predicted, delta)}``.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != PREDICTIONS_HEADER:
            raise ValueError("unexpected predictions header %r" % (list(header),))
        rows = list(reader)
    if not rows:
        raise ValueError("predictions file %s has no rows" % (path,))
    grouped = {}
    for i, row in enumerate(rows):
        if len(row) != len(PREDICTIONS_HEADER):
            raise ValueError("row %d has %d fields, expected %d"
                             % (i + 2, len(row), len(PREDICTIONS_HEADER)))
        try:
            entry = (float(row[2]), float(row[3]), float(row[4]))
        except ValueError:
            raise ValueError("row %d of %s is not numeric: %r"
                             % (i + 2, path, row)) from None
        grouped.setdefault(row[1], []).append(entry)
    out = {}
    for response, entries in grouped.items():
        block = np.array(entries, dtype=np.float64)
        out[response] = (block[:, 0], block[:, 1], block[:, 2])
    return out
