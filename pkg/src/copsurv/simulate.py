"""Synthetic multivariate right-censored survival data.

Each subject carries three positively dependent event times: a Weibull
baseline T1 and two mixtures T_j = rho*T1 + (1-rho)*(W_j + N_j) that share
the baseline, j = 2, 3.  Exponential censoring is applied independently per
response; the second observed time is binarized and the third cut into
ordered categories (Low / Medium / High, right-closed cuts).

Randomness is counter-based: a Philox stream keyed by the config seed, with
a frozen budget of eight uniform doubles per subject in the order

    (T1, W2, N2, W3, N3, C1, C2, C3).

Philox's ``advance`` moves one 128-bit block -- four doubles -- per step, so
a subject row spans exactly two blocks and any contiguous chunk of subjects
can be generated in isolation: concatenating chunks reproduces the
sequential stream bit for bit.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

Y3_LABELS = ("Low", "Medium", "High")

DATASET_HEADER = (
    "id", "T1_obs", "delta1", "T2_obs", "delta2", "Y2",
    "T3_obs", "delta3", "Y3", "Y3_code",
)

_DRAWS_PER_SUBJECT = 8
_BLOCKS_PER_SUBJECT = 2

# the mixture rho*T1 + (1-rho)*(W+N) can dip below zero through the normal
# noise (about 1.2e-4 of subjects at the defaults); clamp to keep every
# event time strictly positive
_TIME_FLOOR = 1e-9

# guard against an exact-zero uniform before log / normal-quantile transforms
_U_FLOOR = 1e-300


@dataclass
class SimConfig:
    """Generation parameters for one synthetic population."""

    n: int
    k: float = 1.5
    lam: float = 2.0
    rho: float = 0.9
    noise_sd: float = 0.5
    censor_rate: float = 0.1
    binary_threshold: float = 5.0
    cat_cuts: tuple = (2.0, 5.0)
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer, got %r" % (self.n,))
        self.n = int(self.n)
        if self.k <= 0:
            raise ValueError("Weibull shape k must be positive, got %r" % (self.k,))
        if self.lam <= 0:
            raise ValueError("Weibull scale must be positive, got %r" % (self.lam,))
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1], got %r" % (self.rho,))
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative, got %r" % (self.noise_sd,))
        if self.censor_rate <= 0:
            raise ValueError("censor_rate must be positive, got %r" % (self.censor_rate,))
        cuts = tuple(float(c) for c in self.cat_cuts)
        if len(cuts) != len(Y3_LABELS) - 1:
            raise ValueError("expected %d category cuts, got %d"
                             % (len(Y3_LABELS) - 1, len(cuts)))
        if cuts[0] <= 0 or not all(a < b for a, b in zip(cuts, cuts[1:])):
            raise ValueError("cat_cuts must be positive and strictly increasing, "
                             "got %r" % (self.cat_cuts,))
        self.cat_cuts = cuts
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be a nonnegative integer, got %r" % (self.seed,))
        self.seed = int(self.seed)


def draw_matrix(seed, start, count):
    """Uniform draws for subjects ``start .. start+count-1``.

    Returns a ``(count, 8)`` array; row layout is the frozen per-subject
    order documented at module top.  ``draw_matrix(s, a, b)`` equals rows
    ``a:a+b`` of ``draw_matrix(s, 0, n)`` exactly, which is what makes
    chunked generation equivalent to sequential generation.
    """
    bits = np.random.Philox(key=seed)
    bits.advance(_BLOCKS_PER_SUBJECT * start)
    return np.random.Generator(bits).random((count, _DRAWS_PER_SUBJECT))


def weibull_from_uniform(k, lam, u):
    """Inverse transform T = lam * (-ln U)^(1/k)."""
    if k <= 0 or lam <= 0:
        raise ValueError("Weibull parameters must be positive, got k=%r lam=%r"
                         % (k, lam))
    u = np.maximum(np.asarray(u, dtype=np.float64), _U_FLOOR)
    return lam * (-np.log(u)) ** (1.0 / k)


def sample_weibull(k, lam, rng, size=None):
    """Weibull(k, lam) draws via the inverse transform on ``rng`` uniforms."""
    return weibull_from_uniform(k, lam, rng.random(size))


def mix_with_baseline(t1, w, noise, rho):
    """Dependent time rho*T1 + (1-rho)*(W + N), floored to stay positive."""
    raw = rho * np.asarray(t1, float) + (1.0 - rho) * (np.asarray(w, float)
                                                       + np.asarray(noise, float))
    return np.maximum(raw, _TIME_FLOOR)


def _marginals_from_draws(cfg, draws):
    u = np.maximum(draws, _U_FLOOR)
    t1 = weibull_from_uniform(cfg.k, cfg.lam, u[:, 0])
    w2 = weibull_from_uniform(cfg.k, cfg.lam, u[:, 1])
    n2 = cfg.noise_sd * ndtri(u[:, 2])
    w3 = weibull_from_uniform(cfg.k, cfg.lam, u[:, 3])
    n3 = cfg.noise_sd * ndtri(u[:, 4])
    t2 = mix_with_baseline(t1, w2, n2, cfg.rho)
    t3 = mix_with_baseline(t1, w3, n3, cfg.rho)
    return np.column_stack([t1, t2, t3])


def generate_marginals(cfg, draws=None):
    """True event-time triples, shape ``(n, 3)``."""
    if draws is None:
        draws = draw_matrix(cfg.seed, 0, cfg.n)
    return _marginals_from_draws(cfg, draws)


def apply_censoring(times, cfg, draws=None):
    """Exponential censoring per (subject, response).

    Returns ``(observed, delta, censor)`` where observed = min(T, C) and
    delta = 1 exactly when T <= C (a tie counts as an event).
    """
    times = np.asarray(times, dtype=np.float64)
    if np.any(times <= 0):
        raise ValueError("event times must be positive")
    if draws is None:
        draws = draw_matrix(cfg.seed, 0, cfg.n)
    u = np.maximum(draws[:, 5:8], _U_FLOOR)
    censor = -np.log(u) / cfg.censor_rate
    observed = np.minimum(times, censor)
    delta = (times <= censor).astype(np.float64)
    return observed, delta, censor


def transform_labels(observed, cfg):
    """Binary and ordinal labels from the censored responses.

    Y2 = 1 exactly when the second observed time exceeds the threshold
    (strict).  Y3 bins the third observed time with right-closed cuts:
    (0, c1] -> 0, (c1, c2] -> 1, (c2, inf) -> 2.
    """
    observed = np.asarray(observed, dtype=np.float64)
    if np.any(observed <= 0):
        raise ValueError("observed times must be positive")
    y2 = (observed[:, 1] > cfg.binary_threshold).astype(np.int64)
    y3_code = np.digitize(observed[:, 2], cfg.cat_cuts, right=True).astype(np.int64)
    return y2, y3_code


@dataclass
class SurvivalDataset:
    """One simulated population (or its observed part, when read from disk)."""

    observed: np.ndarray      # (n, 3) censored times
    delta: np.ndarray         # (n, 3) event indicators
    y2: np.ndarray            # (n,) binary labels
    y3_code: np.ndarray       # (n,) ordinal codes 0/1/2
    times: np.ndarray = None  # (n, 3) true event times; None for disk data
    censor: np.ndarray = None
    config: SimConfig = None

    @property
    def n(self):
        return self.observed.shape[0]

    def y3_labels(self):
        return np.array([Y3_LABELS[c] for c in self.y3_code])

    def triple(self):
        """The (T1_obs, Y2, Y3 code) columns the sequence models consume."""
        return np.column_stack([
            self.observed[:, 0],
            self.y2.astype(np.float64),
            self.y3_code.astype(np.float64),
        ])


def simulate_chunk(cfg, start, count):
    """Subjects ``start .. start+count-1`` of the configured population.

    Identical to the same rows of ``simulate_dataset(cfg)``.
    """
    if start < 0 or count < 1 or start + count > cfg.n:
        raise ValueError("chunk [%d, %d) outside population of %d"
                         % (start, start + count, cfg.n))
    draws = draw_matrix(cfg.seed, start, count)
    times = _marginals_from_draws(cfg, draws)
    observed, delta, censor = apply_censoring(times, cfg, draws=draws)
    y2, y3_code = transform_labels(observed, cfg)
    return SurvivalDataset(observed=observed, delta=delta, y2=y2,
                           y3_code=y3_code, times=times, censor=censor,
                           config=cfg)


def simulate_dataset(cfg):
    """The full population for ``cfg``: same seed, same bits, every time."""
    return simulate_chunk(cfg, 0, cfg.n)


def write_dataset_csv(dataset, path):
    """Write the observed part of a dataset; floats use shortest-repr form."""
    labels = dataset.y3_labels()
    with open(path, "w", newline="") as fh:
        fh.write(",".join(DATASET_HEADER) + "\n")
        for i in range(dataset.n):
            fh.write("%d,%s,%d,%s,%d,%d,%s,%d,%s,%d\n" % (
                i + 1,
                repr(float(dataset.observed[i, 0])), int(dataset.delta[i, 0]),
                repr(float(dataset.observed[i, 1])), int(dataset.delta[i, 1]),
                int(dataset.y2[i]),
                repr(float(dataset.observed[i, 2])), int(dataset.delta[i, 2]),
                labels[i], int(dataset.y3_code[i]),
            ))


def read_dataset_csv(path):
    """Read a dataset CSV back; true times and censor times are not on disk."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != DATASET_HEADER:
            raise ValueError("unexpected dataset header %r" % (list(header),))
        rows = list(reader)
    if not rows:
        raise ValueError("dataset file %s has no rows" % (path,))
    observed = np.empty((len(rows), 3))
    delta = np.empty((len(rows), 3))
    y2 = np.empty(len(rows), dtype=np.int64)
    y3_code = np.empty(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        if len(row) != len(DATASET_HEADER):
            raise ValueError("row %d has %d fields, expected %d"
                             % (i + 2, len(row), len(DATASET_HEADER)))
        observed[i] = [float(row[1]), float(row[3]), float(row[6])]
        delta[i] = [float(row[2]), float(row[4]), float(row[7])]
        y2[i] = int(row[5])
        y3_code[i] = int(row[9])
        if not 0 <= y3_code[i] < len(Y3_LABELS):
            raise ValueError("row %d: unknown ordinal code %r" % (i + 2, row[9]))
        if row[8] != Y3_LABELS[y3_code[i]]:
            raise ValueError("row %d: label %r does not match code %d"
                             % (i + 2, row[8], y3_code[i]))
    return SurvivalDataset(observed=observed, delta=delta, y2=y2, y3_code=y3_code)


def make_windows(dataset, timesteps, standardize=True):
    """Sliding supervised pairs over the response triple.

    ``X[i]`` holds ``timesteps`` consecutive rows of the (optionally
    standardized) triple; ``y[i]`` is the raw row immediately after, with
    its censoring indicators in ``delta[i]``.  Yields ``n - timesteps``
    windows.
    """
    if timesteps < 1:
        raise ValueError("timesteps must be at least 1, got %r" % (timesteps,))
    n = dataset.n
    if n <= timesteps:
        raise ValueError("need more subjects than timesteps: n=%d, timesteps=%d"
                         % (n, timesteps))
    triple = dataset.triple()
    source = triple
    if standardize:
        mu = source.mean(axis=0)
        sd = source.std(axis=0, ddof=1)
        sd = np.where(sd > 0, sd, 1.0)
        source = (source - mu) / sd
    X = np.stack([source[t - timesteps:t] for t in range(timesteps, n)])
    y = triple[timesteps:].copy()
    delta = dataset.delta[timesteps:].copy()
    return X, y, delta
