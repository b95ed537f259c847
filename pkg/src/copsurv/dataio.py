"""Clinical CSV ingestion and the comparison-table format.

The loader targets METABRIC-style exports: columns are renamed to a fixed
internal vocabulary, event/receptor status strings are encoded 0/1, rows
with any missing value are dropped, and whatever extra numeric columns the
file carries (gene expressions, say) ride along as features.  Non-numeric
extras such as patient identifiers are ignored.

Event status accepts either spelling convention -- Dead/Deceased vs
Alive/Living -- as well as literal 0/1, and the summary reports the
observed event rate instead of assuming one encoding.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

DEFAULT_COLUMN_MAP = {
    "overall_survival_months": "survival_time",
    "overall_survival": "event_status",
    "age_at_diagnosis": "age",
    "tumor_stage": "tumor_stage",
    "er_status": "er_status",
    "her2_status": "her2_status",
}

EVENT_LABELS = {"dead": 1.0, "deceased": 1.0, "alive": 0.0, "living": 0.0}
STATUS_LABELS = {"negative": 0.0, "positive": 1.0}

BASE_FEATURES = ("age", "tumor_stage", "er_status", "her2_status")

COMPARISON_HEADER = ("Model", "Response", "Mean_Residual", "SD_Residual",
                     "Mean_ARL", "SD_ARL")


@dataclass
class ClinicalData:
    """Cleaned records: targets plus a numeric feature matrix."""

    survival_time: np.ndarray   # (n,)
    event_status: np.ndarray    # (n,) in {0, 1}
    features: np.ndarray        # (n, d)
    feature_names: list

    @property
    def n(self):
        return self.survival_time.shape[0]


def _encode_labels(series, mapping, column):
    out = np.empty(len(series), dtype=np.float64)
    for i, value in enumerate(series):
        if pd.isna(value):
            out[i] = np.nan
            continue
        if isinstance(value, str):
            key = value.strip().casefold()
            if key in mapping:
                out[i] = mapping[key]
                continue
            try:
                number = float(value)
            except ValueError:
                raise ValueError("unrecognized %s label %r" % (column, value)) from None
        else:
            number = float(value)
        if number not in (0.0, 1.0):
            raise ValueError("unrecognized %s label %r" % (column, value))
        out[i] = number
    return out


def _numeric(series, column):
    try:
        return pd.to_numeric(series, errors="raise").astype(np.float64).to_numpy()
    except (ValueError, TypeError) as exc:
        raise ValueError("column %r is not numeric: %s" % (column, exc)) from None


def load_clinical_csv(path, column_map=None):
    """Load, rename, encode, and drop-missing.  Returns (data, summary).

    ``column_map`` maps source column names to the internal ones; a file
    already using the internal names loads unchanged, so re-ingesting
    cleaned output is a no-op at the record level.
    """
    frame = pd.read_csv(path)
    column_map = dict(DEFAULT_COLUMN_MAP if column_map is None else column_map)
    renames, missing = {}, []
    for source, target in column_map.items():
        if source in frame.columns:
            renames[source] = target
        elif target not in frame.columns:
            missing.append(source)
    if missing:
        raise ValueError("missing mapped column(s): %s" % ", ".join(sorted(missing)))
    frame = frame.rename(columns=renames)

    columns = {
        "survival_time": _numeric(frame["survival_time"], "survival_time"),
        "event_status": _encode_labels(frame["event_status"], EVENT_LABELS,
                                       "event_status"),
        "age": _numeric(frame["age"], "age"),
        "tumor_stage": _numeric(frame["tumor_stage"], "tumor_stage"),
        "er_status": _encode_labels(frame["er_status"], STATUS_LABELS, "er_status"),
        "her2_status": _encode_labels(frame["her2_status"], STATUS_LABELS,
                                      "her2_status"),
    }
    extras = []
    known = set(columns)
    for name in frame.columns:
        if name in known:
            continue
        try:
            values = pd.to_numeric(frame[name], errors="raise")
        except (ValueError, TypeError):
            continue   # identifiers and other text columns are not features
        extras.append(name)
        columns[name] = values.astype(np.float64).to_numpy()

    feature_names = list(BASE_FEATURES) + extras
    stacked = np.column_stack([columns["survival_time"], columns["event_status"]]
                              + [columns[name] for name in feature_names])
    keep = ~np.isnan(stacked).any(axis=1)
    stacked = stacked[keep]

    data = ClinicalData(
        survival_time=stacked[:, 0].copy(),
        event_status=stacked[:, 1].copy(),
        features=stacked[:, 2:].copy(),
        feature_names=feature_names,
    )
    return data, summarize_clinical(data)


def summarize_clinical(data):
    """Per-column means/SDs, tumor-stage counts, and the event rate."""
    summary = {
        "n": data.n,
        "event_rate": float(data.event_status.mean()) if data.n else float("nan"),
        "columns": {},
        "tumor_stage_counts": {},
    }
    names = ["survival_time"] + list(data.feature_names)
    values = [data.survival_time] + [data.features[:, j]
                                     for j in range(len(data.feature_names))]
    for name, column in zip(names, values):
        summary["columns"][name] = {
            "mean": float(column.mean()),
            "sd": float(column.std(ddof=1)) if data.n > 1 else float("nan"),
        }
    if "tumor_stage" in data.feature_names:
        stage = data.features[:, data.feature_names.index("tumor_stage")]
        labels, counts = np.unique(stage, return_counts=True)
        summary["tumor_stage_counts"] = {
            int(lab): int(cnt) for lab, cnt in zip(labels, counts)
        }
    return summary


def standardize_features(features):
    """Column-wise (x - mean) / sd with the n-1 denominator.

    Returns ``(standardized, means, sds)``; constant columns are the
    caller's problem (``preprocess`` drops them first).
    """
    features = np.asarray(features, dtype=np.float64)
    means = features.mean(axis=0)
    sds = features.std(axis=0, ddof=1)
    return (features - means) / sds, means, sds


def preprocess(data, timesteps=10):
    """Model-ready tensors: X of shape (n, T, d), y of shape (n, 2).

    Features are standardized then replicated across the ``timesteps``
    axis; targets are (survival_time, event_status) on the raw scale.
    Zero-variance features cannot be standardized and are dropped with a
    warning.
    """
    if timesteps < 1:
        raise ValueError("timesteps must be at least 1, got %r" % (timesteps,))
    if data.n < 2:
        raise ValueError("need at least two records, got %d" % data.n)
    features, names = data.features, list(data.feature_names)
    sds = features.std(axis=0, ddof=1)
    degenerate = np.nonzero(sds == 0.0)[0]
    if degenerate.size:
        dropped = [names[j] for j in degenerate]
        warnings.warn("dropping zero-variance feature(s): %s" % ", ".join(dropped))
        keepers = [j for j in range(features.shape[1]) if j not in set(degenerate)]
        features = features[:, keepers]
        names = [names[j] for j in keepers]
    if features.shape[1] == 0:
        raise ValueError("no usable features: every column has zero variance")
    standardized, _, _ = standardize_features(features)
    X = np.repeat(standardized[:, None, :], timesteps, axis=1)
    y = np.column_stack([data.survival_time, data.event_status])
    return X, y


@dataclass
class ComparisonRow:
    """One line of the model-comparison table."""

    model: str
    response: str
    mean_residual: float
    sd_residual: float
    mean_arl: float = None
    sd_arl: float = None


def _format_cell(value):
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return "NA"
    return "%.4f" % value


def _parse_cell(text):
    return None if text == "NA" else float(text)


def write_table_csv(rows, path):
    """Comparison table with the fixed six-column header; reals get four
    decimal places and undefined entries are spelled NA."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(COMPARISON_HEADER) + "\n")
        for row in rows:
            fh.write("%s,%s,%s,%s,%s,%s\n" % (
                row.model, row.response,
                _format_cell(row.mean_residual), _format_cell(row.sd_residual),
                _format_cell(row.mean_arl), _format_cell(row.sd_arl),
            ))


def read_table_csv(path):
    with open(path, newline="") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or tuple(lines[0].split(",")) != COMPARISON_HEADER:
        raise ValueError("unexpected comparison header in %s" % (path,))
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != len(COMPARISON_HEADER):
            raise ValueError("row %d has %d fields, expected %d"
                             % (i, len(fields), len(COMPARISON_HEADER)))
        rows.append(ComparisonRow(
            model=fields[0], response=fields[1],
            mean_residual=_parse_cell(fields[2]),
            sd_residual=_parse_cell(fields[3]),
            mean_arl=_parse_cell(fields[4]),
            sd_arl=_parse_cell(fields[5]),
        ))
    return rows
