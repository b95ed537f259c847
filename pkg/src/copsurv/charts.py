"""Residual Shewhart control charts.

Residuals R_t = Y_t - Yhat_t are monitored against a flat band
center +/- k * sigma, with the center at the residual mean and sigma the
sample standard deviation (n-1 denominator).  A point signals only on a
strict exceedance, so a degenerate zero-width band never signals.  The
average run length is estimated empirically as n / #signals and is
undefined (None here, NA in tables) when nothing signals.

The default band is two sigmas wide on each side, which for in-control
Gaussian residuals gives a theoretical ARL of 1/(2*(1-Phi(2))) ~ 21.98.
"""

import csv
from dataclasses import dataclass

import numpy as np

K_SIGMA_DEFAULT = 2.0

CHART_HEADER = ("index", "residual", "center", "lcl", "ucl", "signal")


@dataclass
class ControlChartReport:
    residuals: np.ndarray
    center: float
    sigma: float
    lcl: float
    ucl: float
    k_sigma: float
    signals: np.ndarray
    arl: float = None

    @property
    def n(self):
        return self.residuals.shape[0]

    @property
    def signal_count(self):
        return int(np.count_nonzero(self.signals))


def compute_residuals(actual, predicted):
    """R_t = Y_t - Yhat_t, in input order."""
    actual = np.asarray(actual, dtype=np.float64).reshape(-1)
    predicted = np.asarray(predicted, dtype=np.float64).reshape(-1)
    if actual.shape != predicted.shape:
        raise ValueError("length mismatch: %d actual vs %d predicted"
                         % (actual.shape[0], predicted.shape[0]))
    if actual.shape[0] < 1:
        raise ValueError("need at least one observation")
    return actual - predicted


def shewhart_limits(residuals, k=K_SIGMA_DEFAULT):
    """(lcl, center, ucl) with center = mean and half-width k * sample SD."""
    residuals = np.asarray(residuals, dtype=np.float64).reshape(-1)
    if residuals.shape[0] < 2:
        raise ValueError("need at least two residuals for a sample SD, got %d"
                         % residuals.shape[0])
    center = float(residuals.mean())
    sigma = float(residuals.std(ddof=1))
    return center - k * sigma, center, center + k * sigma


def detect_and_arl(residuals, k=K_SIGMA_DEFAULT):
    """Full chart report: limits, strict-exceedance signals, empirical ARL."""
    residuals = np.asarray(residuals, dtype=np.float64).reshape(-1)
    lcl, center, ucl = shewhart_limits(residuals, k=k)
    sigma = float(residuals.std(ddof=1))
    signals = (residuals > ucl) | (residuals < lcl)
    count = int(np.count_nonzero(signals))
    arl = residuals.shape[0] / count if count else None
    return ControlChartReport(residuals=residuals, center=center, sigma=sigma,
                              lcl=lcl, ucl=ucl, k_sigma=k, signals=signals,
                              arl=arl)


def render_chart(report, csv_path, svg_path=None):
    """Write the chart as CSV (and, if asked, a small standalone SVG)."""
    with open(csv_path, "w", newline="") as fh:
        fh.write(",".join(CHART_HEADER) + "\n")
        for i, r in enumerate(report.residuals):
            fh.write("%d,%s,%s,%s,%s,%d\n" % (
                i + 1, repr(float(r)), repr(report.center),
                repr(report.lcl), repr(report.ucl),
                1 if report.signals[i] else 0,
            ))
    if svg_path is not None:
        _write_svg(report, svg_path)


def read_chart_csv(path, k=K_SIGMA_DEFAULT):
    """Parse a chart CSV back into a report.

    The stored band and signal flags are checked against a recomputation
    from the parsed residuals, so a tampered or truncated file is rejected
    rather than silently re-interpreted.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != CHART_HEADER:
            raise ValueError("unexpected chart header %r" % (list(header),))
        rows = list(reader)
    if len(rows) < 2:
        raise ValueError("chart file %s has %d rows, need at least 2"
                         % (path, len(rows)))
    residuals = np.array([float(r[1]) for r in rows])
    stored_signals = np.array([r[5] == "1" for r in rows])
    report = detect_and_arl(residuals, k=k)
    same_band = (repr(report.center) == rows[0][2]
                 and repr(report.lcl) == rows[0][3]
                 and repr(report.ucl) == rows[0][4])
    if not same_band or not np.array_equal(stored_signals, report.signals):
        raise ValueError("chart file %s is inconsistent with its residuals "
                         "at k=%g" % (path, k))
    return report


def _write_svg(report, path, width=640, height=320, margin=42):
    res = report.residuals
    lo = min(report.lcl, float(res.min()))
    hi = max(report.ucl, float(res.max()))
    span = hi - lo
    if span <= 0:
        span, lo = 1.0, lo - 0.5
    pad = 0.06 * span
    lo, hi = lo - pad, hi + pad
    span = hi - lo

    def sx(i):
        if report.n == 1:
            return width / 2.0
        return margin + (width - 2 * margin) * i / (report.n - 1)

    def sy(v):
        return height - margin - (height - 2 * margin) * (v - lo) / span

    lines = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'viewBox="0 0 %d %d">' % (width, height, width, height),
        '<rect width="%d" height="%d" fill="white"/>' % (width, height),
    ]
    for value, dash, color in ((report.center, "", "#888"),
                               (report.lcl, ' stroke-dasharray="6 4"', "#444"),
                               (report.ucl, ' stroke-dasharray="6 4"', "#444")):
        lines.append('<line x1="%g" y1="%.2f" x2="%g" y2="%.2f" '
                     'stroke="%s"%s/>' % (margin, sy(value), width - margin,
                                          sy(value), color, dash))
    points = " ".join("%.2f,%.2f" % (sx(i), sy(v)) for i, v in enumerate(res))
    lines.append('<polyline points="%s" fill="none" stroke="#1a6" '
                 'stroke-width="1.5"/>' % points)
    for i, v in enumerate(res):
        if report.signals[i]:
            lines.append('<circle cx="%.2f" cy="%.2f" r="4" fill="#c22"/>'
                         % (sx(i), sy(v)))
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
