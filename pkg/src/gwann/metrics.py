"""Error metrics for recovered release histories and predicted concentrations.

All percentage metrics return values in percent (not fractions).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


class MetricError(ValueError):
    """Raised when a metric is undefined for its input (zero denominator, bad shape)."""


def _pair(actual, estimated) -> tuple[np.ndarray, np.ndarray]:
    z = np.asarray(actual, dtype=float).ravel()
    zh = np.asarray(estimated, dtype=float).ravel()
    if z.shape != zh.shape:
        raise MetricError(f"length mismatch: {z.size} actual vs {zh.size} estimated")
    if z.size == 0:
        raise MetricError("empty input")
    return z, zh


def ne(actual, estimated) -> float:
    """Normalized error: total absolute error over total actual value, in percent."""
    z, zh = _pair(actual, estimated)
    total = z.sum()
    if total == 0:
        raise MetricError("NE undefined: actual values sum to zero")
    return float(np.abs(zh - z).sum() / total * 100.0)


def paee(actual: float, estimated: float) -> float:
    """Percent absolute estimation error of a single unknown."""
    if actual == 0:
        raise MetricError("PAEE undefined for a zero actual value")
    return float(abs(estimated - actual) / abs(actual) * 100.0)


def sd_t(realizations) -> np.ndarray:
    """Per-column sample standard deviation over ensemble realizations (rows)."""
    r = np.atleast_2d(np.asarray(realizations, dtype=float))
    if r.shape[0] < 2:
        raise MetricError("SD_t needs at least two realizations")
    return r.std(axis=0, ddof=1)


def me(actual, estimated) -> float:
    z, zh = _pair(actual, estimated)
    return float(np.mean(zh - z))


def mae(actual, estimated) -> float:
    z, zh = _pair(actual, estimated)
    return float(np.mean(np.abs(zh - z)))


def rmse(actual, estimated) -> float:
    z, zh = _pair(actual, estimated)
    return float(np.sqrt(np.mean((zh - z) ** 2)))


def nrmse(actual, estimated) -> float:
    """RMSE normalized by the range of the actual values, in percent."""
    z, zh = _pair(actual, estimated)
    span = z.max() - z.min()
    if span <= 0:
        raise MetricError("NRMSE undefined: actual values have zero range")
    return float(rmse(z, zh) / span * 100.0)


@dataclass
class MetricReport:
    """Metric suite for one actual/estimated pair of vectors.

    ``paee_percent`` and ``sd_t`` are per unknown; ``ne_groups`` holds NE
    computed over caller-chosen groups (e.g. one per source).
    """

    labels: list[str]
    actual: np.ndarray
    estimated: np.ndarray
    ne_percent: float
    paee_percent: np.ndarray | None
    me: float
    mae: float
    rmse: float
    nrmse_percent: float | None
    sd_t: np.ndarray | None = None
    ne_groups: dict[str, float] = field(default_factory=dict)
    units: str = ""

    def summary(self) -> dict[str, float | None]:
        return {
            "NE_percent": self.ne_percent,
            "ME": self.me,
            "MAE": self.mae,
            "RMSE": self.rmse,
            "NRMSE_percent": self.nrmse_percent,
        }

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "actual": self.actual.tolist(),
            "estimated": self.estimated.tolist(),
            "paee_percent": None if self.paee_percent is None else self.paee_percent.tolist(),
            "sd_t": None if self.sd_t is None else self.sd_t.tolist(),
            "ne_groups": dict(self.ne_groups),
            "units": self.units,
            **self.summary(),
        }


def metric_report(
    actual,
    estimated,
    labels=None,
    realizations=None,
    groups: dict[str, list[int]] | None = None,
    units: str = "",
) -> MetricReport:
    """Compute every metric for ``estimated`` against ``actual``.

    PAEE is reported only when all actual values are non-zero, NRMSE only
    when the actual values have a positive range; otherwise they are None.
    """
    z, zh = _pair(actual, estimated)
    labels = list(labels) if labels is not None else [f"z{i + 1}" for i in range(z.size)]
    paee_vals = np.array([paee(a, b) for a, b in zip(z, zh)]) if np.all(z != 0) else None
    span_ok = z.max() > z.min()
    ne_val = ne(z, zh) if z.sum() != 0 else float("nan")
    groups = groups or {}
    return MetricReport(
        labels=labels,
        actual=z,
        estimated=zh,
        ne_percent=ne_val,
        paee_percent=paee_vals,
        me=me(z, zh),
        mae=mae(z, zh),
        rmse=rmse(z, zh),
        nrmse_percent=nrmse(z, zh) if span_ok else None,
        sd_t=None if realizations is None else sd_t(realizations),
        ne_groups={name: ne(z[idx], zh[idx]) for name, idx in groups.items()},
        units=units,
    )


def _fmt(v, digits=4) -> str:
    if v is None:
        return "-"
    if isinstance(v, float) and np.isnan(v):
        return "nan"
    return f"{v:.{digits}f}"


def render_table(report: MetricReport, title: str = "") -> str:
    """Aligned text table: one row per unknown, then the summary metrics."""
    header = ["unknown", "actual", "estimated", "PAEE(%)", "SD_t"]
    rows = []
    for i, lab in enumerate(report.labels):
        rows.append(
            [
                lab,
                _fmt(report.actual[i]),
                _fmt(report.estimated[i]),
                _fmt(None if report.paee_percent is None else report.paee_percent[i], 2),
                _fmt(None if report.sd_t is None else report.sd_t[i]),
            ]
        )
    widths = [max(len(r[k]) for r in [header] + rows) for k in range(len(header))]
    line = lambda r: "  ".join(c.rjust(w) if k else c.ljust(w) for k, (c, w) in enumerate(zip(r, widths)))
    out = []
    if title:
        out.append(title)
    unit = f" [{report.units}]" if report.units else ""
    out.append(line(header) + unit)
    out.append("-" * len(line(header)))
    out.extend(line(r) for r in rows)
    out.append("")
    for name, val in report.ne_groups.items():
        out.append(f"NE {name} (%): {_fmt(val, 2)}")
    for key, val in report.summary().items():
        out.append(f"{key}: {_fmt(val)}")
    return "\n".join(out) + "\n"


def render_csv(report: MetricReport) -> str:
    """Machine-readable metrics: a per-unknown block then ``metric,value`` rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["unknown", "actual", "estimated", "paee_percent", "sd_t"])
    for i, lab in enumerate(report.labels):
        w.writerow(
            [
                lab,
                repr(float(report.actual[i])),
                repr(float(report.estimated[i])),
                "" if report.paee_percent is None else repr(float(report.paee_percent[i])),
                "" if report.sd_t is None else repr(float(report.sd_t[i])),
            ]
        )
    w.writerow([])
    w.writerow(["metric", "value"])
    for name, val in report.ne_groups.items():
        w.writerow([f"NE_{name}_percent", repr(float(val))])
    for key, val in report.summary().items():
        w.writerow([key, "" if val is None else repr(float(val))])
    return buf.getvalue()
