"""CSV and JSON export of convergence and drift reports.

Float formatting is fixed (scientific, six significant digits) so that the
CSV output of two identical studies can be compared byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .core import ConfigurationError, ProjSDEError
from .harness import ConvergenceReport, DriftReport

FORMATS = ("csv", "json")


class ReportIOError(ProjSDEError, OSError):
    """Writing or reading a report file failed."""


def _fmt(v: float) -> str:
    return f"{v:.5e}"


def convergence_csv(report: ConvergenceReport) -> str:
    """Render ``method,h,mse_error`` rows followed by ``# order`` lines."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "h", "mse_error"])
    for label in report.methods:
        for h, e in zip(report.h_levels, report.errors[label]):
            w.writerow([label, _fmt(h), _fmt(e)])
    for label in report.methods:
        if label in report.orders:
            order, resid = report.orders[label]
            buf.write(f"# order,{label},{_fmt(order)},{_fmt(resid)}\n")
    return buf.getvalue()


def drift_csv(report: DriftReport) -> str:
    """Render ``step,t,x_1..x_d,inv_err_1..inv_err_l,combined_err`` rows."""
    d = report.states.shape[-1]
    l = report.inv_err.shape[-1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "t"] + [f"x_{i + 1}" for i in range(d)]
               + [f"inv_err_{i + 1}" for i in range(l)] + ["combined_err"])
    combined = report.combined
    for n in range(len(report.times)):
        w.writerow([n, _fmt(report.times[n])]
                   + [_fmt(v) for v in report.states[n]]
                   + [_fmt(v) for v in report.inv_err[n]]
                   + [_fmt(combined[n])])
    return buf.getvalue()


def _to_dict(report) -> dict:
    if isinstance(report, ConvergenceReport):
        return {
            "kind": "convergence",
            "model": report.model,
            "methods": list(report.methods),
            "h_levels": [float(h) for h in report.h_levels],
            "errors": {k: [float(e) for e in v] for k, v in report.errors.items()},
            "orders": {k: [float(o), float(r)] for k, (o, r) in report.orders.items()},
            "metadata": report.metadata,
        }
    if isinstance(report, DriftReport):
        return {
            "kind": "drift",
            "method": report.method,
            "h": float(report.h),
            "labels": list(report.labels),
            "times": report.times.tolist(),
            "states": report.states.tolist(),
            "inv_err": report.inv_err.tolist(),
        }
    raise ConfigurationError(f"cannot export object of type {type(report).__name__}")


def from_dict(data: dict):
    """Rebuild a report from the dictionary stored in a JSON export."""
    kind = data.get("kind")
    if kind == "convergence":
        return ConvergenceReport(
            model=data["model"],
            methods=list(data["methods"]),
            h_levels=list(data["h_levels"]),
            errors={k: list(v) for k, v in data["errors"].items()},
            orders={k: tuple(v) for k, v in data["orders"].items()},
            metadata=dict(data["metadata"]),
        )
    if kind == "drift":
        return DriftReport(
            method=data["method"],
            h=data["h"],
            times=np.asarray(data["times"], dtype=float),
            states=np.asarray(data["states"], dtype=float),
            inv_err=np.asarray(data["inv_err"], dtype=float),
            labels=list(data["labels"]),
        )
    raise ConfigurationError(f"unknown report kind {kind!r}")


def render(report, fmt: str = "csv") -> str:
    if fmt not in FORMATS:
        raise ConfigurationError(f"format must be one of {FORMATS}, got {fmt!r}")
    if fmt == "json":
        return json.dumps(_to_dict(report), indent=2, sort_keys=True) + "\n"
    if isinstance(report, ConvergenceReport):
        return convergence_csv(report)
    if isinstance(report, DriftReport):
        return drift_csv(report)
    raise ConfigurationError(f"cannot export object of type {type(report).__name__}")


def export_report(report, fmt: str = "csv", path=None) -> str:
    """Write ``report`` as CSV or JSON to ``path`` and return the text.

    With ``path=None`` nothing is written.
    """
    text = render(report, fmt)
    if path is not None:
        path = Path(path)
        try:
            path.write_text(text)
        except OSError as exc:
            raise ReportIOError(f"cannot write report to {path}: {exc}") from exc
    return text


def load_report(path):
    """Read a report previously written with ``export_report(..., "json")``."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ReportIOError(f"cannot read report from {path}: {exc}") from exc
    return from_dict(data)
