"""Deterministic CSV and JSON serialization of results.

Reals are written with 17 significant digits (``%.17g``), enough to
round-trip any double.  Column and key order is fixed, so identical inputs
give identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .model import ThermoState
from .phase import PhaseScanReport

__all__ = [
    "STATE_COLUMNS",
    "HISTOGRAM_COLUMNS",
    "fmt_real",
    "to_json",
    "csv_text",
    "state_columns",
    "states_table",
    "scan_table",
    "state_record",
    "events_record",
    "histogram_table",
    "write_text",
    "render",
    "emit_report",
]

STATE_COLUMNS = ("T", "Q", "f", "S", "mean_m", "C")
HISTOGRAM_COLUMNS = ("bin_lo", "bin_hi", "count", "density")


def fmt_real(value: float) -> str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return "%.17g" % value


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return fmt_real(float(value))
    return str(value)


def _json(value: Any, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if value is None or isinstance(value, (bool, np.bool_)):
        return json.dumps(None if value is None else bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        # JSON has no non-finite numbers
        return fmt_real(v) if math.isfinite(v) else "null"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{json.dumps(str(k))}: {_json(v, indent, level + 1)}" for k, v in value.items()]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        if len(value) == 0:
            return "[]"
        items = [_json(v, indent, level + 1) for v in value]
        return "[" + pad + ("," + pad).join(items) + end + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def to_json(value: Any, indent: int = 2) -> str:
    """JSON text with 17-significant-digit reals; dict order is preserved."""
    return _json(value, indent, 0) + "\n"


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def state_columns(y_names: Sequence[str]) -> list[str]:
    return list(STATE_COLUMNS) + [f"y_{n}" for n in y_names] + ["residual_legendre"]


def _state_row(state: ThermoState, y_names: Sequence[str]) -> list:
    return ([getattr(state, c) for c in STATE_COLUMNS]
            + [state.y.get(n, math.nan) for n in y_names]
            + [state.legendre_residual])


def states_table(states: Sequence[ThermoState], y_names: Sequence[str] = ()) -> str:
    """CSV: T, Q, f, S, mean_m, C, y_<name>..., residual_legendre."""
    return csv_text(state_columns(y_names), (_state_row(s, y_names) for s in states))


def scan_table(report: PhaseScanReport, y_names: Sequence[str] = ()) -> str:
    """Scan grid as CSV: the state columns plus ``status``.

    ``status`` is ``ok``, the state's flags joined by ``+``, or
    ``invalid: <reason>`` for failed points (whose numeric cells are empty).
    """
    cols = state_columns(y_names) + ["status"]
    rows = []
    for p in report.grid:
        if p.valid:
            rows.append(_state_row(p.state, y_names) + ["+".join(p.state.flags) or "ok"])
        else:
            rows.append([p.T] + [None] * (len(cols) - 2) + [f"invalid: {p.failure}"])
    return csv_text(cols, rows)


def state_record(state: ThermoState) -> dict:
    return {"T": state.T, "Q": state.Q, "f": state.f, "S": state.S, "mean_m": state.mean_m,
            "C": state.C, "y": state.y, "residuals": state.residuals, "flags": list(state.flags)}


def events_record(report: PhaseScanReport) -> list[dict]:
    return [{"T": e.T, "kind": e.kind, "magnitude": e.magnitude, "detail": e.detail}
            for e in report.events]


def histogram_table(hist: dict) -> str:
    cols = HISTOGRAM_COLUMNS
    return csv_text(cols, zip(*(hist[c] for c in cols)))


def write_text(text: str, path: str | Path | None) -> None:
    """Write to ``path``, or to stdout when path is None or ``-``."""
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    Path(path).write_text(text, encoding="utf-8")


def render(result: Any, fmt: str = "csv", y_names: Sequence[str] = ()) -> str:
    """Serialize a result to CSV or JSON text.

    ``result`` is a sequence of ThermoStates (a grid), a PhaseScanReport
    (CSV gives the grid, JSON the event list) or a histogram dict.  Any other
    JSON-able value is accepted for ``fmt="json"``.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}; expected csv or json")
    if isinstance(result, PhaseScanReport):
        return scan_table(result, y_names) if fmt == "csv" else to_json(events_record(result))
    if isinstance(result, dict) and set(HISTOGRAM_COLUMNS) <= set(result):
        if fmt == "csv":
            return histogram_table(result)
        return to_json({c: result[c] for c in HISTOGRAM_COLUMNS})
    if isinstance(result, (list, tuple)) and result and all(isinstance(s, ThermoState) for s in result):
        return states_table(result, y_names) if fmt == "csv" else to_json([state_record(s) for s in result])
    if fmt == "json":
        return to_json(result)
    raise TypeError(f"no CSV layout for {type(result).__name__}")


def emit_report(result: Any, fmt: str = "csv", path: str | Path | None = None,
                y_names: Sequence[str] = ()) -> None:
    write_text(render(result, fmt, y_names), path)
