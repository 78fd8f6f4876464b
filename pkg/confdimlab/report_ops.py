from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .scaling_ops import ScalingFit  # noqa: E402
from .singularity_ops import ConcentrationReport, ProductSingularityReport  # noqa: E402

SCHEMA_VERSION = "v1"

PathLike = Union[str, Path]


def _plain(value: Any) -> Any:
    """Convert numpy scalars, arrays and fractions to JSON types."""
    if isinstance(value, np.ndarray):
        return [_plain(item) for item in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        number = float(value)
        return number if math.isfinite(number) else str(number)
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, Mapping):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


def envelope(
    command: str,
    config: Mapping[str, Any],
    result: Any,
    version: str,
    partial: bool = False,
) -> Dict[str, Any]:
    """Wrap a result with the schema tag, the tool version and the resolved config."""
    return {
        "schema": SCHEMA_VERSION,
        "version": version,
        "command": command,
        "config": _plain(dict(config)),
        "partial": partial,
        "result": _plain(result),
    }


def to_json(payload: Any) -> str:
    """Serialize with sorted keys so equal payloads give identical text."""
    return json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n"


def write_json(path: PathLike, payload: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(payload), encoding="utf-8")


def to_csv(rows: Sequence[Mapping[str, Any]], columns: Optional[Sequence[str]] = None) -> str:
    """Render rows as CSV text; the columns default to the keys of the first row."""
    if columns is None:
        columns = list(rows[0].keys()) if rows else []

    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _csv_cell(row.get(key)) for key in columns})
    return buffer.getvalue()


def _csv_cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return _plain(value)


def write_csv(
    path: PathLike, rows: Sequence[Mapping[str, Any]], columns: Optional[Sequence[str]] = None
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_csv(rows, columns), encoding="utf-8")


def error_record(err: BaseException) -> Dict[str, Any]:
    """The structured form of an error printed on the error stream."""
    return {"schema": SCHEMA_VERSION, "error": type(err).__name__, "message": str(err)}


## PLOTS
def _save_svg(figure: Any, path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "confdimlab", "svg.fonttype": "none"}):
        figure.savefig(path, format="svg", metadata={"Date": None})
    plt.close(figure)


def write_loglog_svg(path: PathLike, fits: Iterable[ScalingFit]) -> None:
    """Plot ``Mod_p`` against ``eps / r`` on log-log axes, one series per exponent."""
    figure, axes = plt.subplots(figsize=(6, 4.5))
    for fit in fits:
        x = [sample.eps_over_r for sample in fit.samples]
        y = [sample.modulus for sample in fit.samples]
        axes.loglog(x, y, marker="o", label=f"p = {fit.p:g} (slope {fit.slope:.3f})")
    axes.set_xlabel("eps / r")
    axes.set_ylabel("annulus modulus")
    axes.legend()
    axes.grid(True, which="both", alpha=0.3)
    _save_svg(figure, path)


def write_tv_svg(
    path: PathLike, report: Union[ConcentrationReport, ProductSingularityReport]
) -> None:
    """Plot the total variation distances of a concentration or product report by level."""
    figure, axes = plt.subplots(figsize=(6, 4.5))
    if isinstance(report, ConcentrationReport):
        levels: List[int] = [row.level for row in report.statistic_per_level]
        axes.plot(levels, [row.tv_distance for row in report.statistic_per_level], marker="o", label=report.spec)
    else:
        levels = [row.level for row in report.rows]
        axes.plot(levels, [row.mutual_tv for row in report.rows], marker="o", label="mutual")
        axes.plot(levels, [row.tv_lambda_x for row in report.rows], marker="s", label="Lambda_X x mu_Y")
        axes.plot(levels, [row.tv_lambda_y for row in report.rows], marker="^", label="mu_X x Lambda_Y")
    axes.set_xlabel("level")
    axes.set_ylabel("total variation distance")
    axes.set_ylim(0.0, 1.0)
    axes.legend()
    _save_svg(figure, path)
