"""Result records and their CSV/JSON emission, plus histogram helpers."""

import csv
import io
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, TextIO

import numpy as np

from src import __version__
from src.errors import UsageError

logger = logging.getLogger(__name__)

TOOL_NAME = "parabolic-cf"


@dataclass
class ResultRecord:
    """Run metadata plus named payload rows.

    ``wall_time`` only reaches JSON output, so CSV files of identical runs are
    byte-identical.
    """

    subcommand: str
    parameters: Dict[str, Any]
    columns: List[str]
    rows: List[List[Any]] = field(default_factory=list)
    notes: Dict[str, Any] = field(default_factory=dict)
    wall_time: Optional[float] = None

    def add_row(self, *values: Any) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values for {len(self.columns)} columns")
        self.rows.append(list(values))

    def column(self, name: str) -> List[Any]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]

    def meta(self) -> Dict[str, Any]:
        meta = {
            "tool": TOOL_NAME,
            "version": __version__,
            "subcommand": self.subcommand,
            "parameters": self.parameters,
        }
        if self.notes:
            meta["notes"] = self.notes
        if self.wall_time is not None:
            meta["wall_time"] = self.wall_time
        return meta


def _plain(value: Any) -> Any:
    """Convert numpy scalars, tuples and enums into JSON/CSV friendly values."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if hasattr(value, "value") and hasattr(value, "name"):
        return value.name
    return value


def _cell(value: Any) -> str:
    value = _plain(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ";".join(_cell(v) for v in value)
    if value is None:
        return ""
    return str(value)


def write_csv(record: ResultRecord, stream: TextIO) -> None:
    """Write ``# key=value`` metadata comment lines, a header row and the rows."""
    stream.write(f"# tool={TOOL_NAME}\n")
    stream.write(f"# version={__version__}\n")
    stream.write(f"# subcommand={record.subcommand}\n")
    for key, value in record.parameters.items():
        stream.write(f"# {key}={_cell(value)}\n")
    for key, value in record.notes.items():
        stream.write(f"# {key}={_cell(value)}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(record.columns)
    for row in record.rows:
        writer.writerow([_cell(v) for v in row])


def write_json(record: ResultRecord, stream: TextIO) -> None:
    payload = {
        "meta": {k: _plain(v) if k != "parameters" else {pk: _plain(pv) for pk, pv in v.items()}
                 for k, v in record.meta().items()},
        "columns": record.columns,
        "rows": [[_plain(v) for v in row] for row in record.rows],
    }
    json.dump(payload, stream, indent=4)
    stream.write("\n")


def render_record(record: ResultRecord, fmt: str) -> str:
    buffer = io.StringIO()
    if fmt == "csv":
        write_csv(record, buffer)
    elif fmt == "json":
        write_json(record, buffer)
    else:
        raise UsageError(f"unknown output format {fmt!r}")
    return buffer.getvalue()


def save_record(record: ResultRecord, path: Optional[str], fmt: str = "csv") -> str:
    """Write the record to ``path`` (or return it for stdout when path is None).

    Args:
        record: Result to write
        path: Output file; None means the caller prints the returned text
        fmt: "csv" or "json"

    Returns:
        The rendered text
    """
    text = render_record(record, fmt)
    if path is not None:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", newline="") as f:
            f.write(text)
        logger.info("wrote %d rows to %s", len(record.rows), path)
    return text


def histogram(samples: np.ndarray, bins: int, lo: float, hi: float) -> Dict[str, np.ndarray]:
    """Bin samples on [lo, hi] and return edges, counts and masses."""
    counts, edges = np.histogram(samples, bins=bins, range=(lo, hi))
    return {
        "bin_lo": edges[:-1],
        "bin_hi": edges[1:],
        "count": counts,
        "mass": counts / max(1, len(samples)),
    }


def max_window_mass(samples: np.ndarray, width: float) -> float:
    """Return the largest empirical mass of a closed window [x, x + width].

    Windows start at sample points, which is where the maximum is attained.
    """
    ordered = np.sort(np.asarray(samples, dtype=float))
    if ordered.size == 0:
        return 0.0
    ends = np.searchsorted(ordered, ordered + width, side="right")
    return float(np.max(ends - np.arange(ordered.size))) / ordered.size


def ecdf(samples: np.ndarray, points: Sequence[float]) -> np.ndarray:
    """Empirical c.d.f. of the samples at the given points."""
    ordered = np.sort(np.asarray(samples, dtype=float))
    return np.searchsorted(ordered, np.asarray(points, dtype=float), side="right") / ordered.size
