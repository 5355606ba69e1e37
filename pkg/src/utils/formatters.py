"""Formatting utilities for terminal summaries of run results."""

import math
from typing import Any, Dict, List, Sequence

from src.utils.record_utils import ResultRecord

SEPARATOR = "-" * 52
MAX_TABLE_ROWS = 40


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.10g}"
    if value is None:
        return "-"
    if hasattr(value, "name") and hasattr(value, "value"):
        return value.name
    return str(value)


def format_table(columns: Sequence[str], rows: Sequence[Sequence[Any]], width: int = 14) -> str:
    """Format rows as a fixed-width table with separator lines.

    Args:
        columns: Column names
        rows: Row values, one list per row
        width: Column width

    Returns:
        Formatted table; long tables are cut with an ellipsis row
    """
    pattern = " ".join(["{:>%d}" % width] * len(columns))
    separator = "-" * max(len(SEPARATOR), (width + 1) * len(columns) - 1)
    output = [separator, pattern.format(*columns), separator]
    shown = rows if len(rows) <= MAX_TABLE_ROWS else list(rows[: MAX_TABLE_ROWS // 2]) + [None] + list(rows[-MAX_TABLE_ROWS // 2 :])
    for row in shown:
        if row is None:
            output.append(pattern.format(*["..."] * len(columns)))
        else:
            output.append(pattern.format(*[_fmt(v) for v in row]))
    output.append(separator)
    return "\n".join(output)


def format_record_summary(record: ResultRecord) -> str:
    """Format a result record: title, notes and its rows."""
    output = [f"\n{record.subcommand} results:"]
    for key, value in record.notes.items():
        output.append("{:<25} {}".format(key, _fmt(value)))
    output.append(format_table(record.columns, record.rows))
    output.append(f"Rows: {len(record.rows)}")
    if record.wall_time is not None:
        output.append(f"Wall time: {record.wall_time:.2f}s")
    return "\n".join(output)


def format_certificate(certificate: Dict[str, Any]) -> str:
    """Format an alpha_c certificate.

    Args:
        certificate: Dictionary with the certified endpoints, depth and brackets

    Returns:
        Formatted string containing the certificate
    """
    output = ["\nCritical Parameter Certificate:"]
    output.append(SEPARATOR)
    output.append("{:<25} {:>12} {:>12}".format("", "Lower end", "Upper end"))
    output.append(SEPARATOR)
    output.append("{:<25} {:>12} {:>12}".format("alpha", _fmt(certificate["alpha_lo"]), _fmt(certificate["alpha_hi"])))
    lo_bracket = certificate.get("bracket_lo") or (None, None)
    hi_bracket = certificate.get("bracket_hi") or (None, None)
    output.append("{:<25} {:>12} {:>12}".format("lambda lower", _fmt(lo_bracket[0]), _fmt(hi_bracket[0])))
    output.append("{:<25} {:>12} {:>12}".format("lambda upper", _fmt(lo_bracket[1]), _fmt(hi_bracket[1])))
    output.append(SEPARATOR)
    output.append(f"Depth used: {certificate['depth_used']}")
    span = certificate.get("undetermined_span")
    if span:
        output.append(f"Undetermined span: [{_fmt(span[0])}, {_fmt(span[1])}]")
        output.append("Status: PARTIAL")
    else:
        output.append("Status: COMPLETE")
    return "\n".join(output)


def format_lp_thresholds(rows: List[Dict[str, Any]]) -> str:
    """Format L^p threshold rows with their distance to the limit value."""
    output = ["\nL^p Exclusion Thresholds:"]
    header = "{:>4} {:>8} {:>16} {:>16} {:>12}".format("r", "p", "alpha_p", "gamma", "limit gap")
    output.append(SEPARATOR)
    output.append(header)
    output.append(SEPARATOR)
    for row in rows:
        output.append(
            "{:>4} {:>8} {:>16.12f} {:>16.10f} {:>12.3e}".format(
                row["r"], str(row["p"]), row["alpha_p"], row["gamma_at_threshold"], row["limit_gap"]
            )
        )
    output.append(SEPARATOR)
    return "\n".join(output)
