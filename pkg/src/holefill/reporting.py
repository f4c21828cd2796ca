"""Aligned text tables and line-delimited JSON output."""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence


def fmt_value(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.4f}"
    return str(value)


def format_table(headers: Sequence[str], rows: Iterable[Sequence], numeric_right: bool = True) -> str:
    cells = [[str(h) for h in headers]] + [[fmt_value(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = []
    for n, row in enumerate(cells):
        parts = []
        for i, cell in enumerate(row):
            right = numeric_right and n > 0 and _looks_numeric(cell)
            parts.append(cell.rjust(widths[i]) if right else cell.ljust(widths[i]))
        lines.append("  ".join(parts).rstrip())
    return "\n".join(lines) + "\n"


def _looks_numeric(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _clean(value):
    # NaN is not valid JSON; emit null
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def jsonl(records: Iterable[dict]) -> str:
    return "".join(json.dumps({k: _clean(v) for k, v in rec.items()}, ensure_ascii=False) + "\n"
                   for rec in records)
