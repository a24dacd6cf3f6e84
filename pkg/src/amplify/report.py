"""Byte-stable CSV and JSON report files."""

from __future__ import annotations

import json
import math
import os
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence


class ReportError(RuntimeError):
    pass


def fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if v is None:
        return ""
    return str(v)


def to_csv(rows: Sequence[Mapping], columns: Sequence[str]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        cells = []
        for c in columns:
            s = fmt(row.get(c))
            if any(ch in s for ch in ',"\n'):
                s = '"' + s.replace('"', '""') + '"'
            cells.append(s)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return fmt(v)
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else int(v)
    if isinstance(v, Mapping):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def to_json(rows: Sequence[Mapping], meta: Mapping) -> str:
    doc = {"meta": _clean(meta), "rows": _clean(list(rows))}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def emit_report(name: str, rows: Sequence[Mapping], out_dir: str | Path,
                columns: Sequence[str] | None = None, meta: Mapping | None = None) -> tuple[Path, Path]:
    """Write ``name.csv`` and ``name.json``; nothing is written for empty results."""
    csv_text, json_text = render_report(name, rows, columns, meta)
    return write_report(name, csv_text, json_text, out_dir)


def render_report(name: str, rows: Sequence[Mapping], columns: Sequence[str] | None = None,
                  meta: Mapping | None = None) -> tuple[str, str]:
    if not rows:
        raise ReportError(f"report {name!r} has no rows")
    columns = list(columns or rows[0].keys())
    try:
        return to_csv(rows, columns), to_json(rows, meta or {})
    except (TypeError, ValueError) as exc:
        raise ReportError(f"cannot serialize report {name!r}: {exc}") from exc


def write_report(name: str, csv_text: str, json_text: str, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = (out / f"{name}.csv", out / f"{name}.json")
        for p, text in zip(paths, (csv_text, json_text)):
            tmp = p.with_suffix(p.suffix + ".tmp")
            with open(tmp, "w", newline="\n", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, p)
    except OSError as exc:
        raise ReportError(f"cannot write report {name!r} under {out}: {exc}") from exc
    return paths
