"""Deterministic table output shared by the report writers."""

from __future__ import annotations

import csv
import json
import math


def _cell(x):
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return x
    if isinstance(x, str):
        return x
    return float(x)


def _csv_cell(x) -> str:
    x = _cell(x)
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


def json_safe(x):
    """Recursively replace non-finite floats by strings so the tree is strict JSON."""
    if isinstance(x, dict):
        return {str(k): json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [json_safe(v) for v in x]
    if hasattr(x, "tolist"):
        return json_safe(x.tolist())
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def dumps(tree) -> str:
    return json.dumps(json_safe(tree), indent=2, sort_keys=True) + "\n"


def write_table(path, header, rows, fmt: str = "csv") -> None:
    """Write rows as CSV (floats via ``repr``, so round trips are exact) or as ``{"columns", "rows"}`` JSON."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_csv_cell(x) for x in row])
    elif fmt == "json":
        doc = {"columns": list(header), "rows": [[_cell(x) for x in row] for row in rows]}
        with open(path, "w") as fh:
            fh.write(dumps(doc))
    else:
        raise ValueError(f"unknown table format {fmt!r}")
