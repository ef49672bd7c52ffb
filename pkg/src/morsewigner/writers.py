"""Deterministic CSV / JSON / gnuplot-matrix emission.

Every float is written with 17 significant digits so that files round-trip
exactly; nothing time- or host-dependent enters the output.
"""
from __future__ import annotations

import io
import json
import math
from typing import Any, Iterable, Sequence

import numpy as np


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def _plain(obj):
    """Numpy scalars and arrays to builtin types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps_json(obj: Any, indent: int = 1, _depth: int = 0) -> str:
    """json.dumps with 17-digit floats and sorted keys; NaN/inf become null."""
    obj = _plain(obj) if _depth == 0 else obj
    pad = " " * (indent * (_depth + 1))
    end = " " * (indent * _depth)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps_json(obj[k], indent, _depth + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(dumps_json(v, indent, _depth + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps_json(v, indent, _depth + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, float):
        return "null" if not math.isfinite(obj) else format(obj, ".17g")
    return json.dumps(obj)


def _meta_value(v) -> str:
    if isinstance(v, (dict, list, tuple, np.ndarray)):
        return dumps_json(v, indent=0).replace("\n", "")
    return fmt(v)


def header_block(meta: dict) -> str:
    return "".join(f"# {k}: {_meta_value(meta[k])}\n" for k in sorted(meta))


def table_csv(meta: dict, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(header_block(meta))
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(x) for x in row) + "\n")
    return buf.getvalue()


def table_json(meta: dict, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    data = {"columns": list(columns), "rows": [list(r) for r in rows]}
    return dumps_json({"meta": meta, "data": data}) + "\n"


def grid_csv(meta: dict, Q, P, values) -> str:
    """Long format: one (Q, P, value) row per lattice point, Q-major."""
    buf = io.StringIO()
    buf.write(header_block(meta))
    buf.write("Q,P,value\n")
    Pf = [fmt(p) for p in P]
    for i, q in enumerate(Q):
        qs = fmt(q)
        row = values[i]
        buf.write("".join(f"{qs},{Pf[j]},{fmt(row[j])}\n" for j in range(len(Pf))))
    return buf.getvalue()


def grid_json(meta: dict, Q, P, values) -> str:
    return dumps_json({"meta": meta, "data": {"Q": Q, "P": P, "values": values}}) + "\n"


def grid_gnuplot(meta: dict, Q, P, values) -> str:
    """gnuplot ``matrix nonuniform`` layout: first row ``nP P_0 ... P_m``, then ``Q_i v_i0 ...``."""
    buf = io.StringIO()
    buf.write(header_block(meta))
    buf.write(" ".join([fmt(len(P))] + [fmt(p) for p in P]) + "\n")
    for i, q in enumerate(Q):
        buf.write(" ".join([fmt(q)] + [fmt(v) for v in values[i]]) + "\n")
    return buf.getvalue()


def _num(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        return {"true": 1.0, "false": 0.0}.get(s, math.nan)


def read_csv_table(text: str) -> tuple[dict, list[str], np.ndarray]:
    """Inverse of :func:`table_csv` for numeric tables (header values kept as strings)."""
    meta, lines = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition(": ")
            meta[k] = v
        elif line:
            lines.append(line)
    columns = lines[0].split(",")
    data = np.array([[_num(x) for x in ln.split(",")] for ln in lines[1:]]) if len(lines) > 1 else \
        np.empty((0, len(columns)))
    return meta, columns, data
