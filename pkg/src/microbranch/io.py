"""JSON serialization of fields; floats round-trip exactly through repr."""

from __future__ import annotations

import json
import math

import numpy as np

from .austenite import Austenite
from .cells import Leaf, Stack
from .constructions import MicrostructureField, Strip, TailCorrection
from .params import ParameterError
from .trace import TraceProfile

FORMAT = "microbranch-field"
VERSION = 1


def _num(x: float):
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def _unnum(x) -> float:
    if isinstance(x, str):
        if x not in ("inf", "-inf", "nan"):
            raise ParameterError(f"bad number {x!r}")
        return float(x)
    return float(x)


def _plain(obj):
    """info dictionaries may hold numpy scalars or non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


def field_to_dict(field: MicrostructureField) -> dict:
    table: list[dict] = []
    ids: dict[int, int] = {}

    def visit(cell) -> int:
        key = id(cell)
        if key in ids:
            return ids[key]
        if isinstance(cell, Leaf):
            node = {"leaf": {"height": _num(cell.height), "first_bit": int(cell.first_bit),
                             "p": [_num(v) for v in cell.p], "q": [_num(v) for v in cell.q]}}
        else:
            node = {"stack": [[visit(c), int(R)] for c, R in cell.parts]}
        ids[key] = len(table)
        table.append(node)
        return ids[key]

    strips = []
    for s in field.strips:
        strips.append({
            "x_lo": _num(s.x_lo), "x_hi": _num(s.x_hi), "cell": visit(s.cell), "kind": s.kind,
            "right": None if s.right is None else {
                "breakpoints": [_num(v) for v in s.right.breakpoints],
                "values": [_num(v) for v in s.right.values]},
        })
    a = field.austenite
    t = field.tail
    return {
        "format": FORMAT,
        "version": VERSION,
        "theta": _num(field.theta),
        "L": _num(field.L),
        "bc": field.bc,
        "height": _num(field.height),
        "cells": table,
        "strips": strips,
        "austenite": {"kind": a.kind, "theta": _num(a.theta), "N": int(a.N), "h": _num(a.h),
                      "shift": _num(a.shift)},
        "tail": None if t is None else {"elastic": _num(t.elastic), "horizontal": _num(t.horizontal),
                                        "vertical": _num(t.vertical)},
        "info": _plain(field.info),
    }


def field_from_dict(d: dict) -> MicrostructureField:
    if d.get("format") != FORMAT or d.get("version") != VERSION:
        raise ParameterError("not a microbranch field document")
    cells: list = []
    for node in d["cells"]:
        if "leaf" in node:
            lf = node["leaf"]
            cells.append(Leaf(_unnum(lf["height"]), int(lf["first_bit"]),
                              tuple(_unnum(v) for v in lf["p"]), tuple(_unnum(v) for v in lf["q"])))
        else:
            parts = []
            for idx, R in node["stack"]:
                if not 0 <= idx < len(cells):
                    raise ParameterError("cell table refers forward")
                parts.append((cells[idx], int(R)))
            cells.append(Stack(tuple(parts)))
    strips = []
    for s in d["strips"]:
        right = None
        if s["right"] is not None:
            right = TraceProfile(np.array([_unnum(v) for v in s["right"]["breakpoints"]]),
                                 np.array([_unnum(v) for v in s["right"]["values"]]))
        strips.append(Strip(_unnum(s["x_lo"]), _unnum(s["x_hi"]), cells[s["cell"]], s["kind"], right))
    a = d["austenite"]
    aus = Austenite(a["kind"], _unnum(a["theta"]), int(a["N"]), _unnum(a["h"]), _unnum(a["shift"]))
    t = d["tail"]
    tail = None if t is None else TailCorrection(_unnum(t["elastic"]), _unnum(t["horizontal"]),
                                                 _unnum(t["vertical"]))
    info = dict(d.get("info") or {})
    return MicrostructureField(_unnum(d["theta"]), _unnum(d["L"]), tuple(strips), aus, d["bc"],
                               _unnum(d["height"]), tail, info)


def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def save_field(field: MicrostructureField, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(field_to_dict(field)))


def load_field(path: str) -> MicrostructureField:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParameterError(f"cannot read field file {path}: {exc}") from exc
    try:
        return field_from_dict(data)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParameterError(f"malformed field file {path}: {exc}") from exc
