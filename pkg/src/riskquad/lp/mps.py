"""Fixed-format MPS export and a matching reader.

Fields follow the classic column layout (name fields of 8 characters at
columns 5 and 15, values from column 25). Values are written with
``repr`` so that a file read back gives bit-identical coefficients; a
value longer than 12 characters simply widens its field, which every
whitespace-delimited MPS reader accepts.
"""

from __future__ import annotations

import math

from .model import INF, LpModel, LpRow

OBJ = "obj"
_SENSE_CODE = {"L": "L", "G": "G", "E": "E"}


def _num(v: float) -> str:
    v = float(v)
    if v == int(v) and abs(v) < 1e15:
        return repr(int(v)) if v != 0 or math.copysign(1.0, v) > 0 else "0"
    return repr(v)


def _line(code: str, name: str, f1: str = "", v1: str = "", f2: str = "", v2: str = "") -> str:
    s = f" {code:<2} {name:<8}  {f1:<8}  {v1:>12}"
    if f2:
        s += f"   {f2:<8}  {v2:>12}"
    return s.rstrip()


def export_mps(model: LpModel) -> str:
    """MPS text of ``model`` with deterministic row and column order."""
    out = [f"NAME          {model.name}", "ROWS", f" N  {OBJ}"]
    for row in model.rows:
        out.append(f" {_SENSE_CODE[row.sense]}  {row.name}")
    cols = [[] for _ in model.variables]
    for row in model.rows:
        for j, v in zip(row.index, row.value):
            cols[j].append((row.name, v))
    out.append("COLUMNS")
    for j, name in enumerate(model.variables):
        entries = []
        if model.objective[j] != 0.0 or not cols[j]:
            # an otherwise empty column is listed with a zero cost so it survives a round trip
            entries.append((OBJ, model.objective[j]))
        entries.extend(cols[j])
        for rname, v in entries:
            out.append(_line("", name, rname, _num(v)))
    out.append("RHS")
    if model.objective_offset != 0.0:
        out.append(_line("", "RHS", OBJ, _num(-model.objective_offset)))
    for row in model.rows:
        if row.rhs != 0.0:
            out.append(_line("", "RHS", row.name, _num(row.rhs)))
    out.append("BOUNDS")
    for name, lo, hi in zip(model.variables, model.lower, model.upper):
        if lo == 0.0 and hi == INF:
            continue
        if lo == -INF and hi == INF:
            out.append(_line("FR", "BND", name))
        elif lo == hi:
            out.append(_line("FX", "BND", name, _num(lo)))
        else:
            if lo == -INF:
                out.append(_line("MI", "BND", name))
            elif lo != 0.0 or hi < 0.0:
                out.append(_line("LO", "BND", name, _num(lo)))
            if hi != INF:
                out.append(_line("UP", "BND", name, _num(hi)))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def parse_mps(text: str) -> LpModel:
    """Read MPS text produced by :func:`export_mps` (or any plain MPS file)."""
    name = ""
    section = None
    row_names, senses, obj_row = [], {}, None
    var_names, var_pos = [], {}
    entries: dict[str, dict[int, float]] = {}
    objective: dict[int, float] = {}
    rhs: dict[str, float] = {}
    offset = 0.0
    lower: dict[int, float] = {}
    upper: dict[int, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()
            section = head[0].upper()
            if section == "NAME":
                name = raw[4:].strip()
            elif section == "ENDATA":
                break
            elif section not in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "RANGES", "OBJSENSE"):
                raise ValueError(f"line {lineno}: unknown section {head[0]}")
            continue
        f = raw.split()
        if section == "ROWS":
            code, rname = f[0].upper(), f[1]
            if code == "N":
                if obj_row is None:
                    obj_row = rname
                continue
            if code not in _SENSE_CODE:
                raise ValueError(f"line {lineno}: bad row type {code}")
            senses[rname] = code
            row_names.append(rname)
            entries[rname] = {}
        elif section == "COLUMNS":
            if "MARKER" in f:
                raise ValueError(f"line {lineno}: integer markers are not supported")
            cname = f[0]
            if cname not in var_pos:
                var_pos[cname] = len(var_names)
                var_names.append(cname)
            j = var_pos[cname]
            for rname, val in zip(f[1::2], f[2::2]):
                v = float(val)
                if rname == obj_row:
                    objective[j] = v
                elif rname in entries:
                    entries[rname][j] = v
                else:
                    raise ValueError(f"line {lineno}: unknown row {rname}")
        elif section == "RHS":
            pairs = f[1:] if len(f) % 2 == 1 else f
            for rname, val in zip(pairs[0::2], pairs[1::2]):
                if rname == obj_row:
                    offset = -float(val)
                elif rname in senses:
                    rhs[rname] = float(val)
                else:
                    raise ValueError(f"line {lineno}: unknown row {rname}")
        elif section == "BOUNDS":
            code = f[0].upper()
            cname = f[2] if len(f) >= 3 else f[1]
            if cname not in var_pos:
                raise ValueError(f"line {lineno}: unknown column {cname}")
            j = var_pos[cname]
            val = float(f[3]) if len(f) >= 4 else None
            if code == "FR":
                lower[j], upper[j] = -INF, INF
            elif code == "MI":
                lower[j] = -INF
            elif code == "PL":
                upper[j] = INF
            elif code == "FX":
                lower[j] = upper[j] = val
            elif code == "LO":
                lower[j] = val
            elif code == "UP":
                upper[j] = val
            else:
                raise ValueError(f"line {lineno}: unsupported bound type {code}")
        elif section == "RANGES":
            raise ValueError(f"line {lineno}: RANGES are not supported")
    n = len(var_names)
    rows = []
    for rname in row_names:
        idx = sorted(entries[rname])
        rows.append(LpRow(rname, tuple(idx), tuple(entries[rname][j] for j in idx), senses[rname], rhs.get(rname, 0.0)))
    return LpModel(
        name,
        tuple(var_names),
        tuple(objective.get(j, 0.0) for j in range(n)),
        tuple(rows),
        tuple(lower.get(j, 0.0) for j in range(n)),
        tuple(upper.get(j, INF) for j in range(n)),
        offset,
    )
