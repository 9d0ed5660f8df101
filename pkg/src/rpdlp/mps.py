"""MPS reader (fixed and free format) and the solution-file writer.

Row and bound conventions used when building a :class:`GeneralFormLp`:

* ``E`` rows go to the equality block, ``G`` rows to the inequality block
  unchanged, ``L`` rows are negated (``-a@x >= -rhs``).
* A RANGES value ``R`` on a row with right-hand side ``rhs`` gives

  ======== ========== ================ ================
  row type sign of R  lower            upper
  ======== ========== ================ ================
  G        any        rhs              rhs + abs(R)
  L        any        rhs - abs(R)     rhs
  E        R > 0      rhs              rhs + R
  E        R < 0      rhs + R          rhs
  ======== ========== ================ ================

  and the row is emitted as two ``>=`` rows (lower, then negated upper).
  ``R = 0`` on an ``E`` row leaves it an equality.
* Default bounds are ``[0, +inf)``. Bound records are applied in file order;
  integrality is relaxed (``BV`` becomes ``[0, 1]``, ``LI``/``UI`` act as
  ``LO``/``UP``). An ``UP`` record with a negative value on a variable whose
  lower bound was never set moves the lower bound to ``-inf``.
* The RHS entry of the objective row is the negated objective constant.
"""

from __future__ import annotations

import gzip
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .model import GeneralFormLp
from .sparse import csr_from_arrays

SECTIONS = ("NAME", "OBJSENSE", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA")
BOUND_TYPES = ("LO", "UP", "FX", "FR", "MI", "PL", "BV", "LI", "UI")
_VALUED_BOUNDS = ("LO", "UP", "FX", "LI", "UI")

# 0-based [start, stop) windows of the six fixed-format fields.
_FIXED_FIELDS = ((1, 3), (4, 12), (14, 22), (24, 36), (39, 47), (49, 61))


class MpsError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class RawMpsInstance:
    name: str = ""
    objsense: str = "MIN"
    rows: list[tuple[str, str]] = field(default_factory=list)
    objective: str | None = None
    columns: list[str] = field(default_factory=list)
    entries: list[tuple[str, str, float]] = field(default_factory=list)
    integer_columns: set[str] = field(default_factory=set)
    rhs: list[tuple[str, float]] = field(default_factory=list)
    ranges: list[tuple[str, float]] = field(default_factory=list)
    bounds: list[tuple[str, str, float | None]] = field(default_factory=list)


def _is_fixed_aligned(line: str) -> bool:
    if len(line.rstrip()) > 61:
        return False
    pos = 0
    n = len(line)
    while pos < n:
        if line[pos] == " ":
            pos += 1
            continue
        end = pos
        while end < n and line[end] != " ":
            end += 1
        if not any(lo <= pos and end <= hi for lo, hi in _FIXED_FIELDS):
            return False
        pos = end
    # Two tokens in one window means whitespace-separated fields, not a name.
    for lo, hi in _FIXED_FIELDS:
        if len(line[lo:hi].split()) > 1:
            return False
    return True


def _fixed_fields(line: str) -> list[str]:
    fields = [line[lo:hi].strip() for lo, hi in _FIXED_FIELDS]
    while fields and not fields[-1]:
        fields.pop()
    return fields


def _number(token: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise MpsError(lineno, f"malformed numeric field {token!r}") from None
    if math.isnan(value):
        raise MpsError(lineno, f"malformed numeric field {token!r}")
    return value


def _lines(text: str | bytes) -> Iterator[tuple[int, str]]:
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    for lineno, line in enumerate(io.StringIO(text), start=1):
        yield lineno, line.rstrip("\r\n").replace("\t", " ")


def parse_mps(text: str | bytes, format: str = "auto") -> RawMpsInstance:
    """Parse MPS text into raw records.

    ``format`` is ``"fixed"``, ``"free"`` or ``"auto"``. In auto mode the file
    is read as fixed format unless some data line is not aligned to the
    fixed field columns.

    Raises:
        MpsError: with the offending line number.
    """
    if format not in ("fixed", "free", "auto"):
        raise ValueError(f"unknown MPS format {format!r}")
    lines = [
        (n, s) for n, s in _lines(text) if s.strip() and not s.lstrip().startswith("*")
    ]
    if format == "auto":
        data = [s for _, s in lines if s.startswith(" ")]
        format = "fixed" if all(_is_fixed_aligned(s) for s in data) else "free"
    fixed = format == "fixed"

    raw = RawMpsInstance()
    row_type: dict[str, str] = {}
    col_seen: set[str] = set()
    section: str | None = None
    order = -1
    in_integer_block = False
    last_lineno = 0

    for lineno, line in lines:
        last_lineno = lineno
        if not line.startswith(" "):
            tokens = line.split()
            head = tokens[0].upper()
            if head not in SECTIONS:
                raise MpsError(lineno, f"unknown section {tokens[0]!r}")
            idx = SECTIONS.index(head)
            if idx < order or (idx == order and head != "OBJSENSE"):
                raise MpsError(lineno, f"section {head} out of order")
            if head != "NAME" and order < 0:
                raise MpsError(lineno, f"section {head} before NAME")
            order = idx
            section = head
            if head == "NAME":
                raw.name = line[4:].strip() if len(tokens) > 1 else ""
            elif head == "OBJSENSE" and len(tokens) > 1:
                raw.objsense = _objsense(tokens[1], lineno)
            elif head == "ENDATA":
                if raw.objective is None:
                    raise MpsError(lineno, "no objective (N) row declared")
                return raw
            if head in ("RHS", "RANGES", "BOUNDS") and len(tokens) > 1:
                raise MpsError(lineno, f"unexpected tokens after {head}")
            continue

        if section is None or section == "NAME":
            raise MpsError(lineno, "data line outside of a section")
        if section == "OBJSENSE":
            # A single token whose column position is not standardized.
            tokens = line.split()
            if len(tokens) != 1:
                raise MpsError(lineno, "OBJSENSE record needs exactly one token")
            raw.objsense = _objsense(tokens[0], lineno)
            continue
        fields = _fixed_fields(line) if fixed else line.split()
        if not fields:
            continue

        if section == "ROWS":
            if len(fields) != 2:
                raise MpsError(lineno, "ROWS record needs a type and a name")
            rtype, rname = fields[0].upper(), fields[1]
            if rtype not in ("N", "E", "L", "G"):
                raise MpsError(lineno, f"unknown row type {fields[0]!r}")
            if rname in row_type:
                raise MpsError(lineno, f"duplicate row {rname!r}")
            row_type[rname] = rtype
            raw.rows.append((rtype, rname))
            if rtype == "N" and raw.objective is None:
                raw.objective = rname
        elif section == "COLUMNS":
            if fixed:
                # Fixed layout has an empty type field for column records.
                if fields[0]:
                    raise MpsError(lineno, f"unexpected field {fields[0]!r} in COLUMNS")
                fields = fields[1:]
            if any(f.strip("'\"").upper() == "MARKER" for f in fields[1:]):
                marker = fields[-1].strip("'\"").upper()
                if marker == "INTORG":
                    in_integer_block = True
                elif marker == "INTEND":
                    in_integer_block = False
                else:
                    raise MpsError(lineno, f"unknown marker {fields[-1]!r}")
                continue
            if len(fields) not in (3, 5):
                raise MpsError(lineno, "COLUMNS record needs a column and 1 or 2 (row, value) pairs")
            col = fields[0]
            if col not in col_seen:
                col_seen.add(col)
                raw.columns.append(col)
            if in_integer_block:
                raw.integer_columns.add(col)
            for rname, tok in zip(fields[1::2], fields[2::2]):
                if rname not in row_type:
                    raise MpsError(lineno, f"undeclared row {rname!r}")
                raw.entries.append((col, rname, _number(tok, lineno)))
        elif section in ("RHS", "RANGES"):
            pairs = _pair_fields(fields, fixed, lineno, section)
            target = raw.rhs if section == "RHS" else raw.ranges
            for rname, tok in pairs:
                if rname not in row_type:
                    raise MpsError(lineno, f"undeclared row {rname!r}")
                value = _number(tok, lineno)
                if section == "RANGES" and row_type[rname] == "N":
                    raise MpsError(lineno, f"RANGES entry on objective row {rname!r}")
                target.append((rname, value))
        elif section == "BOUNDS":
            btype = fields[0].upper()
            if btype not in BOUND_TYPES:
                raise MpsError(lineno, f"unknown bound type {fields[0]!r}")
            rest = fields[1:]
            if fixed:
                # fields: type, set name (may be empty), column, value
                col = rest[1] if len(rest) > 1 else ""
                tok = rest[2] if len(rest) > 2 else None
            else:
                col, tok = _free_bound_fields(btype, rest, col_seen, lineno)
            if col not in col_seen:
                raise MpsError(lineno, f"undeclared column {col!r}")
            if btype in _VALUED_BOUNDS:
                if tok is None or tok == "":
                    raise MpsError(lineno, f"bound {btype} needs a value")
                value = _number(tok, lineno)
            else:
                value = _number(tok, lineno) if tok else None
            raw.bounds.append((btype, col, value))
    raise MpsError(last_lineno + 1, "unexpected end of file (missing ENDATA)")


def _objsense(token: str, lineno: int) -> str:
    sense = token.upper()
    if sense in ("MIN", "MINIMIZE"):
        return "MIN"
    if sense in ("MAX", "MAXIMIZE"):
        return "MAX"
    raise MpsError(lineno, f"unknown objective sense {token!r}")


def _pair_fields(fields: list[str], fixed: bool, lineno: int, section: str) -> list[tuple[str, str]]:
    if fixed:
        if fields[0]:
            raise MpsError(lineno, f"unexpected field {fields[0]!r} in {section}")
        rest = fields[2:]  # drop type field and set name
    else:
        rest = fields[1:] if len(fields) % 2 == 1 else fields
    if len(rest) not in (2, 4):
        raise MpsError(lineno, f"{section} record needs 1 or 2 (row, value) pairs")
    return list(zip(rest[0::2], rest[1::2]))


def _free_bound_fields(btype, rest, columns, lineno):
    if btype in _VALUED_BOUNDS:
        if len(rest) == 3:
            return rest[1], rest[2]
        if len(rest) == 2:
            return rest[0], rest[1]
    else:
        if len(rest) == 1:
            return rest[0], None
        if len(rest) == 2:
            # "FR BND x" versus "BV x 1": decide by which token names a column.
            if rest[1] in columns:
                return rest[1], None
            return rest[0], rest[1]
        if len(rest) == 3:
            return rest[1], rest[2]
    raise MpsError(lineno, f"malformed {btype} bound record")


def read_mps_text(path: str | Path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


def to_general_form(raw: RawMpsInstance) -> GeneralFormLp:
    """Convert raw MPS records to the inequality/equality/bound form."""
    col_index = {c: j for j, c in enumerate(raw.columns)}
    n = len(raw.columns)
    row_kind = {name: t for t, name in raw.rows}
    rhs: dict[str, float] = {}
    for rname, v in raw.rhs:
        rhs[rname] = v
    rng: dict[str, float] = {}
    for rname, v in raw.ranges:
        rng[rname] = v

    # Each constraint row maps to a list of (block, out_row, sign).
    g_rows: list[tuple[float, float]] = []  # (sign, rhs) per G-block row
    a_rows: list[float] = []
    placement: dict[str, list[tuple[str, int, float]]] = {}
    for rtype, rname in raw.rows:
        if rtype == "N":
            continue
        r = rhs.get(rname, 0.0)
        if rname in rng and not (rtype == "E" and rng[rname] == 0.0):
            R = rng[rname]
            if rtype == "G":
                lo, hi = r, r + abs(R)
            elif rtype == "L":
                lo, hi = r - abs(R), r
            elif R > 0:
                lo, hi = r, r + R
            else:
                lo, hi = r + R, r
            placement[rname] = [("G", len(g_rows), 1.0), ("G", len(g_rows) + 1, -1.0)]
            g_rows += [(1.0, lo), (-1.0, -hi)]
        elif rtype == "E":
            placement[rname] = [("A", len(a_rows), 1.0)]
            a_rows.append(r)
        elif rtype == "G":
            placement[rname] = [("G", len(g_rows), 1.0)]
            g_rows.append((1.0, r))
        else:
            placement[rname] = [("G", len(g_rows), -1.0)]
            g_rows.append((-1.0, -r))

    c = np.zeros(n)
    g_trip: list[tuple[int, int, float]] = []
    a_trip: list[tuple[int, int, float]] = []
    for col, rname, v in raw.entries:
        j = col_index[col]
        if rname == raw.objective:
            c[j] += v
        elif row_kind[rname] == "N":
            continue
        else:
            for block, i, sign in placement[rname]:
                (g_trip if block == "G" else a_trip).append((i, j, sign * v))

    constant = 0.0 - rhs.get(raw.objective, 0.0) if raw.objective else 0.0
    if raw.objsense == "MAX":
        c = -c
        constant = -constant

    l = np.zeros(n)
    u = np.full(n, np.inf)
    lower_set = np.zeros(n, dtype=bool)
    for btype, col, value in raw.bounds:
        j = col_index[col]
        if btype in ("LO", "LI"):
            l[j] = value
            lower_set[j] = True
        elif btype in ("UP", "UI"):
            u[j] = value
            if value < 0 and not lower_set[j] and l[j] == 0.0:
                l[j] = -np.inf
        elif btype == "FX":
            l[j] = u[j] = value
            lower_set[j] = True
        elif btype == "FR":
            l[j], u[j] = -np.inf, np.inf
            lower_set[j] = True
        elif btype == "MI":
            l[j] = -np.inf
            lower_set[j] = True
        elif btype == "PL":
            u[j] = np.inf
        elif btype == "BV":
            l[j], u[j] = 0.0, 1.0
            lower_set[j] = True
    bad = np.flatnonzero(l > u)
    if bad.size:
        j = int(bad[0])
        raise ValueError(
            f"infeasible bounds on variable {raw.columns[j]!r}: l={l[j]} > u={u[j]}"
        )

    def build(trip, nrows):
        if trip:
            r, cc, v = (np.array(t) for t in zip(*trip))
        else:
            r = cc = v = np.zeros(0)
        return csr_from_arrays(nrows, n, r, cc, v)

    return GeneralFormLp(
        G=build(g_trip, len(g_rows)),
        A=build(a_trip, len(a_rows)),
        c=c,
        h=np.array([s for _, s in g_rows], dtype=np.float64),
        b=np.array(a_rows, dtype=np.float64),
        l=l,
        u=u,
        objective_constant=constant,
        name=raw.name,
    )


def read_mps(path: str | Path, format: str = "auto") -> GeneralFormLp:
    raw = parse_mps(read_mps_text(path), format=format)
    lp = to_general_form(raw)
    if not lp.name:
        object.__setattr__(lp, "name", Path(path).name.split(".")[0])
    return lp


# Solution files.

SOLUTION_FORMAT_VERSION = 1
SOLUTION_FIELDS = (
    "status",
    "primal_objective",
    "dual_objective",
    "relative_gap",
    "primal_residual",
    "dual_residual",
    "iterations",
    "solve_seconds",
    "limit",
)


def write_solution(result, path: str | Path, include_vectors: bool = True) -> None:
    """Write a solve result as ``key value`` lines.

    Vector blocks (``primal``, ``dual``) follow the scalar fields when
    ``include_vectors`` is set; each starts with ``<block> <length>`` and
    holds one value per line.
    """
    info = result.info
    record = {
        "status": result.status.value,
        "primal_objective": info.primal_objective,
        "dual_objective": info.dual_objective,
        "relative_gap": info.relative_gap,
        "primal_residual": info.primal_residual_norm,
        "dual_residual": info.dual_residual_norm,
        "iterations": result.iterations,
        "solve_seconds": result.solve_seconds,
        "limit": result.limit if result.limit is not None else "none",
    }
    out = [f"format_version {SOLUTION_FORMAT_VERSION}"]
    for key in SOLUTION_FIELDS:
        v = record[key]
        out.append(f"{key} {float(v)!r}" if isinstance(v, float) else f"{key} {v}")
    if include_vectors:
        for block, vec in (("primal", result.point.x), ("dual", result.point.y)):
            out.append(f"{block} {len(vec)}")
            out.extend(repr(float(v)) for v in vec)
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def read_solution(path: str | Path) -> dict:
    """Inverse of :func:`write_solution`; numeric fields come back as numbers."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    head = lines[0].split()
    if head != ["format_version", str(SOLUTION_FORMAT_VERSION)]:
        raise ValueError(f"unsupported solution file header {lines[0]!r}")
    record: dict = {}
    pos = 1
    while pos < len(lines):
        key, _, value = lines[pos].partition(" ")
        pos += 1
        if key in ("primal", "dual"):
            count = int(value)
            record[key] = np.array([float(s) for s in lines[pos : pos + count]])
            pos += count
        elif key in ("status", "limit"):
            record[key] = value
        elif key == "iterations":
            record[key] = int(value)
        else:
            record[key] = float(value)
    return record
