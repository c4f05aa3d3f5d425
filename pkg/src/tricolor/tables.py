"""CSV readers and writers for every artifact the command line emits.

All numbers are written with 9 significant digits.  Files are written to a
temporary sibling and renamed into place, so a reader never sees a partial
file.  Readers report the 1-based line number of the first bad line.
"""

from __future__ import annotations

import math
import os
import tempfile
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .analysis_cavity import ScanTable
from .dsp import CHANNELS, BasebandTrace
from .errors import MalformedInputError
from .fit import SigmaScanData
from .quadratures import Moments

TRACE_META = ("sample_rate", "nu", "seed", "calibration", "quadratures")
MOMENT_SAMPLE_COLUMNS = ("p0", "q_plus", "p_minus")
MOMENT_SUMMARY_COLUMNS = ("var_p_minus", "var_q_plus", "var_p0", "cov_p0_qplus")


def fmt(x) -> str:
    return f"{float(x):.9g}"


def atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_csv(columns: Sequence[str], rows, meta: Optional[Mapping] = None, int_columns=()) -> str:
    out = [f"# {k}={v}" for k, v in (meta or {}).items()]
    out.append(",".join(columns))
    ints = {columns.index(c) for c in int_columns}
    for row in rows:
        out.append(",".join(str(int(v)) if i in ints else fmt(v) for i, v in enumerate(row)))
    return "\n".join(out) + "\n"


def parse_csv(text: str, source: str = "<csv>", required: Sequence[str] = ()) -> tuple:
    """Return ``(meta, columns, data)``; ``data`` is an ``(n_rows, n_cols)`` float array."""
    meta, columns, rows = {}, None, []
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            body = s[1:].strip()
            if "=" in body and columns is None:
                k, v = body.split("=", 1)
                meta[k.strip()] = v.strip()
            continue
        cells = [c.strip() for c in s.split(",")]
        if columns is None:
            columns = cells
            if len(set(columns)) != len(columns) or "" in columns:
                raise MalformedInputError("bad header row", lineno, source)
            missing = [c for c in required if c not in columns]
            if missing:
                raise MalformedInputError(f"missing columns {missing}", lineno, source)
            continue
        if len(cells) != len(columns):
            raise MalformedInputError(f"expected {len(columns)} fields, got {len(cells)}", lineno, source)
        try:
            values = [float(c) for c in cells]
        except ValueError:
            raise MalformedInputError(f"non-numeric field in {s!r}", lineno, source) from None
        if not all(math.isfinite(v) for v in values):
            raise MalformedInputError("non-finite value", lineno, source)
        rows.append(values)
    if columns is None:
        raise MalformedInputError("no header row", None, source)
    if not rows:
        raise MalformedInputError("no data rows", None, source)
    return meta, columns, np.array(rows, dtype=float)


def _read(path, required=()) -> tuple:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise MalformedInputError(f"cannot read: {exc}", source=str(p)) from None
    return parse_csv(text, str(p), required)


def _col(columns, data, name):
    return data[:, columns.index(name)]


# -- analysis-cavity scans --------------------------------------------------

def scan_to_csv(table: ScanTable) -> str:
    return format_csv(ScanTable.COLUMNS, table.rows())


def write_scan(path, table: ScanTable) -> None:
    atomic_write(path, scan_to_csv(table))


def read_scan(path) -> ScanTable:
    _, cols, data = _read(path, ScanTable.COLUMNS)
    return ScanTable(*(_col(cols, data, c) for c in ScanTable.COLUMNS))


# -- sigma sweeps -----------------------------------------------------------

def sigma_scan_to_csv(scan: SigmaScanData) -> str:
    extra = sorted(scan.extra)
    cols = list(SigmaScanData.COLUMNS) + extra
    arrays = [getattr(scan, c) for c in SigmaScanData.COLUMNS] + [scan.extra[k] for k in extra]
    return format_csv(cols, zip(*arrays), {"provenance": scan.provenance})


def write_sigma_scan(path, scan: SigmaScanData) -> None:
    atomic_write(path, sigma_scan_to_csv(scan))


def read_sigma_scan(path) -> SigmaScanData:
    required = SigmaScanData.COLUMNS[:4]
    meta, cols, data = _read(path, required)
    get = {c: _col(cols, data, c) for c in cols}
    extra = {c: v for c, v in get.items() if c not in SigmaScanData.COLUMNS}
    return SigmaScanData(get["sigma"], get["var_q_plus"], get["beta0"], get["var_q_plus_corr"],
                         get.get("err_q_plus"), get.get("err_beta0"),
                         provenance=meta.get("provenance", "measured"), extra=extra)


# -- baseband traces --------------------------------------------------------

def trace_to_csv(trace: BasebandTrace) -> str:
    meta = {"sample_rate": fmt(trace.sample_rate), "nu": fmt(trace.nu),
            "seed": "" if trace.seed is None else str(trace.seed),
            "calibration": fmt(trace.calibration), "quadratures": ",".join(trace.quadratures)}
    cols = ("index",) + CHANNELS
    rows = zip(range(len(trace)), *(trace.channels[c] for c in CHANNELS))
    return format_csv(cols, rows, meta, int_columns=("index",))


def write_trace(path, trace: BasebandTrace) -> None:
    atomic_write(path, trace_to_csv(trace))


def read_trace(path) -> BasebandTrace:
    meta, cols, data = _read(path, ("index",) + CHANNELS)
    missing = [k for k in ("sample_rate",) if k not in meta]
    if missing:
        raise MalformedInputError(f"trace header lacks {missing}", 1, str(path))
    try:
        rate = float(meta["sample_rate"])
        nu = float(meta.get("nu", "27e6"))
        cal = float(meta.get("calibration", "1"))
        seed = int(meta["seed"]) if meta.get("seed") else None
    except ValueError as exc:
        raise MalformedInputError(f"bad trace header value ({exc})", 1, str(path)) from None
    quads = tuple(q.strip() for q in meta.get("quadratures", "p0,p1,p2").split(","))
    if len(quads) != 3:
        raise MalformedInputError("quadratures header needs three labels", 1, str(path))
    chans = {c: _col(cols, data, c) for c in CHANNELS}
    return BasebandTrace(rate, chans, nu=nu, seed=seed, calibration=cal, quadratures=quads)


# -- criteria inputs --------------------------------------------------------

def read_moments(path):
    """Moments CSV: either per-sample ``p0,q_plus,p_minus`` columns or one summary row.

    Returns ``("samples", array)`` or ``("summary", Moments)``.
    """
    _, cols, data = _read(path)
    if all(c in cols for c in MOMENT_SAMPLE_COLUMNS):
        return "samples", np.column_stack([_col(cols, data, c) for c in MOMENT_SAMPLE_COLUMNS])
    if all(c in cols for c in MOMENT_SUMMARY_COLUMNS):
        if data.shape[0] != 1:
            raise MalformedInputError(f"summary moments need exactly one row, got {data.shape[0]}",
                                      None, str(path))
        v = {c: float(_col(cols, data, c)[0]) for c in MOMENT_SUMMARY_COLUMNS}
        return "summary", Moments(**v)
    raise MalformedInputError(f"columns {cols} are neither {MOMENT_SAMPLE_COLUMNS} nor "
                              f"{MOMENT_SUMMARY_COLUMNS}", None, str(path))


def moments_to_csv(m: Moments) -> str:
    return format_csv(MOMENT_SUMMARY_COLUMNS, [[getattr(m, c) for c in MOMENT_SUMMARY_COLUMNS]])


def samples_to_csv(samples) -> str:
    return format_csv(MOMENT_SAMPLE_COLUMNS, np.asarray(samples, dtype=float))


def parse_key_values(text: str, source: str = "<text>") -> dict:
    """Inverse of ``FitResult.as_text`` (values kept as strings)."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise MalformedInputError(f"expected key=value, got {s!r}", lineno, source)
        k, v = s.split("=", 1)
        out[k.strip()] = v.strip()
    return out
