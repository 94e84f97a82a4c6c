"""CSV formats for streams, kernels, prediction logs and flat tables.

Floats are written with ``repr`` (shortest round-trip form), so parsing a
written file and writing it again reproduces it byte for byte. Files are
UTF-8 with LF line endings.

Stream file header::

    t_index,theta_rth,theta_lth,theta_rsh,theta_lsh[,theta_rft,theta_lft][,mode,phase][,hs]

``hs`` (0/1) marks hand-verified heel strikes and overrides peak detection
during training.

Kernel file::

    # mode=<id>
    # n=<rows>
    # rate_hz=<rate>
    <4 comma-separated degrees per row, channel order as above>
"""

from __future__ import annotations

import math
import os
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .core import CHANNELS, N_CHANNELS, FormatError, KernelSet, LabeledStream, ModeKernel
from .matcher import PredictionSeries

FOOT_COLUMNS = ("theta_rft", "theta_lft")
LABEL_COLUMNS = ("mode", "phase")
HS_COLUMN = "hs"
_FORBIDDEN_IN_IDS = set(",\n\r\"#=")


def fmt(x: float) -> str:
    return repr(float(x))


def _check_id(mode_id: str) -> str:
    if not mode_id or _FORBIDDEN_IN_IDS & set(mode_id) or mode_id != mode_id.strip():
        raise FormatError(f"mode id {mode_id!r} cannot be written to CSV")
    return mode_id


def _parse_float(text: str, path, line_no: int, column: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise FormatError(f"{path}:{line_no}: column {column!r}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise FormatError(f"{path}:{line_no}: column {column!r}: non-finite value {text!r}")
    return v


def _parse_int(text: str, path, line_no: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise FormatError(f"{path}:{line_no}: column {column!r}: not an integer: {text!r}") from None


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _read_lines(path) -> list[str]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        data = fh.read()
    if "\r" in data:
        raise FormatError(f"{path}: CR line endings are not accepted")
    lines = data.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


# ---------------------------------------------------------------------------
# streams


def stream_header(has_foot: bool, has_labels: bool, has_hs: bool = False) -> list[str]:
    cols = ["t_index", *CHANNELS]
    if has_foot:
        cols += FOOT_COLUMNS
    if has_labels:
        cols += LABEL_COLUMNS
    if has_hs:
        cols.append(HS_COLUMN)
    return cols


def format_stream(stream: LabeledStream, include_hs: bool = False) -> str:
    has_foot = stream.foot is not None
    has_labels = stream.has_labels
    has_hs = include_hs and stream.hs_indices is not None
    out = [",".join(stream_header(has_foot, has_labels, has_hs))]
    hs_mask = np.zeros(len(stream), dtype=bool)
    if has_hs:
        hs_mask[stream.hs_indices] = True
    if has_labels:
        for m in set(stream.modes):
            _check_id(m)
    for i in range(len(stream)):
        row = [str(int(stream.t_index[i]))]
        row += [fmt(v) for v in stream.angles[i]]
        if has_foot:
            row += [fmt(v) for v in stream.foot[i]]
        if has_labels:
            row += [stream.modes[i], fmt(stream.phase[i])]
        if has_hs:
            row.append("1" if hs_mask[i] else "0")
        out.append(",".join(row))
    return "\n".join(out) + "\n"


def write_stream(stream: LabeledStream, path, include_hs: bool = False) -> None:
    _write_text(path, format_stream(stream, include_hs))


def parse_stream(lines: list[str], path="<stream>", sample_rate_hz: float = 230.0) -> LabeledStream:
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = lines[0].split(",")
    has_hs = header[-1:] == [HS_COLUMN]
    body = header[:-1] if has_hs else header
    has_labels = body[-2:] == list(LABEL_COLUMNS)
    if has_labels:
        body = body[:-2]
    has_foot = body[-2:] == list(FOOT_COLUMNS)
    if body != stream_header(has_foot, False):
        raise FormatError(f"{path}:1: unexpected header {lines[0]!r}; "
                          f"expected {','.join(stream_header(True, True, True))} (optional groups may be omitted)")
    ncol = len(header)
    T = len(lines) - 1
    t_index = np.empty(T, dtype=np.int64)
    angles = np.empty((T, N_CHANNELS))
    foot = np.empty((T, 2)) if has_foot else None
    modes = [] if has_labels else None
    phase = np.empty(T) if has_labels else None
    hs = []
    for r, line in enumerate(lines[1:]):
        line_no = r + 2
        parts = line.split(",")
        if len(parts) != ncol:
            raise FormatError(f"{path}:{line_no}: expected {ncol} fields, got {len(parts)}")
        t_index[r] = _parse_int(parts[0], path, line_no, "t_index")
        if r and t_index[r] <= t_index[r - 1]:
            raise FormatError(f"{path}:{line_no}: t_index {t_index[r]} does not increase")
        for c in range(N_CHANNELS):
            angles[r, c] = _parse_float(parts[1 + c], path, line_no, CHANNELS[c])
        k = 1 + N_CHANNELS
        if has_foot:
            foot[r, 0] = _parse_float(parts[k], path, line_no, FOOT_COLUMNS[0])
            foot[r, 1] = _parse_float(parts[k + 1], path, line_no, FOOT_COLUMNS[1])
            k += 2
        if has_labels:
            if not parts[k]:
                raise FormatError(f"{path}:{line_no}: empty mode label")
            modes.append(parts[k])
            p = _parse_float(parts[k + 1], path, line_no, "phase")
            if not 0.0 < p <= 1.0:
                raise FormatError(f"{path}:{line_no}: phase {p} outside (0, 1]")
            phase[r] = p
            k += 2
        if has_hs:
            if parts[k] not in ("0", "1"):
                raise FormatError(f"{path}:{line_no}: hs must be 0 or 1, got {parts[k]!r}")
            if parts[k] == "1":
                hs.append(r)
    return LabeledStream(
        t_index=t_index,
        angles=angles,
        foot=foot,
        modes=modes,
        phase=phase,
        hs_indices=np.array(hs, dtype=np.int64) if has_hs else None,
        sample_rate_hz=sample_rate_hz,
    )


def read_stream(path, sample_rate_hz: float = 230.0) -> LabeledStream:
    return parse_stream(_read_lines(path), path, sample_rate_hz)


# ---------------------------------------------------------------------------
# kernels


def format_kernel(kernel: ModeKernel) -> str:
    out = [
        f"# mode={_check_id(kernel.mode_id)}",
        f"# n={kernel.n}",
        f"# rate_hz={fmt(kernel.sample_rate_hz)}",
    ]
    out += [",".join(fmt(v) for v in row) for row in kernel.columns]
    return "\n".join(out) + "\n"


def write_kernel(kernel: ModeKernel, path) -> None:
    _write_text(path, format_kernel(kernel))


def parse_kernel(lines: list[str], path="<kernel>") -> ModeKernel:
    meta = {}
    for i, key in enumerate(("mode", "n", "rate_hz")):
        if i >= len(lines) or not lines[i].startswith(f"# {key}="):
            raise FormatError(f"{path}:{i + 1}: expected '# {key}=...'")
        meta[key] = lines[i][len(f"# {key}="):]
    n = _parse_int(meta["n"], path, 2, "n")
    rate = _parse_float(meta["rate_hz"], path, 3, "rate_hz")
    rows = lines[3:]
    if len(rows) != n:
        raise FormatError(f"{path}: metadata says n={n} but file has {len(rows)} rows")
    cols = np.empty((n, N_CHANNELS))
    for r, line in enumerate(rows):
        parts = line.split(",")
        if len(parts) != N_CHANNELS:
            raise FormatError(f"{path}:{r + 4}: expected {N_CHANNELS} values, got {len(parts)}")
        for c in range(N_CHANNELS):
            cols[r, c] = _parse_float(parts[c], path, r + 4, CHANNELS[c])
    try:
        return ModeKernel(meta["mode"], cols, rate)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def read_kernel(path) -> ModeKernel:
    return parse_kernel(_read_lines(path), path)


def read_kernel_dir(directory) -> KernelSet:
    """Load every ``*.csv`` kernel in a directory, ordered by file name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FormatError(f"{directory}: not a directory")
    files = sorted(p for p in directory.iterdir() if p.suffix == ".csv" and p.is_file())
    if not files:
        raise FormatError(f"{directory}: no kernel files (*.csv)")
    return KernelSet(read_kernel(p) for p in files)


# ---------------------------------------------------------------------------
# predictions and tables


def format_predictions(preds: PredictionSeries) -> str:
    ids = [_check_id(m) for m in preds.mode_ids]
    out = ["# kernels=" + ",".join(f"{m}:{n}" for m, n in zip(ids, preds.lengths))]
    out.append(",".join(["t_index", "mode", "j_star", "phase", "warm", *[f"e_{m}" for m in ids]]))
    phase = preds.phase
    for i in range(len(preds)):
        row = [
            str(int(preds.t_index[i])),
            ids[preds.mode_index[i]],
            str(int(preds.j_star[i])),
            fmt(phase[i]),
            "1" if preds.warm[i] else "0",
        ]
        row += [fmt(v) for v in preds.min_errors[i]]
        out.append(",".join(row))
    return "\n".join(out) + "\n"


def write_predictions(preds: PredictionSeries, path) -> None:
    _write_text(path, format_predictions(preds))


def read_predictions(path) -> PredictionSeries:
    lines = _read_lines(path)
    if len(lines) < 2 or not lines[0].startswith("# kernels="):
        raise FormatError(f"{path}:1: expected '# kernels=<id>:<n>,...'")
    ids, lengths = [], []
    for item in lines[0][len("# kernels="):].split(","):
        mid, _, n = item.rpartition(":")
        ids.append(mid)
        lengths.append(_parse_int(n, path, 1, "kernels"))
    expected = ["t_index", "mode", "j_star", "phase", "warm", *[f"e_{m}" for m in ids]]
    if lines[1].split(",") != expected:
        raise FormatError(f"{path}:2: unexpected header {lines[1]!r}")
    index = {m: i for i, m in enumerate(ids)}
    T = len(lines) - 2
    t = np.empty(T, dtype=np.int64)
    mode = np.empty(T, dtype=np.int64)
    j = np.empty(T, dtype=np.int64)
    warm = np.empty(T, dtype=bool)
    errs = np.empty((T, len(ids)))
    for r, line in enumerate(lines[2:]):
        line_no = r + 3
        parts = line.split(",")
        if len(parts) != len(expected):
            raise FormatError(f"{path}:{line_no}: expected {len(expected)} fields, got {len(parts)}")
        t[r] = _parse_int(parts[0], path, line_no, "t_index")
        if parts[1] not in index:
            raise FormatError(f"{path}:{line_no}: unknown mode {parts[1]!r}")
        mode[r] = index[parts[1]]
        j[r] = _parse_int(parts[2], path, line_no, "j_star")
        if not 1 <= j[r] <= lengths[mode[r]]:
            raise FormatError(f"{path}:{line_no}: j_star {j[r]} outside [1, {lengths[mode[r]]}]")
        if parts[4] not in ("0", "1"):
            raise FormatError(f"{path}:{line_no}: warm must be 0 or 1")
        warm[r] = parts[4] == "1"
        for m in range(len(ids)):
            errs[r, m] = _parse_float(parts[5 + m], path, line_no, expected[5 + m])
    return PredictionSeries(tuple(ids), tuple(lengths), t, mode, j, errs, warm)


def format_table(columns: Mapping[str, Iterable]) -> str:
    """Flat CSV from equal-length columns; floats via ``repr``."""
    names = list(columns)
    data = [list(columns[k]) for k in names]
    if len({len(c) for c in data}) > 1:
        raise ValueError("table columns differ in length")

    def cell(v):
        if isinstance(v, (bool, np.bool_)):
            return "1" if v else "0"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return fmt(v)
        return str(v)

    out = [",".join(names)]
    out += [",".join(cell(v) for v in row) for row in zip(*data)]
    return "\n".join(out) + "\n"


def write_table(columns: Mapping[str, Iterable], path) -> None:
    _write_text(path, format_table(columns))


def ensure_parent(path) -> None:
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
