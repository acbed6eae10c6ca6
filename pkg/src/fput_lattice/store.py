"""Snapshot files: newline-delimited JSON, manifest first, one state per line.

::

    {"manifest": {...}}
    {"t": 0, "q": [...], "p": [...]}
    {"t": 1, "q": [...], "p": [...]}

Numbers are written with 17 significant digits, so every double reads back
bit-for-bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dynamics import LatticeState, SnapshotSeries

SNAPSHOT_FILE = "snapshots.ndjson"


class SnapshotFormatError(ValueError):
    def __init__(self, message: str, path, offset: int):
        super().__init__(f"{path}: corrupt snapshot file at byte offset {offset}: {message}")
        self.path = path
        self.offset = offset


def _num(x: float) -> str:
    return "%.17g" % x


def _array(values: np.ndarray) -> str:
    return "[" + ",".join(map(_num, values.tolist())) + "]"


def format_record(state: LatticeState) -> str:
    return f'{{"t":{_num(state.t)},"q":{_array(state.q)},"p":{_array(state.p)}}}\n'


def write_snapshots(path, series: SnapshotSeries, manifest: dict) -> Path:
    """Write ``series`` with ``manifest`` as the leading record.

    ``n_snapshots`` is added to the manifest so that a file cut at a line
    boundary is still recognised as incomplete.
    """
    path = Path(path)
    head = dict(manifest)
    head["n_snapshots"] = len(series)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="ascii", newline="\n") as fh:
        fh.write(json.dumps({"manifest": head}, sort_keys=True, separators=(",", ":")) + "\n")
        fh.writelines(format_record(state) for state in series)
    tmp.replace(path)
    return path


def read_manifest(path) -> dict:
    path = Path(path)
    with open(path, "rb") as fh:
        first = fh.readline()
    return _parse_manifest(first, path)


def _parse_manifest(line: bytes, path) -> dict:
    if not line.endswith(b"\n"):
        raise SnapshotFormatError("manifest line is truncated", path, len(line))
    try:
        doc = json.loads(line)
        return doc["manifest"]
    except (ValueError, KeyError, TypeError):
        raise SnapshotFormatError("first line is not a manifest record", path, 0) from None


def read_snapshots(path) -> SnapshotSeries:
    path = Path(path)
    data = path.read_bytes()
    if not data:
        raise SnapshotFormatError("file is empty", path, 0)
    end = data.find(b"\n")
    manifest = _parse_manifest(data if end < 0 else data[:end + 1], path)
    n = manifest.get("n_particles")
    states = []
    offset = end + 1
    while offset < len(data):
        stop = data.find(b"\n", offset)
        if stop < 0:
            raise SnapshotFormatError("last record is truncated (no newline)", path, offset)
        try:
            rec = json.loads(data[offset:stop], parse_int=float)  # keeps -0 negative
            t, q, p = float(rec["t"]), rec["q"], rec["p"]
            if n is not None and (len(q) != n or len(p) != n):
                raise ValueError(f"record has {len(q)}/{len(p)} sites, manifest says {n}")
            state = LatticeState(t, np.array(q, dtype=float), np.array(p, dtype=float))
        except (ValueError, KeyError, TypeError) as exc:
            raise SnapshotFormatError(str(exc) or "malformed record", path, offset) from None
        if states and not state.t > states[-1].t:
            raise SnapshotFormatError("snapshot times are not increasing", path, offset)
        states.append(state)
        offset = stop + 1
    expected = manifest.get("n_snapshots")
    if expected is not None and expected != len(states):
        raise SnapshotFormatError(f"expected {expected} snapshots, found {len(states)}",
                                  path, len(data))
    return SnapshotSeries(states, manifest)
