import json

import numpy as np
import pytest
from conftest import equilibrium_series
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fput_lattice.dynamics import LatticeState, SnapshotSeries
from fput_lattice.store import (
    SnapshotFormatError,
    format_record,
    read_manifest,
    read_snapshots,
    write_snapshots,
)

FINITE = st.floats(allow_nan=False, allow_infinity=False)


def _write(tmp_path, series, **manifest):
    return write_snapshots(tmp_path / "s.ndjson", series, {"n_particles": series.n, **manifest})


def test_manifest_is_first_line(tmp_path):
    path = _write(tmp_path, equilibrium_series(8, 3), note="x")
    first = path.read_text().splitlines()[0]
    assert json.loads(first) == {"manifest": {"n_particles": 8, "note": "x", "n_snapshots": 3}}
    assert read_manifest(path)["note"] == "x"
    assert not (tmp_path / "s.ndjson.tmp").exists()


def test_record_format_uses_full_precision():
    s = LatticeState(0.1, np.array([1 / 3, -0.0]), np.array([1e-300, 2.0]))
    rec = format_record(s)
    assert rec.endswith("\n") and "0.33333333333333331" in rec
    assert json.loads(rec) == {"t": 0.1, "q": [1 / 3, -0.0], "p": [1e-300, 2.0]}


@settings(max_examples=50, deadline=None)
@given(q=arrays(float, 8, elements=FINITE), p=arrays(float, 8, elements=FINITE),
       t=st.floats(0, 1e6))
def test_round_trip_is_bit_exact(tmp_path_factory, q, p, t):
    series = SnapshotSeries([LatticeState(t, q, p), LatticeState(t + 1, p, q)])
    path = write_snapshots(tmp_path_factory.mktemp("rt") / "s.ndjson", series, {"n_particles": 8})
    back = read_snapshots(path)
    assert [s.t for s in back] == [s.t for s in series]
    for a, b in zip(back, series):
        assert a.q.tobytes() == b.q.tobytes() and a.p.tobytes() == b.p.tobytes()


def test_truncated_file_reports_offset(tmp_path):
    path = _write(tmp_path, equilibrium_series(8, 4))
    data = path.read_bytes()
    lines = data.split(b"\n")
    cut = len(lines[0]) + 1 + len(lines[1]) + 1 + 10
    path.write_bytes(data[:cut])
    with pytest.raises(SnapshotFormatError) as info:
        read_snapshots(path)
    assert info.value.offset == len(lines[0]) + 1 + len(lines[1]) + 1
    assert f"byte offset {info.value.offset}" in str(info.value)


def test_cut_at_line_boundary_is_detected(tmp_path):
    path = _write(tmp_path, equilibrium_series(8, 4))
    lines = path.read_bytes().splitlines(keepends=True)
    path.write_bytes(b"".join(lines[:-1]))
    with pytest.raises(SnapshotFormatError, match="expected 4 snapshots, found 3"):
        read_snapshots(path)


@pytest.mark.parametrize("mutate, message", [
    (lambda ls: [b"not json\n"] + ls[1:], "manifest"),
    (lambda ls: ls[:1] + [b'{"t":0,"q":[0],"p":[0]}\n'] + ls[2:], "sites"),
    (lambda ls: ls[:1] + [ls[2], ls[1]] + ls[3:], "increasing"),
    (lambda ls: ls[:2] + [b"{bad\n"] + ls[3:], "offset"),
])
def test_malformed_files(tmp_path, mutate, message):
    path = _write(tmp_path, equilibrium_series(8, 3))
    lines = path.read_bytes().splitlines(keepends=True)
    path.write_bytes(b"".join(mutate(lines)))
    with pytest.raises(SnapshotFormatError, match=message):
        read_snapshots(path)


def test_empty_file(tmp_path):
    path = tmp_path / "s.ndjson"
    path.write_bytes(b"")
    with pytest.raises(SnapshotFormatError):
        read_snapshots(path)
