import json

import numpy as np
import pytest

from rsns import (
    BoxGrid,
    FieldState,
    FrequencyWindow,
    SnapshotFormatError,
    read_snapshot,
    snapshot_roundtrip,
    write_snapshot,
)


def _state(seed=0):
    grid = BoxGrid(32.0, 16)
    w = FrequencyWindow(2)
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((w.n_modes, 16, 16)) + 1j * rng.standard_normal((w.n_modes, 16, 16))
    return FieldState(grid, w, f, t=0.625)


def test_roundtrip_bit_identical(tmp_path):
    st = _state()
    p = tmp_path / "s.rsns"
    write_snapshot(st, p, config_hash="abc")
    back = snapshot_roundtrip(p)
    assert np.array_equal(back.fields, st.fields)
    assert back.t == st.t
    assert back.grid == st.grid
    assert back.window == st.window
    # write twice: identical bytes
    p2 = tmp_path / "s2.rsns"
    write_snapshot(st, p2, config_hash="abc")
    assert p.read_bytes() == p2.read_bytes()


def test_bad_magic(tmp_path):
    st = _state()
    p = tmp_path / "s.rsns"
    write_snapshot(st, p)
    raw = bytearray(p.read_bytes())
    raw[:4] = b"XXXX"
    p.write_bytes(bytes(raw))
    with pytest.raises(SnapshotFormatError, match="magic"):
        read_snapshot(p)


def test_unsupported_version(tmp_path):
    st = _state()
    p = tmp_path / "s.rsns"
    write_snapshot(st, p)
    raw = bytearray(p.read_bytes())
    raw[4] = 2  # version + 1, little endian
    p.write_bytes(bytes(raw))
    with pytest.raises(SnapshotFormatError, match="version"):
        read_snapshot(p)


def test_truncated_payload(tmp_path):
    st = _state()
    p = tmp_path / "s.rsns"
    write_snapshot(st, p)
    raw = p.read_bytes()
    p.write_bytes(raw[:-16])
    with pytest.raises(SnapshotFormatError, match="payload"):
        read_snapshot(p)


def test_sidecar_hash_mismatch(tmp_path):
    st = _state()
    p = tmp_path / "s.rsns"
    write_snapshot(st, p)
    side = json.loads((tmp_path / "s.rsns.json").read_text())
    side["payload_sha256"] = "0" * 64
    (tmp_path / "s.rsns.json").write_text(json.dumps(side))
    with pytest.raises(SnapshotFormatError, match="digest"):
        read_snapshot(p)
    # verification can be bypassed explicitly
    back = read_snapshot(p, verify=False)
    assert np.array_equal(back.fields, st.fields)
