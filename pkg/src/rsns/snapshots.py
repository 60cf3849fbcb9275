"""Binary snapshot files for field states, with an integrity sidecar.

Layout (all little-endian):

    magic   4 bytes  "RSNS"
    version u32      currently 1
    K       i32      window half-width
    N       u32      grid points per side
    L       f64      box side length
    t       f64      snapshot time
    payload (2K+1)^2 planes of N x N complex128, window storage order

A JSON sidecar at <path>.json records the payload digest, the configuration
hash of the producing run, and the sign/ordering conventions, so a reader
can detect truncation and corruption without guessing.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .dynamics import BoxGrid, FieldState
from .errors import SnapshotFormatError
from .lattice import FrequencyWindow

MAGIC = b"RSNS"
VERSION = 1
_HEADER = struct.Struct("<4sIiIdd")

CONVENTIONS = {
    "linear_flow_multiplier": "exp(-i*|xi|^2*t)",
    "mode_order": "row-major, j.y outer, j.x inner",
    "payload_dtype": "complex128 little-endian, C order",
}


def write_snapshot(state: FieldState, path, config_hash: str = "") -> None:
    path = Path(path)
    payload = np.ascontiguousarray(state.fields, dtype="<c16").tobytes()
    header = _HEADER.pack(
        MAGIC, VERSION, state.window.K, state.grid.N, state.grid.L, state.t
    )
    path.write_bytes(header + payload)
    sidecar = {
        "format": "RSNS",
        "version": VERSION,
        "config_hash": config_hash,
        "conventions": CONVENTIONS,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def read_snapshot(path, verify: bool = True) -> FieldState:
    """Read a snapshot back; raises SnapshotFormatError on any integrity problem."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise SnapshotFormatError(f"{path}: shorter than the header")
    magic, version, K, N, L, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"{path}: unsupported version {version}")
    n_modes = (2 * K + 1) ** 2
    expected = n_modes * N * N * 16
    payload = raw[_HEADER.size :]
    if len(payload) != expected:
        raise SnapshotFormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    sidecar_path = Path(str(path) + ".json")
    if verify and sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text())
        digest = hashlib.sha256(payload).hexdigest()
        if sidecar.get("payload_sha256") not in (None, digest):
            raise SnapshotFormatError(f"{path}: payload digest does not match sidecar")
    fields = np.frombuffer(payload, dtype="<c16").reshape(n_modes, N, N).astype(np.complex128)
    return FieldState(BoxGrid(L, N), FrequencyWindow(K), fields, t)


def snapshot_roundtrip(path) -> FieldState:
    """Read with full verification; the write side guarantees bit-exact payloads."""
    return read_snapshot(path, verify=True)
