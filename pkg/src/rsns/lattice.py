"""Exact integer arithmetic for four-wave resonances on the Z^2 lattice.

A quadruple (j, j1, j2, j3) is resonant when

    j1 - j2 + j3 = j   and   |j1|^2 - |j2|^2 + |j3|^2 = |j|^2.

Substituting the first identity into the second shows the condition is
equivalent to (j - j1) . (j1 - j2) = 0: the four points are the corners of a
rectangle (possibly degenerate), with j and j2 on one diagonal.  Two
formulaic families are always present:

    j1 = j, j2 = j3   and   j3 = j, j2 = j1,

and everything else lies on lattice lines perpendicular to j1 - j.  The
perpendicularity gives an enumeration that walks each line directly instead
of scanning all pairs, which is what makes large windows tractable.

Enumeration is restricted to a finite square window [-K, K]^2.  Every
identity checked downstream is an exact statement about the window-restricted
triple sets; no closure under the window is assumed.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, NamedTuple

import numpy as np

from .errors import BudgetError, ConfigError

#: Hard cap on window half-width accepted by table construction.
DEFAULT_MAX_K = 64

#: Default memory budget for materialized triple tables (bytes).
DEFAULT_TABLE_MEMORY_CAP = 2_000_000_000

_BYTES_PER_TRIPLE = 6  # three int16 index columns


class ModeIndex(NamedTuple):
    """A lattice mode j in Z^2."""

    x: int
    y: int

    def norm_sq(self) -> int:
        return self.x * self.x + self.y * self.y


class TripleKind(enum.Enum):
    TRIVIAL_J1 = "trivial-j1"  # j1 = j, j2 = j3
    TRIVIAL_J3 = "trivial-j3"  # j3 = j, j2 = j1
    NONTRIVIAL = "nontrivial"


class ResonantTriple(NamedTuple):
    j1: ModeIndex
    j2: ModeIndex
    j3: ModeIndex
    kind: TripleKind


@dataclass(frozen=True)
class FrequencyWindow:
    """The square mode window {-K, ..., K}^2."""

    K: int

    def __post_init__(self) -> None:
        if self.K < 0:
            raise ConfigError(f"window half-width must be >= 0, got {self.K}")

    @property
    def size(self) -> int:
        return 2 * self.K + 1

    @property
    def n_modes(self) -> int:
        return self.size * self.size

    def contains(self, j) -> bool:
        x, y = j
        return abs(x) <= self.K and abs(y) <= self.K

    def index_of(self, j) -> int:
        """Row-major storage index (j.y outer, j.x inner)."""
        x, y = j
        if not self.contains(j):
            raise ValueError(f"mode {j!r} outside window K={self.K}")
        return (y + self.K) * self.size + (x + self.K)

    def mode_at(self, idx: int) -> ModeIndex:
        y, x = divmod(idx, self.size)
        return ModeIndex(x - self.K, y - self.K)

    def modes(self) -> Iterator[ModeIndex]:
        for idx in range(self.n_modes):
            yield self.mode_at(idx)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Mode coordinates (x, y) in storage order, read-only int64 arrays."""
        return _window_coords(self.K)

    def norms_sq(self) -> np.ndarray:
        return _window_norms_sq(self.K)


@lru_cache(maxsize=None)
def _window_coords(K: int) -> tuple[np.ndarray, np.ndarray]:
    r = np.arange(-K, K + 1, dtype=np.int64)
    gy, gx = np.meshgrid(r, r, indexing="ij")  # y outer, x inner
    cx = gx.ravel()
    cy = gy.ravel()
    cx.setflags(write=False)
    cy.setflags(write=False)
    return cx, cy


@lru_cache(maxsize=None)
def _window_norms_sq(K: int) -> np.ndarray:
    cx, cy = _window_coords(K)
    n2 = cx * cx + cy * cy
    n2.setflags(write=False)
    return n2


def is_resonant(j, j1, j2, j3) -> bool:
    """Exact membership test for the resonance relation.

    Uses plain Python integers, so it is total on all integer inputs.
    """
    jx, jy = j
    ax, ay = j1
    bx, by = j2
    cx, cy = j3
    if ax - bx + cx != jx or ay - by + cy != jy:
        return False
    return (ax * ax + ay * ay) - (bx * bx + by * by) + (cx * cx + cy * cy) == jx * jx + jy * jy


def _classify(j: ModeIndex, j1: ModeIndex, j3: ModeIndex) -> TripleKind:
    # j1 = j forces j2 = j3 and vice versa; likewise j3 = j forces j2 = j1.
    if j1 == j:
        return TripleKind.TRIVIAL_J1
    if j3 == j:
        return TripleKind.TRIVIAL_J3
    return TripleKind.NONTRIVIAL


def _oracle_rows(j: ModeIndex, window: FrequencyWindow) -> np.ndarray:
    """Brute-force triple table for one j: all (j1, j2) pairs, int64 rows (i1, i2, i3).

    Canonically ordered (lexicographic on j1.x, j1.y, j2.x, j2.y).  Cost is
    O(n_modes^2); intended as the independent reference for the fast walker.
    """
    K = window.K
    W = window.size
    cx, cy = window.coords()
    n2 = window.norms_sq()
    jx, jy = j
    jn2 = jx * jx + jy * jy
    # all (j1, j2) index pairs
    x1 = cx[:, None]
    y1 = cy[:, None]
    x2 = cx[None, :]
    y2 = cy[None, :]
    x3 = jx - x1 + x2
    y3 = jy - y1 + y2
    inside = (np.abs(x3) <= K) & (np.abs(y3) <= K)
    res = (n2[:, None] - n2[None, :] + x3 * x3 + y3 * y3) == jn2
    keep = inside & res
    i1, i2 = np.nonzero(keep)
    i3 = (y3[keep] + K) * W + (x3[keep] + K)
    rows = np.column_stack([i1, i2, i3]).astype(np.int64)
    # storage index is y-major; canonical order is x-major on (j1, j2)
    k1 = (cx[i1] + K) * W + (cy[i1] + K)
    k2 = (cx[i2] + K) * W + (cy[i2] + K)
    order = np.argsort(k1 * (W * W) + k2)
    return rows[order]


def _fast_rows(j: ModeIndex, window: FrequencyWindow) -> np.ndarray:
    """Fast triple table for one j, identical content and order to `_oracle_rows`.

    Trivial families are emitted by formula; the rest walks lattice points
    along the primitive perpendicular of j1 - j, so the cost is proportional
    to the output size.
    """
    K = window.K
    W = window.size
    jx, jy = j
    if not window.contains(j):
        raise ValueError(f"mode {j!r} outside window K={window.K}")
    j_idx = window.index_of(j)
    blocks: list[np.ndarray] = []
    all_modes_xmajor = _xmajor_mode_indices(K)
    for b in range(window.n_modes):
        i1 = int(all_modes_xmajor[b])
        if i1 == j_idx:
            # family j1 = j: one triple (j, k, k) per mode k, ordered by k's x-major key
            i2 = all_modes_xmajor
            blocks.append(np.column_stack([np.full(W * W, i1), i2, i2]))
            continue
        m1 = window.mode_at(i1)
        walk = _walk_rows(j, m1, K)
        # insert the m = 0 member (j1, j1, j): the walk keys are strictly
        # monotone in m, so it lands exactly where j2 = j1 sorts.
        rows = np.empty((walk.shape[0] + 1, 3), dtype=np.int64)
        key1 = (m1.x + K) * W + (m1.y + K)
        cxw, cyw = _window_coords(K)
        wkeys = (cxw[walk[:, 1]] + K) * W + (cyw[walk[:, 1]] + K)
        pos = int(np.searchsorted(wkeys, key1))
        rows[:pos] = walk[:pos]
        rows[pos] = (i1, i1, j_idx)
        rows[pos + 1 :] = walk[pos:]
        blocks.append(rows)
    return np.concatenate(blocks, axis=0)


def _walk_rows(j: ModeIndex, j1: ModeIndex, K: int) -> np.ndarray:
    """Nontrivial triples for a fixed (j, j1), ordered by the j2 sort key."""
    W = 2 * K + 1
    dx = j1.x - j.x
    dy = j1.y - j.y
    g = math.gcd(abs(dx), abs(dy))
    ex, ey = -dy // g, dx // g
    if ex < 0 or (ex == 0 and ey < 0):
        ex, ey = -ex, -ey
    lo, hi = -(4 * K + 4), 4 * K + 4
    # j2 = j1 + m e and j3 = j + m e must both stay inside the window
    for base, e in ((j1.x, ex), (j1.y, ey), (j.x, ex), (j.y, ey)):
        if e > 0:
            lo = max(lo, -((K + base) // e))
            hi = min(hi, (K - base) // e)
        elif e < 0:
            lo = max(lo, -((K - base) // (-e)))
            hi = min(hi, (K + base) // (-e))
    if lo > hi:
        return np.empty((0, 3), dtype=np.int64)
    m = np.arange(lo, hi + 1, dtype=np.int64)
    m = m[m != 0]
    x2 = j1.x + m * ex
    y2 = j1.y + m * ey
    x3 = j.x + m * ex
    y3 = j.y + m * ey
    i1 = np.full(m.size, (j1.y + K) * W + (j1.x + K), dtype=np.int64)
    i2 = (y2 + K) * W + (x2 + K)
    i3 = (y3 + K) * W + (x3 + K)
    return np.column_stack([i1, i2, i3])


@lru_cache(maxsize=None)
def _xmajor_mode_indices(K: int) -> np.ndarray:
    """Storage indices of all modes when enumerated x-major (the sort-key order)."""
    W = 2 * K + 1
    r = np.arange(-K, K + 1, dtype=np.int64)
    gx, gy = np.meshgrid(r, r, indexing="ij")  # x outer
    idx = ((gy.ravel() + K) * W + (gx.ravel() + K)).astype(np.int64)
    idx.setflags(write=False)
    return idx


def _rows_to_triples(j: ModeIndex, rows: np.ndarray, window: FrequencyWindow) -> list[ResonantTriple]:
    out = []
    for i1, i2, i3 in rows:
        m1 = window.mode_at(int(i1))
        m2 = window.mode_at(int(i2))
        m3 = window.mode_at(int(i3))
        out.append(ResonantTriple(m1, m2, m3, _classify(j, m1, m3)))
    return out


def enumerate_triples_oracle(j, window: FrequencyWindow) -> list[ResonantTriple]:
    """All window-restricted resonant triples for j, by quadratic brute force."""
    j = ModeIndex(*j)
    if not window.contains(j):
        raise ValueError(f"mode {j!r} outside window K={window.K}")
    return _rows_to_triples(j, _oracle_rows(j, window), window)


def enumerate_triples(j, window: FrequencyWindow) -> list[ResonantTriple]:
    """All window-restricted resonant triples for j, by perpendicular-line walking.

    Returns exactly the oracle's list, in the same canonical order.
    """
    j = ModeIndex(*j)
    return _rows_to_triples(j, _fast_rows(j, window), window)


@dataclass
class TripleCounts:
    total: int
    trivial: int
    nontrivial: int


class _TriplesView(Mapping):
    """Lazy mode -> triple-list view over a table."""

    def __init__(self, table: "ResonantTable"):
        self._table = table

    def __getitem__(self, j) -> list[ResonantTriple]:
        return self._table.triples_for(j)

    def __iter__(self):
        return self._table.window.modes()

    def __len__(self) -> int:
        return self._table.window.n_modes


@dataclass
class ResonantTable:
    """Window-restricted resonant triples for every j in the window.

    Only the rectangle (nontrivial) triples are materialized, as columnar
    int16 index arrays in canonical order per j; the two formulaic families
    are synthesized on access.  `counts` covers everything.
    """

    window: FrequencyWindow
    offsets: np.ndarray  # int64, shape (n_modes + 1,): per-j nontrivial runs
    idx1: np.ndarray  # int16 per nontrivial triple
    idx2: np.ndarray
    idx3: np.ndarray
    counts: TripleCounts = field(init=False)

    def __post_init__(self) -> None:
        nm = self.window.n_modes
        nontrivial = int(self.offsets[-1])
        trivial = nm * (2 * nm - 1)
        self.counts = TripleCounts(trivial + nontrivial, trivial, nontrivial)

    @property
    def triples(self) -> Mapping:
        return _TriplesView(self)

    def trivial_count_for(self, j) -> int:
        return 2 * self.window.n_modes - 1

    def nontrivial_slice(self, j) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        i = self.window.index_of(j)
        s = slice(int(self.offsets[i]), int(self.offsets[i + 1]))
        return self.idx1[s], self.idx2[s], self.idx3[s]

    def triples_for(self, j) -> list[ResonantTriple]:
        """Full canonical triple list for j (formulaic families merged back in)."""
        j = ModeIndex(*j)
        return _rows_to_triples(j, self._full_rows(j), self.window)

    def _full_rows(self, j: ModeIndex) -> np.ndarray:
        K = self.window.K
        W = self.window.size
        j_idx = self.window.index_of(j)
        i1, i2, i3 = self.nontrivial_slice(j)
        cx, cy = self.window.coords()
        stored = np.column_stack([i1.astype(np.int64), i2.astype(np.int64), i3.astype(np.int64)])
        xmaj = _xmajor_mode_indices(K)
        # trivial families as rows
        fam1 = np.column_stack([np.full(W * W, j_idx, dtype=np.int64), xmaj, xmaj])
        others = xmaj[xmaj != j_idx]
        fam2 = np.column_stack([others, others, np.full(others.size, j_idx, dtype=np.int64)])
        rows = np.concatenate([stored, fam1, fam2], axis=0)
        k1 = (cx[rows[:, 0]] + K) * W + (cy[rows[:, 0]] + K)
        k2 = (cx[rows[:, 1]] + K) * W + (cy[rows[:, 1]] + K)
        return rows[np.lexsort((k2, k1))]


def build_table(
    window: FrequencyWindow,
    max_k: int = DEFAULT_MAX_K,
    memory_cap_bytes: int = DEFAULT_TABLE_MEMORY_CAP,
) -> ResonantTable:
    """Materialize the nontrivial triple table for a whole window.

    Construction streams j in storage order; within each j the triples come
    out already canonically sorted (blocks ordered by j1's sort key, walks
    monotone in j2's), so no global sort is needed.  Raises `BudgetError` as
    soon as the running size estimate exceeds the memory cap.
    """
    if window.K > max_k:
        raise ConfigError(f"window K={window.K} exceeds configured maximum {max_k}")
    K = window.K
    W = window.size
    nm = window.n_modes
    # j1 candidates in canonical (x-major) block order
    r = np.arange(-K, K + 1, dtype=np.int64)
    gx, gy = np.meshgrid(r, r, indexing="ij")
    X1 = gx.ravel()
    Y1 = gy.ravel()
    I1 = ((Y1 + K) * W + (X1 + K)).astype(np.int64)
    BIG = np.int64(4 * K + 4)
    chunks: list[np.ndarray] = []
    counts = np.zeros(nm, dtype=np.int64)
    running = 0
    for jy in range(-K, K + 1):
        for jx in range(-K, K + 1):
            j_idx = (jy + K) * W + (jx + K)
            dx = X1 - jx
            dy = Y1 - jy
            sel = (dx != 0) | (dy != 0)
            dxs = dx[sel]
            dys = dy[sel]
            g = np.gcd(np.abs(dxs), np.abs(dys))
            ex = -dys // g
            ey = dxs // g
            flip = (ex < 0) | ((ex == 0) & (ey < 0))
            ex = np.where(flip, -ex, ex)
            ey = np.where(flip, -ey, ey)
            x1 = X1[sel]
            y1 = Y1[sel]
            lo = np.full(ex.shape, -BIG)
            hi = np.full(ex.shape, BIG)
            for base, e in (
                (x1, ex),
                (y1, ey),
                (np.full_like(x1, jx), ex),
                (np.full_like(y1, jy), ey),
            ):
                pos = e > 0
                neg = e < 0
                lo[pos] = np.maximum(lo[pos], -((K + base[pos]) // e[pos]))
                hi[pos] = np.minimum(hi[pos], (K - base[pos]) // e[pos])
                lo[neg] = np.maximum(lo[neg], -((K - base[neg]) // (-e[neg])))
                hi[neg] = np.minimum(hi[neg], (K + base[neg]) // (-e[neg]))
            n_before = np.maximum(0, np.minimum(hi, -1) - lo + 1)
            n_after = np.maximum(0, hi - np.maximum(lo, 1) + 1)
            sizes = n_before + n_after
            total = int(sizes.sum())
            counts[j_idx] = total
            running += total
            if running * _BYTES_PER_TRIPLE > memory_cap_bytes:
                raise BudgetError(
                    f"estimated table size exceeds memory cap: >= {running} triples "
                    f"({running * _BYTES_PER_TRIPLE} bytes > {memory_cap_bytes})"
                )
            if total == 0:
                continue
            reps = np.repeat(np.arange(sizes.size), sizes)
            starts = np.where(n_before > 0, lo, np.maximum(lo, 1))
            csum = np.zeros(sizes.size, dtype=np.int64)
            csum[1:] = np.cumsum(sizes)[:-1]
            local = np.arange(total, dtype=np.int64) - csum[reps]
            m = starts[reps] + local
            m += ((n_before[reps] > 0) & (local >= n_before[reps])).astype(np.int64)
            exr = ex[reps]
            eyr = ey[reps]
            x2 = x1[reps] + m * exr
            y2 = y1[reps] + m * eyr
            x3 = jx + m * exr
            y3 = jy + m * eyr
            block = np.empty((total, 3), dtype=np.int16)
            block[:, 0] = I1[sel][reps]
            block[:, 1] = (y2 + K) * W + (x2 + K)
            block[:, 2] = (y3 + K) * W + (x3 + K)
            chunks.append(block)
    offsets = np.zeros(nm + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(counts)
    if chunks:
        flat = np.concatenate(chunks, axis=0)
    else:
        flat = np.empty((0, 3), dtype=np.int16)
    return ResonantTable(
        window=window,
        offsets=offsets,
        idx1=np.ascontiguousarray(flat[:, 0]),
        idx2=np.ascontiguousarray(flat[:, 1]),
        idx3=np.ascontiguousarray(flat[:, 2]),
    )


def circle_lattice_points(center2: tuple[int, int], radius_sq4: int) -> list[ModeIndex]:
    """Lattice points on a circle with doubled-integer center and 4 R^2 radius data.

    Returns all p in Z^2 with (2 p.x - center2.x)^2 + (2 p.y - center2.y)^2 =
    radius_sq4, lexicographically ordered.  Doubled coordinates make
    half-integer centers exact; everything runs in unbounded Python ints.
    """
    c2x, c2y = int(center2[0]), int(center2[1])
    r4 = int(radius_sq4)
    if r4 < 0:
        raise ValueError("radius_sq4 must be >= 0")
    pts: list[ModeIndex] = []
    t_max = math.isqrt(r4)
    # t = 2 px - c2x must match c2x's parity
    t0 = -t_max
    if (t0 - c2x) % 2 != 0:
        t0 += 1
    for t in range(t0, t_max + 1, 2):
        rem = r4 - t * t
        s = math.isqrt(rem)
        if s * s != rem:
            continue
        if (c2y + s) % 2 != 0:
            continue
        px = (c2x + t) // 2
        ys = {(c2y + s) // 2, (c2y - s) // 2}
        for py in ys:
            pts.append(ModeIndex(px, py))
    pts.sort()
    return pts


def circle_tail_sum(
    center2: tuple[int, int],
    radius_sq4: int,
    A: float,
    beta: float,
) -> dict[str, float]:
    """Weighted tail sum over circle lattice points at distance >= A from the origin.

    Computes sum over points p on the circle with |p| >= A of
    (1 + |p|^2)^(-beta), and its ratio to A^(1 - 2 beta).  The exponent
    constraint beta > 3/4 keeps the comparison scale integrable and is
    enforced.
    """
    if not beta > 0.75:
        raise ConfigError(
            f"beta must exceed 3/4 for the tail comparison to converge, got {beta}"
        )
    if not A > 0:
        raise ValueError("A must be positive")
    pts = circle_lattice_points(center2, radius_sq4)
    a_sq = A * A
    total = 0.0
    for p in pts:
        n2 = p.norm_sq()
        if n2 >= a_sq:
            total += (1.0 + n2) ** (-beta)
    return {"sum": total, "bound_ratio": total / A ** (1.0 - 2.0 * beta)}
