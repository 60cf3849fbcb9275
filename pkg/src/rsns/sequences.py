"""The discrete resonant nonlinearity on coefficient sequences.

F(a)_j sums a_{j1} conj(a_{j2}) a_{j3} over the window-restricted resonant
triples of j.  Two independent evaluators are provided:

* a direct table contraction with compensated summation in canonical order;
* an exact spectral evaluator that rides the correspondence with the free
  Schroedinger flow on the 2-torus: sampling the cubic product on a fine
  enough grid and averaging over equispaced times kills every non-resonant
  term exactly, because all phase differences are integers of bounded size.

The spectral path is exact up to roundoff (not an approximation), which is
what makes the two paths usable as mutual oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from . import _kernels
from .errors import BudgetError
from .lattice import FrequencyWindow, ResonantTable, _xmajor_mode_indices

#: default ceiling for grid-size^2 x time-samples in the spectral evaluator
DEFAULT_G2M_CAP = 500_000_000

#: time-sample chunk for the spectral evaluator (fixed: results must not
#: depend on memory pressure)
_SPECTRAL_CHUNK = 64


@dataclass
class CoefSequence:
    """Complex amplitudes on a frequency window (dense, storage order)."""

    window: FrequencyWindow
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.window.n_modes,):
            raise ValueError(
                f"expected {self.window.n_modes} amplitudes, got shape {self.values.shape}"
            )

    @classmethod
    def zeros(cls, window: FrequencyWindow) -> "CoefSequence":
        return cls(window, np.zeros(window.n_modes, dtype=np.complex128))

    @classmethod
    def from_dict(cls, window: FrequencyWindow, amplitudes: dict) -> "CoefSequence":
        seq = cls.zeros(window)
        for mode, amp in amplitudes.items():
            seq.values[window.index_of(mode)] = amp
        return seq

    def __getitem__(self, mode) -> complex:
        return complex(self.values[self.window.index_of(mode)])

    def __setitem__(self, mode, amp) -> None:
        self.values[self.window.index_of(mode)] = amp

    def copy(self) -> "CoefSequence":
        return CoefSequence(self.window, self.values.copy())


@dataclass
class EstimateReport:
    """Size of F(a) against the product norms that are supposed to control it."""

    beta: float
    r_l2: float  # ||F||_l2 / (||a||_l2^2 ||a||_h^beta)
    r_h1: float  # ||F||_h1 / (||a||_h1 ||a||_h^beta ||a||_l2)
    r_fail: float  # ||F||_l2 / ||a||_l2^3
    r_l2_interp: float  # ||F||_l2 / (||a||_l2^d1 ||a||_h1^(3-d1)), d1 = 3 - 2 beta
    r_h1_interp: float  # ||F||_h1 / (||a||_l2^d2 ||a||_h1^(3-d2)), d2 = 2 - 2 beta


@lru_cache(maxsize=256)
def _hs_weights(K: int, s: float) -> np.ndarray:
    from .lattice import _window_norms_sq

    w = (1.0 + _window_norms_sq(K).astype(np.float64)) ** s
    w.setflags(write=False)
    return w


def norm_hs(a: CoefSequence, s: float) -> float:
    """Weighted sequence norm (sum of (1+|j|^2)^s |a_j|^2)^(1/2); s = 0 is l2."""
    w = _hs_weights(a.window.K, float(s))
    return float(np.sqrt(np.sum(w * (a.values.real**2 + a.values.imag**2))))


@lru_cache(maxsize=None)
def _xmajor_rank(K: int) -> np.ndarray:
    order = _xmajor_mode_indices(K)
    rank = np.empty(order.size, dtype=np.int64)
    rank[order] = np.arange(order.size)
    rank.setflags(write=False)
    return rank


def apply_nonlinearity_direct(a: CoefSequence, table: ResonantTable) -> CoefSequence:
    """F(a) by table contraction, Kahan-compensated in canonical triple order."""
    if table.window != a.window:
        raise ValueError("sequence and table windows differ")
    K = a.window.K
    ar = np.ascontiguousarray(a.values.real)
    ai = np.ascontiguousarray(a.values.imag)
    outr = np.empty(a.window.n_modes)
    outi = np.empty(a.window.n_modes)
    _kernels.contract_canonical(
        table.offsets,
        table.idx1,
        table.idx2,
        table.idx3,
        _xmajor_mode_indices(K),
        _xmajor_rank(K),
        ar,
        ai,
        outr,
        outi,
    )
    return CoefSequence(a.window, outr + 1j * outi)


def apply_nonlinearity_batch(values: np.ndarray, table: ResonantTable) -> np.ndarray:
    """F for a batch of sequences, shape (n_modes, n_seq) -> same shape.

    High-throughput path for measurement campaigns: the two formulaic triple
    families are accumulated in closed form (they telescope to
    (2 sum_k |a_k|^2 - |a_j|^2) a_j), the rectangle triples by lane-batched
    compensated summation in canonical order.  Agrees with
    `apply_nonlinearity_direct` to machine precision; the summation grouping
    differs, so results are not guaranteed bit-identical to it.
    """
    nm, n_seq = values.shape
    if nm != table.window.n_modes:
        raise ValueError("batch and table windows differ")
    L = _kernels.LANES
    out = np.empty_like(values, dtype=np.complex128)
    for c0 in range(0, n_seq, L):
        c1 = min(n_seq, c0 + L)
        lane = np.zeros((nm, L), dtype=np.complex128)
        lane[:, : c1 - c0] = values[:, c0:c1]
        ar = np.ascontiguousarray(lane.real)
        ai = np.ascontiguousarray(lane.imag)
        ntr = np.empty((nm, L))
        nti = np.empty((nm, L))
        _kernels.contract_nontrivial_lanes(
            table.offsets, table.idx1, table.idx2, table.idx3, ar, ai, ntr, nti
        )
        m2 = ar * ar + ai * ai
        s = m2.sum(axis=0)  # total power per lane
        coef = 2.0 * s[None, :] - m2
        fr = coef * ar + ntr
        fi = coef * ai + nti
        out[:, c0:c1] = (fr + 1j * fi)[:, : c1 - c0]
    return out


def spectral_sizes(K: int) -> tuple[int, int]:
    """Grid size and time-sample count that make the quadrature exact.

    Products of three window modes live in [-3K, 3K]^2, so any grid of size
    at least 4K+1 separates them from the window modulo aliasing; the
    resonance phases are integers bounded by 4K^2 in magnitude, so 8K^2 + 1
    equispaced times over a full period null every nonzero phase average.
    """
    G = sfft.next_fast_len(4 * K + 1)
    M = 8 * K * K + 1
    return G, M


def apply_nonlinearity_spectral(
    a: CoefSequence, g2m_cap: int = DEFAULT_G2M_CAP
) -> CoefSequence:
    """F(a) by exact torus quadrature (grid sampling plus time averaging)."""
    K = a.window.K
    G, M = spectral_sizes(K)
    if G * G * M > g2m_cap:
        raise BudgetError(
            f"spectral evaluation needs G^2 M = {G * G * M} > cap {g2m_cap} (K={K})"
        )
    cx, cy = a.window.coords()
    n2 = a.window.norms_sq().astype(np.float64)
    ry = np.mod(cy, G)
    rx = np.mod(cx, G)
    t = 2.0 * np.pi * np.arange(M) / M
    acc = np.zeros(a.window.n_modes, dtype=np.complex128)
    for c0 in range(0, M, _SPECTRAL_CHUNK):
        c1 = min(M, c0 + _SPECTRAL_CHUNK)
        tc = t[c0:c1]
        phased = a.values[None, :] * np.exp(1j * np.outer(tc, n2))
        grids = np.zeros((c1 - c0, G, G), dtype=np.complex128)
        grids[:, ry, rx] = phased
        v = sfft.ifft2(grids, axes=(1, 2)) * (G * G)
        w = (v.real**2 + v.imag**2) * v
        what = sfft.fft2(w, axes=(1, 2)) / (G * G)
        vals = what[:, ry, rx] * np.exp(-1j * np.outer(tc, n2))
        acc += vals.sum(axis=0)
    return CoefSequence(a.window, acc / M)


def weighted_quartic_form(a: CoefSequence, alpha: float, table: ResonantTable) -> complex:
    """Sum over resonant quadruples of (1+|j|^2)^alpha a_j conj(a_j1) a_j2 conj(a_j3).

    Vanishing imaginary part at alpha = 0 and alpha = 1 is an exact index
    symmetry of the quadruple set; intermediate exponents generically break
    it.
    """
    if table.window != a.window:
        raise ValueError("sequence and table windows differ")
    F = apply_nonlinearity_direct(a, table)
    w = _hs_weights(a.window.K, float(alpha))
    return complex(np.sum(w * a.values * np.conj(F.values)))


def _ratios_from_norms(
    beta: float, f_l2: float, f_h1: float, a_l2: float, a_h1: float, a_hb: float
) -> EstimateReport:
    d1 = 3.0 - 2.0 * beta
    d2 = 2.0 - 2.0 * beta
    return EstimateReport(
        beta=beta,
        r_l2=f_l2 / (a_l2**2 * a_hb),
        r_h1=f_h1 / (a_h1 * a_hb * a_l2),
        r_fail=f_l2 / a_l2**3,
        r_l2_interp=f_l2 / (a_l2**d1 * a_h1 ** (3.0 - d1)),
        r_h1_interp=f_h1 / (a_l2**d2 * a_h1 ** (3.0 - d2)),
    )


def estimate_ratios(a: CoefSequence, beta: float, table: ResonantTable) -> EstimateReport:
    """Norm ratios of F(a) against the controlling products (direct evaluation)."""
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    a_l2 = norm_hs(a, 0.0)
    if a_l2 == 0.0:
        raise ValueError("zero sequence: ratios are not applicable")
    F = apply_nonlinearity_direct(a, table)
    return _ratios_from_norms(
        beta,
        norm_hs(F, 0.0),
        norm_hs(F, 1.0),
        a_l2,
        norm_hs(a, 1.0),
        norm_hs(a, beta),
    )


def estimate_ratios_many(
    seqs: np.ndarray, beta: float, table: ResonantTable
) -> list[EstimateReport]:
    """Batched `estimate_ratios` over columns of seqs (n_modes, n_seq)."""
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    K = table.window.K
    w1 = _hs_weights(K, 1.0)
    wb = _hs_weights(K, float(beta))
    F = apply_nonlinearity_batch(seqs, table)
    p = seqs.real**2 + seqs.imag**2
    fp = F.real**2 + F.imag**2
    a_l2 = np.sqrt(p.sum(axis=0))
    if np.any(a_l2 == 0.0):
        raise ValueError("zero sequence: ratios are not applicable")
    a_h1 = np.sqrt((w1[:, None] * p).sum(axis=0))
    a_hb = np.sqrt((wb[:, None] * p).sum(axis=0))
    f_l2 = np.sqrt(fp.sum(axis=0))
    f_h1 = np.sqrt((w1[:, None] * fp).sum(axis=0))
    return [
        _ratios_from_norms(beta, f_l2[i], f_h1[i], a_l2[i], a_h1[i], a_hb[i])
        for i in range(seqs.shape[1])
    ]


@dataclass
class FitResult:
    slope: float
    intercept: float
    rms_residual: float


@dataclass
class FailureScanResult:
    points: list[tuple[int, float]]  # (K, r_fail)
    power_fit: FitResult  # log r ~ slope * log K + intercept, K >= 1
    log_fit: FitResult  # r ~ slope * log K + intercept, K >= 1


def _linfit(x: np.ndarray, y: np.ndarray) -> FitResult:
    if x.size < 2:
        return FitResult(float("nan"), float(y[0]) if y.size else float("nan"), 0.0)
    slope, intercept = np.polyfit(x, y, 1)
    res = y - (slope * x + intercept)
    return FitResult(float(slope), float(intercept), float(np.sqrt(np.mean(res**2))))


def failure_scan(k_list: Sequence[int], g2m_cap: int = DEFAULT_G2M_CAP) -> FailureScanResult:
    """r_fail = ||F(1)||_l2 / ||1||_l2^3 on window indicators, over growing windows.

    Uses the spectral evaluator, so large windows stay affordable.  Fits both
    a power law and a logarithmic model to the growth (reported with
    residuals; the scan itself is the product).
    """
    ks = list(k_list)
    if any(k2 < k1 for k1, k2 in zip(ks, ks[1:])):
        raise ValueError("k_list must be ascending")
    points = []
    for K in ks:
        window = FrequencyWindow(K)
        ones = CoefSequence(window, np.ones(window.n_modes, dtype=np.complex128))
        F = apply_nonlinearity_spectral(ones, g2m_cap=g2m_cap)
        r_fail = norm_hs(F, 0.0) / norm_hs(ones, 0.0) ** 3
        points.append((K, float(r_fail)))
    pos = [(k, r) for k, r in points if k >= 1]
    if len(pos) >= 2:
        karr = np.array([k for k, _ in pos], dtype=float)
        rarr = np.array([r for _, r in pos], dtype=float)
        power = _linfit(np.log(karr), np.log(rarr))
        logm = _linfit(np.log(karr), rarr)
    else:
        power = logm = FitResult(float("nan"), float("nan"), float("nan"))
    return FailureScanResult(points, power, logm)
