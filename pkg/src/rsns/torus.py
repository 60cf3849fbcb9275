"""Free Schroedinger flow on the 2-torus and space-time norm measurements.

Conventions (fixed package-wide): a field with coefficients a_j is
sum_j a_j exp(i j.x), the flow advances coefficient j by the phase
exp(+i |j|^2 t), and L^2(T^2) of a sampled field is the grid mean of |v|^2
times (2 pi)^2.  With these choices the flow is unitary up to the constant
2 pi against the coefficient l2 norm, and one full period is t = 2 pi.

All space-time integrals here are *exact* quadratures: integrands built from
finitely many lattice modes have integer frequency content of known extent,
so a fine enough grid and enough equispaced time samples reproduce the
integral to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .errors import BudgetError
from .lattice import FrequencyWindow
from .seeding import derive_rng
from .sequences import CoefSequence, FitResult, _linfit

DEFAULT_G2M_CAP = 500_000_000

_TIME_CHUNK = 64


@dataclass
class TorusField:
    """Samples of a band-limited field on the G x G torus grid.

    Construction projects onto the declared window (out-of-window Fourier
    content is zeroed), so the band limit is an invariant, not a promise.
    """

    G: int
    values: np.ndarray
    window: FrequencyWindow

    def __post_init__(self) -> None:
        if self.G < self.window.size:
            raise ValueError(
                f"grid {self.G} too small for window K={self.window.K} (need >= {self.window.size})"
            )
        self.values = np.ascontiguousarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.G, self.G):
            raise ValueError(f"expected ({self.G}, {self.G}) samples")
        coeffs = sfft.fft2(self.values) / (self.G * self.G)
        mask = np.zeros((self.G, self.G), dtype=bool)
        cx, cy = self.window.coords()
        mask[np.mod(cy, self.G), np.mod(cx, self.G)] = True
        coeffs[~mask] = 0.0
        self.values = sfft.ifft2(coeffs) * (self.G * self.G)

    def l2_norm(self) -> float:
        """L^2(T^2) norm under the grid-mean convention."""
        return float(2.0 * np.pi * np.sqrt(np.mean(self.values.real**2 + self.values.imag**2)))

    def coefficients(self) -> CoefSequence:
        coeffs = sfft.fft2(self.values) / (self.G * self.G)
        cx, cy = self.window.coords()
        return CoefSequence(self.window, coeffs[np.mod(cy, self.G), np.mod(cx, self.G)])


def _field_samples(values: np.ndarray, window: FrequencyWindow, t: float, G: int) -> np.ndarray:
    cx, cy = window.coords()
    n2 = window.norms_sq().astype(np.float64)
    grid = np.zeros((G, G), dtype=np.complex128)
    grid[np.mod(cy, G), np.mod(cx, G)] = values * np.exp(1j * n2 * t)
    return sfft.ifft2(grid) * (G * G)


def torus_propagate(a: CoefSequence, t: float, G: int) -> TorusField:
    """Sample sum_j a_j exp(i j.x + i |j|^2 t) on the G x G grid."""
    if G < a.window.size:
        raise ValueError(f"grid {G} too small for window K={a.window.K}")
    return TorusField(G, _field_samples(a.values, a.window, t, G), a.window)


def annulus_modes(N: int) -> np.ndarray:
    """Integer modes with N/2 < |j| <= N, shape (n, 2); exact comparisons."""
    r = np.arange(-N, N + 1)
    gx, gy = np.meshgrid(r, r, indexing="xy")
    n2 = gx * gx + gy * gy
    keep = (4 * n2 > N * N) & (n2 <= N * N)
    return np.column_stack([gx[keep], gy[keep]])


def _draw_annulus(N: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Unit-l2 complex Gaussian data on the dyadic annulus at N; returns (modes, values)."""
    modes = annulus_modes(N)
    vals = rng.standard_normal(len(modes)) + 1j * rng.standard_normal(len(modes))
    vals /= np.linalg.norm(vals)
    return modes, vals


def _quartic_sizes(N: int) -> tuple[int, int]:
    # |v|^4 has spatial modes in [-4N, 4N] and integer time phases in
    # [-2N^2, 2N^2]; the sizes below are exact with margin.
    return sfft.next_fast_len(4 * N + 1), 8 * N * N + 1


@dataclass
class StrichartzPoint:
    N: int
    ratios: np.ndarray
    ratio_max: float
    ratio_mean: float


@dataclass
class StrichartzResult:
    points: list[StrichartzPoint]
    exponent_max: FitResult  # slope of log max-ratio vs log N
    exponent_mean: FitResult


def _l4_norm_annulus(modes: np.ndarray, vals: np.ndarray, N: int, g2m_cap: int) -> float:
    G, M = _quartic_sizes(N)
    if G * G * M > g2m_cap:
        raise BudgetError(f"L4 quadrature needs G^2 M = {G * G * M} > cap {g2m_cap} (N={N})")
    ry = np.mod(modes[:, 1], G)
    rx = np.mod(modes[:, 0], G)
    n2 = (modes[:, 0] ** 2 + modes[:, 1] ** 2).astype(np.float64)
    t = 2.0 * np.pi * np.arange(M) / M
    total = 0.0
    for c0 in range(0, M, _TIME_CHUNK):
        c1 = min(M, c0 + _TIME_CHUNK)
        phased = vals[None, :] * np.exp(1j * np.outer(t[c0:c1], n2))
        grids = np.zeros((c1 - c0, G, G), dtype=np.complex128)
        grids[:, ry, rx] = phased
        v = sfft.ifft2(grids, axes=(1, 2)) * (G * G)
        p = v.real**2 + v.imag**2
        total += float(np.sum(p * p))
    integral = (2.0 * np.pi) ** 3 * total / (M * G * G)
    return integral**0.25


def strichartz_l4_measure(
    n_list: Sequence[int],
    trials: int,
    seed: int,
    g2m_cap: int = DEFAULT_G2M_CAP,
) -> StrichartzResult:
    """L^4 space-time size of the free flow from unit annulus data, per dyadic N.

    Each trial draws unit-l2 Gaussian data supported on N/2 < |j| <= N and
    measures ||v||_{L^4} over one period by exact quadrature.  The fitted
    log-log slope across N summarizes the growth.
    """
    points = []
    for N in n_list:
        ratios = np.empty(trials)
        for trial in range(trials):
            modes, vals = _draw_annulus(N, derive_rng(seed, "strichartz-l4", N, trial))
            ratios[trial] = _l4_norm_annulus(modes, vals, N, g2m_cap)
        points.append(
            StrichartzPoint(N, ratios, float(ratios.max()), float(ratios.mean()))
        )
    ns = np.array([p.N for p in points], dtype=float)
    fit_max = _linfit(np.log(ns), np.log(np.array([p.ratio_max for p in points])))
    fit_mean = _linfit(np.log(ns), np.log(np.array([p.ratio_mean for p in points])))
    return StrichartzResult(points, fit_max, fit_mean)


@dataclass
class BilinearResult:
    N1: int
    N2: int
    ratios: np.ndarray
    ratio_max: float
    ratio_mean: float


def bilinear_measure(
    N1: int,
    N2: int,
    trials: int,
    seed: int,
    g2m_cap: int = DEFAULT_G2M_CAP,
) -> BilinearResult:
    """||e^{itL}u0 . e^{itL}v0||_{L^2} over one period, unit annulus data.

    u0 lives on the annulus at N1, v0 at N2 <= N1; the interesting content is
    how weakly the measured ratio depends on N1.
    """
    if N2 > N1:
        raise ValueError("need N2 <= N1")
    G = sfft.next_fast_len(2 * (N1 + N2) + 1)
    M = 2 * (N1 * N1 + N2 * N2) + 1
    if G * G * M > g2m_cap:
        raise BudgetError(f"bilinear quadrature needs G^2 M = {G * G * M} > cap {g2m_cap}")
    t = 2.0 * np.pi * np.arange(M) / M
    ratios = np.empty(trials)
    for trial in range(trials):
        rng = derive_rng(seed, "bilinear", N1, N2, trial)
        um, uv = _draw_annulus(N1, rng)
        vm, vv = _draw_annulus(N2, rng)
        ury, urx = np.mod(um[:, 1], G), np.mod(um[:, 0], G)
        vry, vrx = np.mod(vm[:, 1], G), np.mod(vm[:, 0], G)
        un2 = (um[:, 0] ** 2 + um[:, 1] ** 2).astype(np.float64)
        vn2 = (vm[:, 0] ** 2 + vm[:, 1] ** 2).astype(np.float64)
        total = 0.0
        for c0 in range(0, M, _TIME_CHUNK):
            c1 = min(M, c0 + _TIME_CHUNK)
            tc = t[c0:c1]
            gu = np.zeros((c1 - c0, G, G), dtype=np.complex128)
            gu[:, ury, urx] = uv[None, :] * np.exp(1j * np.outer(tc, un2))
            gv = np.zeros((c1 - c0, G, G), dtype=np.complex128)
            gv[:, vry, vrx] = vv[None, :] * np.exp(1j * np.outer(tc, vn2))
            u = sfft.ifft2(gu, axes=(1, 2)) * (G * G)
            v = sfft.ifft2(gv, axes=(1, 2)) * (G * G)
            w = u * v
            total += float(np.sum(w.real**2 + w.imag**2))
        integral = (2.0 * np.pi) ** 3 * total / (M * G * G)
        ratios[trial] = np.sqrt(integral)
    return BilinearResult(N1, N2, ratios, float(ratios.max()), float(ratios.mean()))


def cubic_pairing_quadrature(a: CoefSequence, b: CoefSequence) -> complex:
    """(2 pi)^-3 integral of |v|^2 v conj(g) over one period, v from a, g from b.

    Exact quadrature; equals the table pairing sum_j conj(b_j) F(a)_j, which
    is what ties the spectral evaluator to the resonance table.
    """
    if a.window != b.window:
        raise ValueError("windows differ")
    K = a.window.K
    G = sfft.next_fast_len(4 * K + 1)
    M = 8 * K * K + 1
    cx, cy = a.window.coords()
    n2 = a.window.norms_sq().astype(np.float64)
    ry, rx = np.mod(cy, G), np.mod(cx, G)
    t = 2.0 * np.pi * np.arange(M) / M
    total = 0.0 + 0.0j
    for c0 in range(0, M, _TIME_CHUNK):
        c1 = min(M, c0 + _TIME_CHUNK)
        tc = t[c0:c1]
        phase = np.exp(1j * np.outer(tc, n2))
        ga = np.zeros((c1 - c0, G, G), dtype=np.complex128)
        ga[:, ry, rx] = a.values[None, :] * phase
        gb = np.zeros((c1 - c0, G, G), dtype=np.complex128)
        gb[:, ry, rx] = b.values[None, :] * phase
        v = sfft.ifft2(ga, axes=(1, 2)) * (G * G)
        g = sfft.ifft2(gb, axes=(1, 2)) * (G * G)
        total += complex(np.sum((v.real**2 + v.imag**2) * v * np.conj(g)))
    return total / (M * G * G)
