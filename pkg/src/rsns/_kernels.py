"""Compiled inner loops for resonant contractions.

Two workload shapes share the same resonance structure:

* sequence contraction: one complex amplitude per mode, very large triple
  tables, compensated (Kahan) accumulation in canonical triple order;
* pointwise field contraction: one amplitude per mode *per grid point*,
  small windows, throughput-bound.

The pointwise kernels factor the rectangle couplings through diagonal
buckets (pairs sharing vector sum and squared-norm sum), which turns the
per-point cost from O(#triples) into O(#pairs), and process grid points in
short lanes so the compiler can keep everything in registers.
"""

from __future__ import annotations

import numpy as np
from numba import njit

#: pixel-lane block length for the pointwise kernels
BLOCK = 128

#: sequence-lane width for the batched table contraction
LANES = 8


# ---------------------------------------------------------------------------
# sequence contraction, compensated, canonical order
# ---------------------------------------------------------------------------


@njit(cache=True, fastmath=False, boundscheck=False)
def contract_canonical(offsets, i1, i2, i3, xmaj, rank, ar, ai, outr, outi):
    """Kahan-compensated triple contraction in full canonical order.

    Streams the stored rectangle triples and synthesizes the two formulaic
    families inline at their canonical positions, so each output is summed
    in exactly the lexicographic (j1, j2) order of the full table.
    """
    nm = offsets.size - 1
    for j in range(nm):
        sr = 0.0
        si = 0.0
        cr = 0.0
        ci = 0.0
        t = offsets[j]
        end = offsets[j + 1]
        rank_j = rank[j]
        ajr = ar[j]
        aji = ai[j]
        for b in range(nm):
            i1b = xmaj[b]
            if b == rank_j:
                # family j1 = j: terms a_j |a_k|^2 over k in canonical order
                for c in range(nm):
                    k = xmaj[c]
                    m2 = ar[k] * ar[k] + ai[k] * ai[k]
                    yr = ajr * m2
                    yi = aji * m2
                    dr = yr - cr
                    tr = sr + dr
                    cr = (tr - sr) - dr
                    sr = tr
                    di = yi - ci
                    ti = si + di
                    ci = (ti - si) - di
                    si = ti
            else:
                emitted = False
                while t < end and i1[t] == i1b:
                    q = i2[t]
                    if not emitted and rank[q] > b:
                        # the j2 = j1 member (j1, j1, j) sorts here
                        m2 = ar[i1b] * ar[i1b] + ai[i1b] * ai[i1b]
                        yr = m2 * ajr
                        yi = m2 * aji
                        dr = yr - cr
                        tr = sr + dr
                        cr = (tr - sr) - dr
                        sr = tr
                        di = yi - ci
                        ti = si + di
                        ci = (ti - si) - di
                        si = ti
                        emitted = True
                    p = i1[t]
                    rr = i3[t]
                    xr = ar[p] * ar[q] + ai[p] * ai[q]
                    xi = ai[p] * ar[q] - ar[p] * ai[q]
                    yr = xr * ar[rr] - xi * ai[rr]
                    yi = xr * ai[rr] + xi * ar[rr]
                    dr = yr - cr
                    tr = sr + dr
                    cr = (tr - sr) - dr
                    sr = tr
                    di = yi - ci
                    ti = si + di
                    ci = (ti - si) - di
                    si = ti
                    t += 1
                if not emitted:
                    m2 = ar[i1b] * ar[i1b] + ai[i1b] * ai[i1b]
                    yr = m2 * ajr
                    yi = m2 * aji
                    dr = yr - cr
                    tr = sr + dr
                    cr = (tr - sr) - dr
                    sr = tr
                    di = yi - ci
                    ti = si + di
                    ci = (ti - si) - di
                    si = ti
        outr[j] = sr
        outi[j] = si


@njit(cache=True, fastmath=False, boundscheck=False)
def contract_nontrivial_lanes(offsets, i1, i2, i3, ar, ai, outr, outi):
    """Rectangle-triple contraction for LANES sequences at once.

    ar, ai have shape (n_modes, LANES).  Each lane keeps its own Kahan
    accumulator and consumes the stored triples in canonical order; the
    formulaic families are left to the caller (they have a closed form).
    """
    nm = offsets.size - 1
    sr = np.empty(LANES)
    si = np.empty(LANES)
    cr = np.empty(LANES)
    ci = np.empty(LANES)
    for j in range(nm):
        for l in range(LANES):
            sr[l] = 0.0
            si[l] = 0.0
            cr[l] = 0.0
            ci[l] = 0.0
        for t in range(offsets[j], offsets[j + 1]):
            p = i1[t]
            q = i2[t]
            r = i3[t]
            for l in range(LANES):
                xr = ar[p, l] * ar[q, l] + ai[p, l] * ai[q, l]
                xi = ai[p, l] * ar[q, l] - ar[p, l] * ai[q, l]
                yr = xr * ar[r, l] - xi * ai[r, l]
                yi = xr * ai[r, l] + xi * ar[r, l]
                dr = yr - cr[l]
                tr = sr[l] + dr
                cr[l] = (tr - sr[l]) - dr
                sr[l] = tr
                di = yi - ci[l]
                ti = si[l] + di
                ci[l] = (ti - si[l]) - di
                si[l] = ti
        for l in range(LANES):
            outr[j, l] = sr[l]
            outi[j, l] = si[l]


# ---------------------------------------------------------------------------
# pointwise field contraction
# ---------------------------------------------------------------------------


@njit(cache=True, fastmath=True, boundscheck=False, inline="always")
def _rhs_block(br, bi, m2, rho, qr, qi, src_p, src_q, src_b, row_ptr, gat_k, gat_b, fr, fi):
    """F(u) at BLOCK points for one compact block (all buffers (n, BLOCK))."""
    nm = br.shape[0]
    nb = qr.shape[0]
    for p in range(nm):
        for l in range(BLOCK):
            m2[p, l] = br[p, l] * br[p, l] + bi[p, l] * bi[p, l]
    for l in range(BLOCK):
        rho[l] = 0.0
    for p in range(nm):
        for l in range(BLOCK):
            rho[l] += m2[p, l]
    for b in range(nb):
        for l in range(BLOCK):
            qr[b, l] = 0.0
            qi[b, l] = 0.0
    for t in range(src_p.size):
        p = src_p[t]
        q = src_q[t]
        b = src_b[t]
        for l in range(BLOCK):
            qr[b, l] += br[p, l] * br[q, l] - bi[p, l] * bi[q, l]
            qi[b, l] += br[p, l] * bi[q, l] + bi[p, l] * br[q, l]
    for j in range(nm):
        t0 = row_ptr[j]
        t1 = row_ptr[j + 1]
        # hoist the own-pair correction: the bucket sums double count the
        # (j, k) diagonals, whose total is 2 u_j * sum of |u_k|^2 over the row
        for l in range(BLOCK):
            fr[j, l] = 0.0
        for t in range(t0, t1):
            k = gat_k[t]
            for l in range(BLOCK):
                fr[j, l] += m2[k, l]
        for l in range(BLOCK):
            coef = 2.0 * rho[l] - m2[j, l] - 2.0 * fr[j, l]
            fr[j, l] = coef * br[j, l]
            fi[j, l] = coef * bi[j, l]
        for t in range(t0, t1):
            k = gat_k[t]
            b = gat_b[t]
            for l in range(BLOCK):
                fr[j, l] += 2.0 * (br[k, l] * qr[b, l] + bi[k, l] * qi[b, l])
                fi[j, l] += 2.0 * (br[k, l] * qi[b, l] - bi[k, l] * qr[b, l])


@njit(cache=True, fastmath=True, boundscheck=False)
def pointwise_rhs(ur, ui, n_buckets, src_p, src_q, src_b, row_ptr, gat_k, gat_b, outr, outi):
    """F(u(x))_j on every grid point; ur, ui, outr, outi are (n_modes, n_points)."""
    nm, n_pix = ur.shape
    br = np.empty((nm, BLOCK))
    bi = np.empty((nm, BLOCK))
    m2 = np.empty((nm, BLOCK))
    rho = np.empty(BLOCK)
    qr = np.empty((n_buckets, BLOCK))
    qi = np.empty((n_buckets, BLOCK))
    fr = np.empty((nm, BLOCK))
    fi = np.empty((nm, BLOCK))
    for px0 in range(0, n_pix, BLOCK):
        n = min(BLOCK, n_pix - px0)
        for p in range(nm):
            for l in range(n):
                br[p, l] = ur[p, px0 + l]
                bi[p, l] = ui[p, px0 + l]
            for l in range(n, BLOCK):
                br[p, l] = 0.0
                bi[p, l] = 0.0
        _rhs_block(br, bi, m2, rho, qr, qi, src_p, src_q, src_b, row_ptr, gat_k, gat_b, fr, fi)
        for j in range(nm):
            for l in range(n):
                outr[j, px0 + l] = fr[j, l]
                outi[j, px0 + l] = fi[j, l]


@njit(cache=True, fastmath=True, boundscheck=False)
def pointwise_rhs_mixed(
    Ar, Ai, Br, Bi, Cr, Ci, n_buckets, opair_p, opair_q, opair_b, row_ptr, gat_k, gat_b, outr, outi
):
    """G(A, B, C)_j = sum over triples of A_{j1} conj(B_{j2}) C_{j3}, pointwise.

    Same bucket factorization as `pointwise_rhs` but for three distinct
    fields, so the pair step runs over ordered pairs without the symmetric
    halving.  Used by the projected-identity residual checks.
    """
    nm, n_pix = Ar.shape
    bar = np.empty((nm, BLOCK))
    bai = np.empty((nm, BLOCK))
    bbr = np.empty((nm, BLOCK))
    bbi = np.empty((nm, BLOCK))
    bcr = np.empty((nm, BLOCK))
    bci = np.empty((nm, BLOCK))
    fr = np.empty((nm, BLOCK))
    fi = np.empty((nm, BLOCK))
    qr = np.empty((n_buckets, BLOCK))
    qi = np.empty((n_buckets, BLOCK))
    t1r = np.empty(BLOCK)
    t1i = np.empty(BLOCK)
    t2r = np.empty(BLOCK)
    t2i = np.empty(BLOCK)
    for px0 in range(0, n_pix, BLOCK):
        n = min(BLOCK, n_pix - px0)
        for p in range(nm):
            for l in range(n):
                bar[p, l] = Ar[p, px0 + l]
                bai[p, l] = Ai[p, px0 + l]
                bbr[p, l] = Br[p, px0 + l]
                bbi[p, l] = Bi[p, px0 + l]
                bcr[p, l] = Cr[p, px0 + l]
                bci[p, l] = Ci[p, px0 + l]
            for l in range(n, BLOCK):
                bar[p, l] = 0.0
                bai[p, l] = 0.0
                bbr[p, l] = 0.0
                bbi[p, l] = 0.0
                bcr[p, l] = 0.0
                bci[p, l] = 0.0
        # T1 = sum_k conj(B_k) C_k ; T2 = sum_k A_k conj(B_k)
        for l in range(BLOCK):
            t1r[l] = 0.0
            t1i[l] = 0.0
            t2r[l] = 0.0
            t2i[l] = 0.0
        for k in range(nm):
            for l in range(BLOCK):
                t1r[l] += bbr[k, l] * bcr[k, l] + bbi[k, l] * bci[k, l]
                t1i[l] += bbr[k, l] * bci[k, l] - bbi[k, l] * bcr[k, l]
                t2r[l] += bar[k, l] * bbr[k, l] + bai[k, l] * bbi[k, l]
                t2i[l] += bai[k, l] * bbr[k, l] - bar[k, l] * bbi[k, l]
        for b in range(n_buckets):
            for l in range(BLOCK):
                qr[b, l] = 0.0
                qi[b, l] = 0.0
        for t in range(opair_p.size):
            p = opair_p[t]
            q = opair_q[t]
            b = opair_b[t]
            for l in range(BLOCK):
                qr[b, l] += bar[p, l] * bcr[q, l] - bai[p, l] * bci[q, l]
                qi[b, l] += bar[p, l] * bci[q, l] + bai[p, l] * bcr[q, l]
        for j in range(nm):
            for l in range(BLOCK):
                # formulaic families: A_j T1 + C_j (T2 - A_j conj(B_j))
                ujr = t2r[l] - (bar[j, l] * bbr[j, l] + bai[j, l] * bbi[j, l])
                uji = t2i[l] - (bai[j, l] * bbr[j, l] - bar[j, l] * bbi[j, l])
                fr[j, l] = bar[j, l] * t1r[l] - bai[j, l] * t1i[l] + bcr[j, l] * ujr - bci[j, l] * uji
                fi[j, l] = bar[j, l] * t1i[l] + bai[j, l] * t1r[l] + bcr[j, l] * uji + bci[j, l] * ujr
            for t in range(row_ptr[j], row_ptr[j + 1]):
                k = gat_k[t]
                b = gat_b[t]
                for l in range(BLOCK):
                    # remove the two own pairs (A_j C_k and A_k C_j) from the bucket
                    pr = qr[b, l] - (bar[j, l] * bcr[k, l] - bai[j, l] * bci[k, l]) - (
                        bar[k, l] * bcr[j, l] - bai[k, l] * bci[j, l]
                    )
                    pi = qi[b, l] - (bar[j, l] * bci[k, l] + bai[j, l] * bcr[k, l]) - (
                        bar[k, l] * bci[j, l] + bai[k, l] * bcr[j, l]
                    )
                    fr[j, l] += bbr[k, l] * pr + bbi[k, l] * pi
                    fi[j, l] += bbr[k, l] * pi - bbi[k, l] * pr
            for l in range(n):
                outr[j, px0 + l] = fr[j, l]
                outi[j, px0 + l] = fi[j, l]


@njit(cache=True, fastmath=True, boundscheck=False)
def nonlinear_rk4(ur, ui, dt, nsub, n_buckets, src_p, src_q, src_b, row_ptr, gat_k, gat_b):
    """Integrate du/dt = -i F(u) pointwise over dt with nsub classical RK4 steps.

    Operates in place on (n_modes, n_points) real/imag parts, one pixel block
    at a time so all stage storage stays cache resident.
    """
    nm, n_pix = ur.shape
    h = dt / nsub
    br = np.empty((nm, BLOCK))
    bi = np.empty((nm, BLOCK))
    yr = np.empty((nm, BLOCK))
    yi = np.empty((nm, BLOCK))
    fr = np.empty((nm, BLOCK))
    fi = np.empty((nm, BLOCK))
    kr = np.empty((nm, BLOCK))
    ki = np.empty((nm, BLOCK))
    m2 = np.empty((nm, BLOCK))
    rho = np.empty(BLOCK)
    qr = np.empty((n_buckets, BLOCK))
    qi = np.empty((n_buckets, BLOCK))
    for px0 in range(0, n_pix, BLOCK):
        n = min(BLOCK, n_pix - px0)
        for p in range(nm):
            for l in range(n):
                br[p, l] = ur[p, px0 + l]
                bi[p, l] = ui[p, px0 + l]
            for l in range(n, BLOCK):
                br[p, l] = 0.0
                bi[p, l] = 0.0
        for _ in range(nsub):
            # stage 1: f = F(u); du/dt = -iF -> (dr, di) = (fi, -fr)
            _rhs_block(br, bi, m2, rho, qr, qi, src_p, src_q, src_b, row_ptr, gat_k, gat_b, fr, fi)
            for p in range(nm):
                for l in range(BLOCK):
                    kr[p, l] = fi[p, l]
                    ki[p, l] = -fr[p, l]
                    yr[p, l] = br[p, l] + 0.5 * h * fi[p, l]
                    yi[p, l] = bi[p, l] - 0.5 * h * fr[p, l]
            # stage 2
            _rhs_block(yr, yi, m2, rho, qr, qi, src_p, src_q, src_b, row_ptr, gat_k, gat_b, fr, fi)
            for p in range(nm):
                for l in range(BLOCK):
                    kr[p, l] += 2.0 * fi[p, l]
                    ki[p, l] -= 2.0 * fr[p, l]
                    yr[p, l] = br[p, l] + 0.5 * h * fi[p, l]
                    yi[p, l] = bi[p, l] - 0.5 * h * fr[p, l]
            # stage 3
            _rhs_block(yr, yi, m2, rho, qr, qi, src_p, src_q, src_b, row_ptr, gat_k, gat_b, fr, fi)
            for p in range(nm):
                for l in range(BLOCK):
                    kr[p, l] += 2.0 * fi[p, l]
                    ki[p, l] -= 2.0 * fr[p, l]
                    yr[p, l] = br[p, l] + h * fi[p, l]
                    yi[p, l] = bi[p, l] - h * fr[p, l]
            # stage 4
            _rhs_block(yr, yi, m2, rho, qr, qi, src_p, src_q, src_b, row_ptr, gat_k, gat_b, fr, fi)
            for p in range(nm):
                for l in range(BLOCK):
                    kr[p, l] += fi[p, l]
                    ki[p, l] -= fr[p, l]
                    br[p, l] += (h / 6.0) * kr[p, l]
                    bi[p, l] += (h / 6.0) * ki[p, l]
        for p in range(nm):
            for l in range(n):
                ur[p, px0 + l] = br[p, l]
                ui[p, px0 + l] = bi[p, l]
