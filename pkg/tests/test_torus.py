import numpy as np
import pytest

from rsns import (
    CoefSequence,
    FrequencyWindow,
    annulus_modes,
    bilinear_measure,
    build_table,
    cubic_pairing_quadrature,
    norm_hs,
    strichartz_l4_measure,
    torus_propagate,
)
from rsns.torus import _draw_annulus, _l4_norm_annulus
from rsns.seeding import derive_rng


def _random_seq(window, seed):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(window.n_modes) + 1j * rng.standard_normal(window.n_modes)
    return CoefSequence(window, vals / np.linalg.norm(vals))


def test_constant_mode_is_constant_field():
    w = FrequencyWindow(1)
    a = CoefSequence.from_dict(w, {(0, 0): 1.0})
    for t in (0.0, 0.37, 2.0):
        f = torus_propagate(a, t, 8)
        assert np.allclose(f.values, 1.0, atol=1e-13)


def test_full_period_is_identity():
    w = FrequencyWindow(2)
    a = _random_seq(w, 0)
    f0 = torus_propagate(a, 0.0, 12)
    f1 = torus_propagate(a, 2.0 * np.pi, 12)
    assert np.max(np.abs(f1.values - f0.values)) <= 1e-12 * np.max(np.abs(f0.values))


def test_single_mode_phase():
    w = FrequencyWindow(1)
    a = CoefSequence.from_dict(w, {(1, 0): 1.0})
    G = 8
    f = torus_propagate(a, np.pi / 2.0, G)
    x = 2.0 * np.pi * np.arange(G) / G
    expected = np.exp(1j * x)[None, :] * np.exp(1j * np.pi / 2.0)
    assert np.max(np.abs(f.values - expected)) <= 1e-12


def test_propagator_unitarity():
    w = FrequencyWindow(3)
    a = _random_seq(w, 1)
    for t in (0.0, 0.5, 4.0):
        f = torus_propagate(a, t, 16)
        assert f.l2_norm() == pytest.approx(2.0 * np.pi * norm_hs(a, 0.0), rel=1e-12)


def test_group_law():
    w = FrequencyWindow(2)
    a = _random_seq(w, 2)
    s, t = 0.3, 0.9
    f_direct = torus_propagate(a, s + t, 12)
    advanced = CoefSequence(w, a.values * np.exp(1j * w.norms_sq() * s))
    f_two = torus_propagate(advanced, t, 12)
    assert np.max(np.abs(f_direct.values - f_two.values)) <= 1e-12


def test_field_projection_on_construction():
    from rsns import TorusField

    w = FrequencyWindow(1)
    rng = np.random.default_rng(3)
    samples = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    f = TorusField(16, samples, w)
    coeffs = np.fft.fft2(f.values) / 256.0
    mask = np.zeros((16, 16), bool)
    cx, cy = w.coords()
    mask[np.mod(cy, 16), np.mod(cx, 16)] = True
    assert np.max(np.abs(coeffs[~mask])) <= 1e-12


def test_pairing_quadrature_matches_table():
    w = FrequencyWindow(3)
    table = build_table(w)
    a = _random_seq(w, 4)
    b = _random_seq(w, 5)
    from rsns import apply_nonlinearity_direct

    F = apply_nonlinearity_direct(a, table)
    expected = complex(np.sum(np.conj(b.values) * F.values))
    got = cubic_pairing_quadrature(a, b)
    assert abs(got - expected) <= 1e-10 * max(1.0, abs(expected))


def test_annulus_modes_exact():
    for N in (4, 8, 16):
        m = annulus_modes(N)
        n2 = m[:, 0] ** 2 + m[:, 1] ** 2
        assert np.all(4 * n2 > N * N)
        assert np.all(n2 <= N * N)


def test_l4_single_mode_normalization():
    for N in (4, 8):
        modes = np.array([[N, 0]])
        vals = np.array([1.0 + 0.0j])
        ratio = _l4_norm_annulus(modes, vals, N, g2m_cap=10**9)
        assert ratio == pytest.approx((2.0 * np.pi) ** 0.75, rel=1e-12)


def test_bilinear_single_mode_normalization():
    # one mode against one mode: |uv| is constant, so the norm is the measure factor
    from rsns.torus import _quartic_sizes
    import scipy.fft as sfft

    N1, N2 = 4, 4
    G = sfft.next_fast_len(2 * (N1 + N2) + 1)
    u = np.zeros((G, G), complex)
    # direct check of the measured constant on the quadrature grid
    res = bilinear_measure(4, 4, trials=1, seed=0)
    # random unit data need not be constant, so only the scale is pinned here
    assert res.ratio_max <= (2.0 * np.pi) ** 1.5 * 1.5


def test_strichartz_reproducible():
    r1 = strichartz_l4_measure([4], trials=3, seed=42)
    r2 = strichartz_l4_measure([4], trials=3, seed=42)
    assert np.array_equal(r1.points[0].ratios, r2.points[0].ratios)
    r3 = strichartz_l4_measure([4], trials=3, seed=43)
    assert not np.array_equal(r1.points[0].ratios, r3.points[0].ratios)


def test_bilinear_reproducible_and_ordered():
    r1 = bilinear_measure(8, 4, trials=2, seed=7)
    r2 = bilinear_measure(8, 4, trials=2, seed=7)
    assert np.array_equal(r1.ratios, r2.ratios)
    with pytest.raises(ValueError):
        bilinear_measure(4, 8, trials=1, seed=0)


def test_draw_annulus_unit_norm():
    modes, vals = _draw_annulus(8, derive_rng(0, "x", 0))
    assert np.linalg.norm(vals) == pytest.approx(1.0, rel=1e-12)
    assert len(modes) == len(vals)
