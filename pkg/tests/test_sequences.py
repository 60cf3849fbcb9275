import math

import numpy as np
import pytest

from rsns import (
    CoefSequence,
    FrequencyWindow,
    apply_nonlinearity_batch,
    apply_nonlinearity_direct,
    apply_nonlinearity_spectral,
    build_table,
    estimate_ratios,
    estimate_ratios_many,
    failure_scan,
    norm_hs,
    weighted_quartic_form,
)
from rsns.campaigns import HALF_WEIGHT_WITNESS

WITNESS_IM = 4.0 * math.sqrt(2.0) - 2.0 * math.sqrt(3.0) - 2.0  # = 0.19275...


def _random_unit(window, seed, norm_s=0.0):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(window.n_modes) + 1j * rng.standard_normal(window.n_modes)
    seq = CoefSequence(window, vals)
    seq.values /= norm_hs(seq, norm_s)
    return seq


def test_norm_hs_single_mode():
    w = FrequencyWindow(4)
    a = CoefSequence.from_dict(w, {(3, 4): 2.0})
    assert norm_hs(a, 1.0) == pytest.approx(2.0 * math.sqrt(26.0), rel=1e-14)
    assert norm_hs(a, 0.0) == pytest.approx(2.0, rel=1e-14)


def test_norm_hs_two_modes():
    w = FrequencyWindow(1)
    a = CoefSequence.from_dict(w, {(0, 0): 1.0, (1, 0): 1.0})
    assert norm_hs(a, 1.0) == pytest.approx(math.sqrt(3.0), rel=1e-14)


def test_direct_single_mode_cubes():
    w = FrequencyWindow(2)
    table = build_table(w)
    c = 1.3 - 0.4j
    a = CoefSequence.from_dict(w, {(0, 0): c})
    F = apply_nonlinearity_direct(a, table)
    assert F[(0, 0)] == pytest.approx(abs(c) ** 2 * c, rel=1e-14)
    F.values[w.index_of((0, 0))] = 0.0
    assert np.max(np.abs(F.values)) == 0.0


def test_direct_unit_square_indicator():
    # brute-force count over the four-mode support gives 9 at the origin
    w = FrequencyWindow(1)
    table = build_table(w)
    a = CoefSequence.from_dict(w, {(0, 0): 1.0, (1, 0): 1.0, (0, 1): 1.0, (1, 1): 1.0})
    support = [(0, 0), (1, 0), (0, 1), (1, 1)]
    count = 0
    from rsns import is_resonant

    for j1 in support:
        for j2 in support:
            for j3 in support:
                if is_resonant((0, 0), j1, j2, j3):
                    count += 1
    F = apply_nonlinearity_direct(a, table)
    assert count == 9
    assert F[(0, 0)] == pytest.approx(9.0, rel=1e-13)


def test_direct_two_mode_closed_form():
    w = FrequencyWindow(3)
    table = build_table(w)
    p, q = (0, 0), (2, 1)
    ap, aq = 0.7 + 0.2j, -0.3 + 0.9j
    a = CoefSequence.from_dict(w, {p: ap, q: aq})
    F = apply_nonlinearity_direct(a, table)
    assert F[p] == pytest.approx((abs(ap) ** 2 + 2 * abs(aq) ** 2) * ap, rel=1e-13)
    assert F[q] == pytest.approx((abs(aq) ** 2 + 2 * abs(ap) ** 2) * aq, rel=1e-13)


def test_spectral_single_mode():
    w = FrequencyWindow(1)
    a = CoefSequence.from_dict(w, {(0, 0): 1.0})
    F = apply_nonlinearity_spectral(a)
    assert F[(0, 0)] == pytest.approx(1.0, abs=1e-13)


def test_spectral_matches_direct_random():
    w = FrequencyWindow(4)
    table = build_table(w)
    for seed in range(20):
        a = _random_unit(w, seed)
        fd = apply_nonlinearity_direct(a, table)
        fs = apply_nonlinearity_spectral(a)
        err = norm_hs(CoefSequence(w, fs.values - fd.values), 0.0) / norm_hs(fd, 0.0)
        assert err <= 1e-10


def test_spectral_two_mode_closed_form():
    w = FrequencyWindow(2)
    p, q = (0, 0), (2, 1)
    ap, aq = 0.8, 0.5j
    a = CoefSequence.from_dict(w, {p: ap, q: aq})
    F = apply_nonlinearity_spectral(a)
    assert F[p] == pytest.approx((abs(ap) ** 2 + 2 * abs(aq) ** 2) * ap, abs=1e-12)


def test_batch_matches_direct():
    w = FrequencyWindow(3)
    table = build_table(w)
    seqs = np.column_stack([_random_unit(w, s).values for s in range(11)])
    FB = apply_nonlinearity_batch(seqs, table)
    for i in range(11):
        fd = apply_nonlinearity_direct(CoefSequence(w, seqs[:, i].copy()), table)
        assert np.max(np.abs(FB[:, i] - fd.values)) <= 1e-13 * np.max(np.abs(fd.values))


@pytest.mark.parametrize("alpha", [0.0, 1.0])
def test_quartic_form_symmetry(alpha):
    w = FrequencyWindow(4)
    table = build_table(w)
    for seed in range(10):
        a = _random_unit(w, seed, norm_s=1.0)
        v = weighted_quartic_form(a, alpha, table)
        assert abs(v.imag) <= 1e-12  # h1 norm is 1


def test_quartic_form_half_weight_witness():
    w = FrequencyWindow(1)
    table = build_table(w)
    a = CoefSequence.from_dict(w, HALF_WEIGHT_WITNESS)
    v = weighted_quartic_form(a, 0.5, table)
    assert v.imag == pytest.approx(WITNESS_IM, rel=1e-12)
    assert abs(v.imag) / norm_hs(a, 1.0) ** 4 >= 1e-3


def test_estimate_ratios_single_mode():
    w = FrequencyWindow(1)
    table = build_table(w)
    a = CoefSequence.from_dict(w, {(0, 0): 1.0})
    rep = estimate_ratios(a, 0.9, table)
    assert rep.r_l2 == pytest.approx(1.0, rel=1e-13)
    assert rep.r_h1 == pytest.approx(1.0, rel=1e-13)
    assert rep.r_fail == pytest.approx(1.0, rel=1e-13)


def test_estimate_ratios_rejects_zero():
    w = FrequencyWindow(1)
    table = build_table(w)
    with pytest.raises(ValueError, match="zero"):
        estimate_ratios(CoefSequence.zeros(w), 0.9, table)
    with pytest.raises(ValueError):
        estimate_ratios(CoefSequence.from_dict(w, {(0, 0): 1.0}), 1.5, table)


def test_estimate_ratios_many_matches_single():
    w = FrequencyWindow(2)
    table = build_table(w)
    seqs = np.column_stack([_random_unit(w, s).values for s in range(5)])
    many = estimate_ratios_many(seqs, 0.875, table)
    for i, rep in enumerate(many):
        one = estimate_ratios(CoefSequence(w, seqs[:, i].copy()), 0.875, table)
        assert rep.r_l2 == pytest.approx(one.r_l2, rel=1e-12)
        assert rep.r_h1 == pytest.approx(one.r_h1, rel=1e-12)
        assert rep.r_l2_interp == pytest.approx(one.r_l2_interp, rel=1e-12)


def test_norm_interpolation_log_convexity():
    w = FrequencyWindow(5)
    for seed in range(10):
        a = _random_unit(w, seed)
        for beta in (0.25, 0.5, 0.8, 0.95):
            lhs = norm_hs(a, beta)
            rhs = norm_hs(a, 0.0) ** (1 - beta) * norm_hs(a, 1.0) ** beta
            assert lhs <= rhs * (1 + 1e-12)


def test_sequence_flow_conserves_invariants():
    # i da/dt = F(a): RK4 with small steps; quadratic and quartic invariants
    w = FrequencyWindow(2)
    table = build_table(w)
    a = _random_unit(w, 3)

    def rhs(v):
        return -1j * apply_nonlinearity_direct(CoefSequence(w, v), table).values

    cx, cy = w.coords()
    n2 = w.norms_sq()

    def invariants(v):
        p = np.abs(v) ** 2
        quart = weighted_quartic_form(CoefSequence(w, v.copy()), 0.0, table)
        return (
            p.sum(),
            float((cx * p).sum()),
            float((cy * p).sum()),
            float((n2 * p).sum()),
            quart.real,
        )

    v = a.values.copy()
    before = invariants(v)
    dt = 1e-3
    for _ in range(100):
        k1 = rhs(v)
        k2 = rhs(v + 0.5 * dt * k1)
        k3 = rhs(v + 0.5 * dt * k2)
        k4 = rhs(v + dt * k3)
        v = v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    after = invariants(v)
    for b, f in zip(before, after):
        assert abs(f - b) <= 1e-9 * max(1.0, abs(b))


def test_failure_scan_small():
    res = failure_scan([0])
    assert res.points == [(0, pytest.approx(1.0, abs=1e-12))]
    res = failure_scan([4, 8])
    assert res.points[1][1] > res.points[0][1]


def test_failure_scan_requires_ascending():
    with pytest.raises(ValueError):
        failure_scan([8, 4])
