import numpy as np
import pytest

from rsns import (
    BudgetError,
    ConfigError,
    FrequencyWindow,
    ModeIndex,
    TripleKind,
    build_table,
    circle_lattice_points,
    circle_tail_sum,
    enumerate_triples,
    enumerate_triples_oracle,
    is_resonant,
)


def test_is_resonant_rectangle_corners():
    assert is_resonant((0, 0), (1, 0), (1, 1), (0, 1))


def test_is_resonant_trivial_family():
    assert is_resonant((2, 3), (2, 3), (7, -1), (7, -1))


def test_is_resonant_rejects_momentum_mismatch():
    assert not is_resonant((0, 0), (1, 0), (0, 0), (0, 1))


def test_is_resonant_huge_components_exact():
    # pure-integer arithmetic: no overflow at any magnitude
    big = 2**30
    assert is_resonant((big, 0), (big, 0), (5, 7), (5, 7))


def test_enumerate_k0_single_triple():
    w = FrequencyWindow(0)
    triples = enumerate_triples((0, 0), w)
    assert triples == [
        (ModeIndex(0, 0), ModeIndex(0, 0), ModeIndex(0, 0), TripleKind.TRIVIAL_J1)
    ]


def test_enumerate_k1_counts():
    w = FrequencyWindow(1)
    triples = enumerate_triples((0, 0), w)
    assert len(triples) == 25
    trivial = [t for t in triples if t.kind != TripleKind.NONTRIVIAL]
    assert len(trivial) == 17  # 2 * 9 - 1
    assert len(triples) - len(trivial) == 8


@pytest.mark.parametrize("K", [0, 1, 2, 3, 5])
def test_fast_enumeration_matches_oracle(K):
    w = FrequencyWindow(K)
    for j in w.modes():
        fast = enumerate_triples(j, w)
        oracle = enumerate_triples_oracle(j, w)
        assert fast == oracle


@pytest.mark.parametrize("j", [(0, 0), (2, -3), (3, 3)])
def test_corner_and_interior_j(j):
    w = FrequencyWindow(3)
    assert enumerate_triples(j, w) == enumerate_triples_oracle(j, w)


def test_trivial_count_formula():
    for K in (1, 2, 4):
        w = FrequencyWindow(K)
        for j in [(0, 0), (K, K), (-K, 1 if K >= 1 else 0)]:
            triples = enumerate_triples(j, w)
            trivial = sum(1 for t in triples if t.kind != TripleKind.NONTRIVIAL)
            assert trivial == 2 * w.n_modes - 1


def test_triple_identities_hold_exactly():
    w = FrequencyWindow(3)
    for j in [(0, 0), (1, -2), (3, 3)]:
        jm = ModeIndex(*j)
        for t in enumerate_triples(j, w):
            assert t.j1.x - t.j2.x + t.j3.x == jm.x
            assert t.j1.y - t.j2.y + t.j3.y == jm.y
            assert t.j1.norm_sq() - t.j2.norm_sq() + t.j3.norm_sq() == jm.norm_sq()
            # weight identity on the quadruple
            assert jm.norm_sq() + t.j2.norm_sq() == t.j1.norm_sq() + t.j3.norm_sq()


def test_index_symmetries_of_resonant_quadruples():
    w = FrequencyWindow(4)
    rng = np.random.default_rng(5)
    modes = list(w.modes())
    for _ in range(50):
        j = modes[rng.integers(len(modes))]
        triples = enumerate_triples(j, w)
        t = triples[rng.integers(len(triples))]
        # (j, j1, j2, j3) resonant implies (j2, j3, j, j1) and (j1, j, j3, j2)
        assert is_resonant(t.j2, t.j3, j, t.j1)
        assert is_resonant(t.j1, j, t.j3, t.j2)


def test_table_matches_enumeration():
    w = FrequencyWindow(2)
    table = build_table(w)
    for j in w.modes():
        assert table.triples_for(j) == enumerate_triples(j, w)
    assert table.counts.total == sum(len(enumerate_triples(j, w)) for j in w.modes())


def test_table_counts_k1():
    table = build_table(FrequencyWindow(1))
    assert (table.counts.total, table.counts.trivial, table.counts.nontrivial) == (233, 153, 80)


def test_table_supergrowth():
    # the rectangle family grows super-quartically (the log factor); the
    # formulaic families grow exactly like 2(2K+1)^4 - (2K+1)^2, whose
    # window ratio sits just below 2^4, so the total lands at ~15.3
    t4 = build_table(FrequencyWindow(4))
    t8 = build_table(FrequencyWindow(8))
    assert t8.counts.nontrivial / t4.counts.nontrivial > 2**4
    assert t8.counts.total / t4.counts.total > 12.0


def test_table_capacity_error():
    with pytest.raises(BudgetError):
        build_table(FrequencyWindow(16), memory_cap_bytes=1000)


def test_table_k_cap():
    with pytest.raises(ConfigError):
        build_table(FrequencyWindow(65))


def test_triples_view_mapping():
    w = FrequencyWindow(1)
    table = build_table(w)
    assert len(table.triples) == 9
    assert table.triples[(0, 0)] == enumerate_triples((0, 0), w)


def test_circle_points_radius_five():
    pts = circle_lattice_points((0, 0), 100)
    assert len(pts) == 12
    expected = {(3, 4), (3, -4), (-3, 4), (-3, -4), (4, 3), (4, -3), (-4, 3), (-4, -3),
                (5, 0), (-5, 0), (0, 5), (0, -5)}
    assert set(map(tuple, pts)) == expected
    assert pts == sorted(pts)


def test_circle_points_no_representation():
    assert circle_lattice_points((0, 0), 12) == []


def test_circle_points_half_integer_center():
    assert [tuple(p) for p in circle_lattice_points((1, 0), 1)] == [(0, 0), (1, 0)]


def test_circle_points_satisfy_equation_and_symmetry():
    rng = np.random.default_rng(0)
    for _ in range(20):
        c2 = (int(rng.integers(-9, 10)), int(rng.integers(-9, 10)))
        p = (int(rng.integers(-30, 31)), int(rng.integers(-30, 31)))
        r4 = (2 * p[0] - c2[0]) ** 2 + (2 * p[1] - c2[1]) ** 2
        pts = circle_lattice_points(c2, r4)
        assert ModeIndex(*p) in pts
        for q in pts:
            assert (2 * q.x - c2[0]) ** 2 + (2 * q.y - c2[1]) ** 2 == r4
    # centered circles are closed under the dihedral symmetries
    pts = set(map(tuple, circle_lattice_points((0, 0), 4 * 25)))
    for (x, y) in list(pts):
        for im in ((y, x), (-x, y), (x, -y), (-y, -x)):
            assert im in pts


def test_circle_tail_sum_radius_five():
    out = circle_tail_sum((0, 0), 100, A=1.0, beta=1.0)
    assert out["sum"] == pytest.approx(12.0 / 26.0, rel=1e-12)
    assert out["bound_ratio"] == pytest.approx((12.0 / 26.0) / 1.0 ** (-1.0), rel=1e-12)


def test_circle_tail_sum_empty_tail():
    out = circle_tail_sum((0, 0), 100, A=6.0, beta=1.0)
    assert out["sum"] == 0.0


def test_circle_tail_sum_rejects_small_beta():
    with pytest.raises(ConfigError, match="3/4"):
        circle_tail_sum((0, 0), 100, A=1.0, beta=0.5)


def test_window_indexing_roundtrip():
    w = FrequencyWindow(3)
    for idx, j in enumerate(w.modes()):
        assert w.index_of(j) == idx
        assert w.mode_at(idx) == j
    with pytest.raises(ValueError):
        w.index_of((4, 0))
