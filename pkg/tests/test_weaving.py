import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import axes_family, family_of, naive_operator, naive_sweep, random_family
from wkf.frames import WeightedFamily, fusion_operator, optimal_lower_k_bound, optimal_upper_bound
from wkf.weaving import (
    DEFAULT_MAX_M,
    WeavingPattern,
    bessel_weaving_bound,
    certify_woven_exhaustive,
    certify_woven_randomized,
    default_workers,
    gray_code,
    gray_code_operators,
    randomized_masks,
    sweep_exhaustive,
    sweep_masks,
    weaving_operator,
)

E1, E2 = np.eye(2)


def swapped_pair():
    return family_of([E1, E2], [1.0, 1.0]), family_of([E2, E1], [1.0, 1.0])


# ---------------------------------------------------------------- patterns


def test_pattern_roundtrip():
    p = WeavingPattern.from_indices(5, [0, 3])
    assert p.indices() == (0, 3)
    assert 3 in p and 1 not in p
    assert p.complement().indices() == (1, 2, 4)
    assert WeavingPattern.full(3).mask == 7
    with pytest.raises(ValueError):
        WeavingPattern.from_indices(2, [2])


def test_gray_code_changes_one_bit():
    codes = [gray_code(i) for i in range(1 << 10)]
    assert len(set(codes)) == 1 << 10
    for a, b in zip(codes, codes[1:]):
        assert bin(a ^ b).count("1") == 1


# ---------------------------------------------------------------- operator


def test_weaving_operator_examples():
    rng = np.random.default_rng(30)
    FW, FV = random_family(rng, 3, 4), random_family(rng, 3, 4)
    np.testing.assert_allclose(weaving_operator(FW, FV, WeavingPattern.full(4)), fusion_operator(FW), atol=1e-15)
    np.testing.assert_allclose(weaving_operator(FW, FV, WeavingPattern(4, 0)), fusion_operator(FV), atol=1e-15)
    W, V = swapped_pair()
    np.testing.assert_array_equal(weaving_operator(W, V, [0]), np.diag([2.0, 0.0]))


def test_mismatched_pair_rejected():
    with pytest.raises(ValueError):
        weaving_operator(axes_family(2), axes_family(3), [0])
    with pytest.raises(ValueError):
        weaving_operator(axes_family(2), family_of([E1], [1.0]), [0])


def test_incremental_operators_match_from_scratch():
    rng = np.random.default_rng(31)
    FW, FV = random_family(rng, 4, 7), random_family(rng, 4, 7)
    seen = set()
    for mask, S in gray_code_operators(FW, FV):
        seen.add(mask)
        assert np.max(np.abs(S - naive_operator(FW, FV, mask))) <= 1e-12
    assert seen == set(range(1 << 7))


# ---------------------------------------------------------------- exhaustive


def test_identical_families_report_their_own_bounds():
    rng = np.random.default_rng(32)
    F = random_family(rng, 4, 5)
    K = rng.standard_normal((4, 4))
    rep = certify_woven_exhaustive(F, F, K)
    assert rep.universal_A == optimal_lower_k_bound(F, K)[0]
    assert rep.universal_B == pytest.approx(optimal_upper_bound(F)[0], rel=1e-12)
    assert rep.woven and rep.exhaustive and rep.examined_count == 32


def test_swapped_axes_pair_is_not_woven():
    W, V = swapped_pair()
    rep = certify_woven_exhaustive(W, V, np.eye(2))
    assert not rep.woven
    assert rep.universal_A == 0.0
    assert rep.worst_sigma.indices() == (0,)
    assert rep.universal_B == pytest.approx(2.0, abs=1e-14)


def test_exhaustive_matches_naive_recompute():
    rng = np.random.default_rng(33)
    FW, FV = random_family(rng, 4, 6), random_family(rng, 4, 6)
    K = rng.standard_normal((4, 4))
    rep = certify_woven_exhaustive(FW, FV, K)
    lower, upper = naive_sweep(FW, FV, K)
    assert abs(rep.universal_A - lower.min()) <= 1e-10
    assert abs(rep.universal_B - upper.max()) <= 1e-10
    assert lower[rep.worst_sigma.mask] == pytest.approx(lower.min(), abs=1e-10)


def test_sweep_is_symmetric_under_swap_and_complement():
    rng = np.random.default_rng(34)
    FW, FV = random_family(rng, 3, 5), random_family(rng, 3, 5)
    K = rng.standard_normal((3, 3))
    a = sweep_exhaustive(FW, FV, K)
    b = sweep_exhaustive(FV, FW, K)
    full = (1 << 5) - 1
    np.testing.assert_allclose(a.lower, b.lower[full ^ a.masks], atol=1e-10)
    np.testing.assert_allclose(a.upper, b.upper[full ^ a.masks], atol=1e-10)


def test_sweep_independent_of_worker_count():
    rng = np.random.default_rng(35)
    FW, FV = random_family(rng, 4, 13), random_family(rng, 4, 13)
    K = rng.standard_normal((4, 4))
    one = sweep_exhaustive(FW, FV, K, workers=1)
    many = sweep_exhaustive(FW, FV, K, workers=4)
    assert np.array_equal(one.lower, many.lower)
    assert np.array_equal(one.upper, many.upper)


def test_cap_points_to_randomized_certifier():
    F = axes_family(2)
    FW = WeightedFamily(tuple(F[i % 2] for i in range(DEFAULT_MAX_M + 1)))
    with pytest.raises(ValueError, match="randomized"):
        certify_woven_exhaustive(FW, FW, np.eye(2))


def test_default_workers_env(monkeypatch):
    monkeypatch.setenv("WKF_THREADS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("WKF_THREADS", "zero")
    with pytest.raises(ValueError):
        default_workers()


# ---------------------------------------------------------------- randomized


def test_randomized_schedule_layout():
    rows = randomized_masks(4, 10, seed=1)
    assert rows.shape == (10 + 2 + 8, 4)
    assert not rows[0].any() and rows[1].all()
    np.testing.assert_array_equal(rows[2:6], np.eye(4))
    np.testing.assert_array_equal(rows, randomized_masks(4, 10, seed=1))


def test_randomized_refutes_swapped_pair_at_singleton():
    W, V = swapped_pair()
    rep = certify_woven_randomized(W, V, np.eye(2), samples=1, seed=0)
    assert not rep.woven and not rep.exhaustive
    assert len(rep.worst_sigma.indices()) == 1


def test_randomized_on_identical_pair_is_never_refuted():
    rng = np.random.default_rng(36)
    F = random_family(rng, 3, 6)
    rep = certify_woven_randomized(F, F, np.eye(3), samples=50, seed=2)
    assert rep.woven
    assert rep.universal_A == pytest.approx(optimal_lower_k_bound(F, np.eye(3))[0], abs=1e-12)


def test_randomized_m24_bounded_by_pinned_exhaustive():
    rng = np.random.default_rng(37)
    n, free = 4, 12
    FW0, FV0 = random_family(rng, n, free, dmax=2), random_family(rng, n, free, dmax=2)
    pinned = random_family(rng, n, 12, dmax=2)
    FW = WeightedFamily(FW0.members + pinned.members)
    FV = WeightedFamily(FV0.members + pinned.members)
    K = rng.standard_normal((n, n))
    rep = certify_woven_randomized(FW, FV, K, samples=4096, seed=0)
    assert rep.examined_count == 4096 + 2 + 48
    # the pinned indices make every weaving depend only on the first 12 bits
    bits = (np.arange(1 << free)[:, None] >> np.arange(free)) & 1
    rows = np.hstack([bits, np.zeros((1 << free, 12), dtype=bits.dtype)])
    lower, _ = sweep_masks(FW, FV, K, rows)
    assert rep.universal_A >= lower.min() - 1e-8


# ---------------------------------------------------------------- Bessel


def test_bessel_examples():
    F = axes_family(2)
    assert bessel_weaving_bound(F, F) == pytest.approx(2.0)
    assert certify_woven_exhaustive(F, F, np.eye(2)).universal_B <= 2.0
    W, V = swapped_pair()
    assert bessel_weaving_bound(W, V) == pytest.approx(2.0)
    assert certify_woven_exhaustive(W, V, np.eye(2)).universal_B == pytest.approx(2.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 6), n=st.integers(1, 4))
def test_bessel_bound_property(seed, m, n):
    rng = np.random.default_rng(seed)
    FW, FV = random_family(rng, n, m, dmax=n), random_family(rng, n, m, dmax=n)
    rep = certify_woven_exhaustive(FW, FV, np.eye(n))
    assert rep.universal_B <= bessel_weaving_bound(FW, FV) + 1e-9
