import math

import numpy as np
import pytest

from helpers import (
    axes_family,
    family_of,
    minimal_erasure_constant,
    random_family,
    redundant_pair,
    sampled_ratios,
    well_conditioned,
    woven_pair,
)
from wkf.frames import fusion_operator
from wkf.numerics import DEFAULT_TOL, operator_norm
from wkf.transforms import image_family
from wkf.stability import (
    ErasureParams,
    PerturbationParams,
    Status,
    check_erasure_corollary,
    check_erasure_pullback,
    check_erasure_theorem,
    check_perturbation_corollary,
    check_perturbation_theorem,
    erasure_condition,
    perturbation_condition,
    perturbed_lower_bound,
)

E1, E2 = np.eye(2)
TOL = DEFAULT_TOL.bound_tol


def redundant_axes():
    return family_of([E1, E2, E1], [1.0, 1.0, 0.5])


def perturbed(rng, K, size):
    E = rng.standard_normal(K.shape)
    return K + size * E / operator_norm(E)


# ---------------------------------------------------------------- parameters


def test_parameter_validation():
    with pytest.raises(ValueError):
        PerturbationParams(0.0, 0.5, 0.5)
    with pytest.raises(ValueError):
        PerturbationParams(0.5, 1.0, 0.5)
    with pytest.raises(ValueError):
        ErasureParams((), 0.5)
    with pytest.raises(ValueError):
        ErasureParams((0,), 0.0)
    assert ErasureParams((2, 0, 2), 0.1).J == (0, 2)


# ---------------------------------------------------------------- perturbation condition


def test_condition_equal_operators_certified():
    K = np.random.default_rng(60).standard_normal((3, 3))
    v = perturbation_condition(K, K, PerturbationParams(0.5, 0.5, 0.5))
    assert v.status is Status.CERTIFIED


def test_condition_scalar_violation_refuted():
    v = perturbation_condition(2 * np.eye(2), np.zeros((2, 2)), PerturbationParams(0.25, 0.25, 0.25))
    assert v.status is Status.REFUTED
    assert np.linalg.norm(v.witness) == pytest.approx(1.0)
    assert v.margin == pytest.approx(0.75 - 2.0)


def test_condition_equality_is_not_a_violation():
    v = perturbation_condition(np.eye(2), np.zeros((2, 2)), PerturbationParams(0.5, 0.5, 0.5))
    assert v.status is not Status.REFUTED


def test_condition_small_perturbation_certified():
    rng = np.random.default_rng(61)
    for _ in range(20):
        T = rng.standard_normal((4, 4))
        K = perturbed(rng, T, 0.1)
        v = perturbation_condition(T, K, PerturbationParams(0.2, 0.2, 0.2))
        assert v.status is Status.CERTIFIED


def test_condition_verdict_matches_direct_sampling():
    rng = np.random.default_rng(62)
    p = PerturbationParams(0.3, 0.3, 0.3)
    for _ in range(20):
        K = rng.standard_normal((3, 3))
        T = perturbed(rng, K, rng.uniform(0.05, 3.0))
        v = perturbation_condition(T, K, p)
        X = rng.standard_normal((20_000, 3))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        slack = (
            p.alpha1 * np.linalg.norm(X @ T, axis=1)
            + p.alpha2 * np.linalg.norm(X @ K, axis=1)
            + p.alpha3
            - np.linalg.norm(X @ (T - K), axis=1)
        )
        if v.status is Status.CERTIFIED:
            assert slack.min() >= -1e-9
        if slack.min() < -1e-6:
            assert v.status is Status.REFUTED


def test_perturbed_lower_bound_arithmetic():
    assert perturbed_lower_bound(1.0, PerturbationParams(0.5, 0.5, 0.5), 1.0) == 0.0625
    assert perturbed_lower_bound(1.0, PerturbationParams(1e-9, 1e-9, 1e-9), 1.0) == pytest.approx(1.0, abs=1e-6)
    assert perturbed_lower_bound(2.0, PerturbationParams(0.1, 0.2, 0.3), 2.0) == pytest.approx(0.5, abs=1e-15)


# ---------------------------------------------------------------- perturbation theorem


def test_theorem_axes_example():
    F = axes_family()
    rep = check_perturbation_theorem(F, F, np.eye(2), np.eye(2), PerturbationParams(0.5, 0.5, 0.5))
    assert rep.status is Status.CERTIFIED
    assert rep.predicted_lower == 0.0625
    np.testing.assert_allclose(rep.margins, 0.9375, atol=1e-14)


def test_theorem_with_equal_operators():
    rng = np.random.default_rng(63)
    FW, FV = woven_pair(rng, 3, 4)
    K = rng.standard_normal((3, 3))
    rep = check_perturbation_theorem(FW, FV, K, K, PerturbationParams(0.3, 0.3, 0.3))
    assert rep.holds and rep.predicted_lower <= rep.A


def test_theorem_skipped_when_condition_refuted():
    F = axes_family()
    rep = check_perturbation_theorem(F, F, 2 * np.eye(2), np.zeros((2, 2)), PerturbationParams(0.25, 0.25, 0.25))
    assert rep.status is Status.SKIPPED and "refuted" in rep.reason


def test_theorem_random_rank_deficient_K():
    rng = np.random.default_rng(64)
    for _ in range(5):
        FW, FV = woven_pair(rng, 4, 5)
        K = rng.standard_normal((4, 3)) @ rng.standard_normal((3, 4))
        T = perturbed(rng, K, 0.1)
        rep = check_perturbation_theorem(FW, FV, T, K, PerturbationParams(0.2, 0.2, 0.2))
        assert rep.condition.status is Status.CERTIFIED
        assert rep.status is Status.CERTIFIED
        assert rep.margins.min() >= -TOL


def test_corollary_examples():
    rng = np.random.default_rng(65)
    FW, FV = woven_pair(rng, 3, 4)
    K = well_conditioned(rng, 3, 0.95, 1.0)
    rep = check_perturbation_corollary(FW, FV, K, K, 0.4, 0.3)
    assert rep.agree and rep.woven_T and rep.woven_K
    rep = check_perturbation_corollary(FW, FV, 2 * K, K, 0.4, 0.3)
    assert rep.condition.status is Status.CERTIFIED
    assert rep.agree
    W, V = family_of([E1, E2], [1, 1]), family_of([E2, E1], [1, 1])
    rep = check_perturbation_corollary(W, V, np.eye(2), np.eye(2), 0.4, 0.3)
    assert rep.agree and rep.woven_T is False and rep.woven_K is False


# ---------------------------------------------------------------- erasure condition


def test_erasure_condition_examples():
    F = redundant_axes()
    v = erasure_condition(F, [2], 0.25, np.eye(2))
    assert v.status is Status.CERTIFIED and v.margin == pytest.approx(0.0, abs=1e-15)
    v = erasure_condition(F, [0], 0.5, np.eye(2))
    assert v.status is Status.REFUTED
    assert abs(abs(v.witness @ E1) - 1.0) < 1e-12
    assert v.margin == pytest.approx(-0.5)


def test_erasure_condition_matches_sampling():
    rng = np.random.default_rng(66)
    for _ in range(10):
        F = random_family(rng, 4, 5)
        M = well_conditioned(rng, 4)
        J = (3, 4)
        S_J = fusion_operator(F.subset(J))
        sampled = sampled_ratios(S_J, M @ M.T, np.eye(4), 100_000, rng).max()
        exact = minimal_erasure_constant(F, J, M)
        assert sampled <= exact + 1e-12
        assert erasure_condition(F, J, 1.01 * exact, M).status is Status.CERTIFIED
        assert erasure_condition(F, J, 0.99 * sampled, M).status is Status.REFUTED


def test_erasure_condition_rejects_bad_J():
    with pytest.raises(ValueError):
        erasure_condition(redundant_axes(), [3], 0.1, np.eye(2))


# ---------------------------------------------------------------- erasure theorems


def test_erasure_theorem_axes_example():
    F = redundant_axes()
    rep = check_erasure_theorem(F, F, np.eye(2), np.eye(2), [2], 0.25)
    assert rep.status is Status.CERTIFIED
    assert rep.reduced.universal_A == 1.0
    assert rep.predicted_lower == 0.75


def test_erasure_corollary_axes_example():
    F = redundant_axes()
    rep = check_erasure_corollary(F, F, np.eye(2), [2], 0.25)
    assert rep.status is Status.CERTIFIED
    assert (rep.reduced.universal_A, rep.predicted_lower) == (1.0, 0.75)
    theorem = check_erasure_theorem(F, F, np.eye(2), np.eye(2), [2], 0.25)
    assert theorem.reduced.universal_A == rep.reduced.universal_A
    assert theorem.margin == rep.margin


def test_erasure_pullback_scalar_case():
    F = redundant_axes()
    rep = check_erasure_pullback(F, F, 2 * np.eye(2), np.eye(2), [2], 1 / 16)
    assert rep.threshold == pytest.approx(0.25, abs=1e-15)
    assert rep.status is Status.CERTIFIED
    assert rep.reduced.universal_A >= 0.25 - 1 / 16 - 1e-12


def test_erasure_pullback_identity_matches_corollary():
    F = redundant_axes()
    a = check_erasure_pullback(F, F, np.eye(2), np.eye(2), [2], 0.25)
    b = check_erasure_corollary(F, F, np.eye(2), [2], 0.25)
    assert a.reduced.universal_A == b.reduced.universal_A
    assert a.predicted_lower == b.predicted_lower


def test_erasure_skips_on_failed_hypothesis():
    F = redundant_axes()
    rep = check_erasure_corollary(F, F, np.eye(2), [2], 0.1)
    assert rep.status is Status.SKIPPED and "erasure condition" in rep.reason
    with pytest.raises(ValueError):
        check_erasure_corollary(F, F, np.eye(2), [0, 1, 2], 0.25)


def test_push_forward_erasure_constant_fails_for_large_T():
    # With ||T|| = 2 the reduced image pair only reaches A/||T||^4 - C.
    F = redundant_axes()
    rep = check_erasure_theorem(F, F, 2 * np.eye(2), np.eye(2), [2], 1 / 64)
    assert rep.hypotheses and all(rep.hypotheses.values())
    assert rep.reduced.universal_A == pytest.approx(1 / 16, abs=1e-15)
    assert rep.predicted_lower == pytest.approx(0.25 - 1 / 64)
    assert rep.status is Status.REFUTED and rep.margin < 0
    assert rep.derived_lower == pytest.approx(1 / 16 - 1 / 64)
    assert rep.derived_margin >= 0


def test_erasure_random_instances():
    rng = np.random.default_rng(67)
    for _ in range(4):
        FW, FV, J = redundant_pair(rng, 3, 4, extra=2, extra_weight=0.15)
        K = well_conditioned(rng, 3)
        C = 1.01 * minimal_erasure_constant(FW, J, K)
        rep = check_erasure_corollary(FW, FV, K, J, C)
        assert rep.status is Status.CERTIFIED, rep.reason
        T = well_conditioned(rng, 3, 0.9, 1.0)
        T /= operator_norm(T)
        M = T @ K @ T.T
        img, _ = image_family(FW, T)
        C = 1.01 * minimal_erasure_constant(img, J, M)
        rep = check_erasure_theorem(FW, FV, T, K, J, C)
        assert rep.status is Status.CERTIFIED, rep.reason
        assert math.isfinite(rep.margin) and rep.margin >= -TOL
