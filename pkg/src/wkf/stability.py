"""Perturbation and erasure checks for weaving K-fusion frames.

Hypotheses that mix several norms (the perturbation inequality) cannot in
general be decided by one eigenproblem, so they get a three-valued verdict:
``certified`` by an explicit sufficient test, ``refuted`` by a concrete
violating vector, or ``unknown``. Erasure hypotheses compare two quadratic
forms and are decided exactly by an eigenvalue test.

The ``check_*`` functions verify the conclusions numerically: they compute
the predicted constant, sweep every weaving exhaustively, and report the
per-weaving margins against it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .frames import WeightedFamily, fusion_operator
from .numerics import (
    DEFAULT_TOL,
    ToleranceConfig,
    as_matrix,
    lower_norm_bound,
    operator_norm,
    pseudoinverse,
    range_basis,
    svd,
    sym_eig,
)
from .transforms import image_family, push_forward
from .weaving import WeavingReport, _report, bessel_weaving_bound, certify_woven_exhaustive, sweep_exhaustive

__all__ = [
    "Status",
    "PerturbationParams",
    "ErasureParams",
    "ConditionVerdict",
    "PerturbationReport",
    "CorollaryReport",
    "ErasureReport",
    "perturbation_condition",
    "two_sided_condition",
    "perturbed_lower_bound",
    "check_perturbation_theorem",
    "check_perturbation_corollary",
    "erasure_condition",
    "check_erasure_theorem",
    "check_erasure_corollary",
    "check_erasure_pullback",
]


class Status(str, enum.Enum):
    CERTIFIED = "certified"
    REFUTED = "refuted"
    UNKNOWN = "unknown"
    SKIPPED = "skipped"


@dataclass(frozen=True)
class PerturbationParams:
    alpha1: float
    alpha2: float
    alpha3: float

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "alpha3"):
            a = getattr(self, name)
            if not 0.0 < a < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {a}")


@dataclass(frozen=True)
class ErasureParams:
    J: tuple
    C: float

    def __post_init__(self):
        J = tuple(sorted(set(int(j) for j in self.J)))
        if not J:
            raise ValueError("J must be non-empty")
        if any(j < 0 for j in J):
            raise ValueError("indices in J must be non-negative")
        if not (math.isfinite(self.C) and self.C > 0):
            raise ValueError(f"C must be positive, got {self.C}")
        object.__setattr__(self, "J", J)


@dataclass(frozen=True)
class ConditionVerdict:
    """Outcome of a universally quantified hypothesis.

    ``margin`` is the smallest slack (right side minus left side) seen over
    the examined unit vectors, or the smallest eigenvalue for exact tests.
    ``method`` names the test that decided the status.
    """

    status: Status
    witness: np.ndarray | None
    margin: float
    method: str = ""


def _unit_probes(n: int, samples: int, seed: int, extra) -> np.ndarray:
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((samples, n))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    cols = [X] + [np.asarray(E).T for E in extra if np.asarray(E).size]
    P = np.concatenate(cols)
    norms = np.linalg.norm(P, axis=1)
    return P[norms > 0] / norms[norms > 0, None]


def _norm_condition(T, K, a1, a2, a3, samples, seed, tol):
    """Decide ``||(T' - K')f|| <= a1||T'f|| + a2||K'f|| + a3||f||``."""
    T = as_matrix(T, "T")
    K = as_matrix(K, "K")
    if T.shape != K.shape:
        raise ValueError(f"T and K differ in shape: {T.shape} vs {K.shape}")
    D = T - K
    n = T.shape[0]
    G = a1**2 * T @ T.T + a2**2 * K @ K.T + a3**2 * np.eye(n) - D @ D.T
    g_vals, g_vecs = sym_eig(G)
    probes = _unit_probes(
        n,
        samples,
        seed,
        [svd(D).U, svd(T).U, svd(K).U, g_vecs[:, -min(n, 4):]],
    )
    lhs = np.linalg.norm(probes @ D, axis=1)
    rhs = a1 * np.linalg.norm(probes @ T, axis=1) + a2 * np.linalg.norm(probes @ K, axis=1) + a3
    slack = rhs - lhs
    k = int(np.argmin(slack))
    margin = float(slack[k])
    scale = max(1.0, operator_norm(T), operator_norm(K))
    if margin < -tol.bound_tol * scale:
        return ConditionVerdict(Status.REFUTED, probes[k], margin, "sampled violation")
    d_norm = operator_norm(D)
    if d_norm <= a1 * lower_norm_bound(T.T) + a2 * lower_norm_bound(K.T) + a3:
        return ConditionVerdict(Status.CERTIFIED, None, margin, "norm bound")
    if g_vals[-1] >= -tol.psd_tol:
        return ConditionVerdict(Status.CERTIFIED, None, margin, "quadratic-form bound")
    return ConditionVerdict(Status.UNKNOWN, None, margin, "no certificate, no violation")


def perturbation_condition(T, K, p: PerturbationParams, samples: int = 2000, seed: int = 0,
                           tol: ToleranceConfig = DEFAULT_TOL) -> ConditionVerdict:
    """Three-valued check of the perturbation hypothesis.

    Certificates (either suffices, both are exact sufficient conditions):

    * ``||T - K|| <= a1 s_min(T') + a2 s_min(K') + a3``;
    * ``(T-K)(T-K)' <= a1^2 TT' + a2^2 KK' + a3^2 I`` in the PSD order, since
      ``sqrt(x^2 + y^2 + z^2) <= x + y + z`` for non-negative terms.

    Refutation probes ``samples`` seeded unit vectors together with the left
    singular vectors of ``T - K``, ``T``, ``K`` and the most negative
    eigenvectors of the quadratic-form certificate.
    """
    return _norm_condition(T, K, p.alpha1, p.alpha2, p.alpha3, samples, seed, tol)


def two_sided_condition(T, K, alpha1: float, alpha2: float, samples: int = 2000, seed: int = 0,
                        tol: ToleranceConfig = DEFAULT_TOL) -> ConditionVerdict:
    """The corollary's hypothesis ``||(T'-K')f|| <= a1||T'f|| + a2||K'f||``."""
    for name, a in (("alpha1", alpha1), ("alpha2", alpha2)):
        if not 0.0 < a < 1.0:
            raise ValueError(f"{name} must lie in (0, 1), got {a}")
    return _norm_condition(T, K, alpha1, alpha2, 0.0, samples, seed, tol)


def perturbed_lower_bound(A: float, p: PerturbationParams, K_pinv_norm: float) -> float:
    """``A ((1 - a1) / (1 + a2 + a3 ||K^+||))^2``."""
    if A < 0 or K_pinv_norm < 0:
        raise ValueError("A and ||K^+|| must be non-negative")
    factor = (1.0 - p.alpha1) / (1.0 + p.alpha2 + p.alpha3 * K_pinv_norm)
    return A * factor**2


@dataclass(frozen=True)
class PerturbationReport:
    status: Status
    condition: ConditionVerdict
    reason: str = ""
    A: float = math.nan
    k_pinv_norm: float = math.nan
    predicted_lower: float = math.nan
    margins: np.ndarray | None = None
    min_margin: float = math.nan
    worst_mask: int | None = None
    weaving: WeavingReport | None = None
    holds: bool = False


def check_perturbation_theorem(FW, FV, T, K, p: PerturbationParams, tol: ToleranceConfig = DEFAULT_TOL,
                               samples: int = 2000, seed: int = 0, workers=None) -> PerturbationReport:
    """Verify the perturbed lower bound on ``R(K)`` for every weaving.

    The pair's universal K-fusion constant ``A`` and every weaving's optimal
    T-fusion constant are computed with test vectors restricted to ``R(K)``.
    A refuted hypothesis, or a pair that is not woven on ``R(K)``, skips the
    check with an explanatory reason.
    """
    T = as_matrix(T, "T")
    K = as_matrix(K, "K")
    cond = perturbation_condition(T, K, p, samples, seed, tol)
    if cond.status is Status.REFUTED:
        return PerturbationReport(Status.SKIPPED, cond, "perturbation hypothesis refuted")
    range_K = range_basis(K, tol)
    base = sweep_exhaustive(FW, FV, K, tol, domain=range_K, workers=workers)
    A = float(np.min(base.lower))
    if not (math.isinf(A) or A > tol.bound_tol):
        return PerturbationReport(Status.SKIPPED, cond, "pair is not woven as K-fusion frames for R(K)", A=A)
    k_pinv = operator_norm(pseudoinverse(K, tol))
    predicted = math.inf if math.isinf(A) else perturbed_lower_bound(A, p, k_pinv)
    pert = sweep_exhaustive(FW, FV, T, tol, domain=range_K, workers=workers)
    with np.errstate(invalid="ignore"):
        margins = pert.lower - predicted
    margins = np.where(np.isnan(margins), np.inf, margins)
    k = int(np.argmin(margins))
    weaving = _report(pert.m, pert.masks, pert.lower, pert.upper, True, tol)
    holds = bool(margins[k] >= -tol.bound_tol)
    return PerturbationReport(
        status=Status.CERTIFIED if holds else Status.REFUTED,
        condition=cond,
        A=A,
        k_pinv_norm=k_pinv,
        predicted_lower=predicted,
        margins=margins,
        min_margin=float(margins[k]),
        worst_mask=int(pert.masks[k]),
        weaving=weaving,
        holds=holds,
    )


@dataclass(frozen=True)
class CorollaryReport:
    status: Status
    condition: ConditionVerdict
    reason: str = ""
    woven_T: bool | None = None
    woven_K: bool | None = None
    report_T: WeavingReport | None = None
    report_K: WeavingReport | None = None
    agree: bool = False


def check_perturbation_corollary(FW, FV, T, K, alpha1: float, alpha2: float, tol: ToleranceConfig = DEFAULT_TOL,
                                 samples: int = 2000, seed: int = 0, workers=None) -> CorollaryReport:
    """T-wovenness and K-wovenness must agree under the two-sided condition."""
    cond = two_sided_condition(T, K, alpha1, alpha2, samples, seed, tol)
    if cond.status is Status.REFUTED:
        return CorollaryReport(Status.SKIPPED, cond, "two-sided perturbation hypothesis refuted")
    rep_T = certify_woven_exhaustive(FW, FV, T, tol, workers=workers)
    rep_K = certify_woven_exhaustive(FW, FV, K, tol, workers=workers)
    agree = rep_T.woven == rep_K.woven
    return CorollaryReport(
        status=Status.CERTIFIED if agree else Status.REFUTED,
        condition=cond,
        woven_T=rep_T.woven,
        woven_K=rep_K.woven,
        report_T=rep_T,
        report_K=rep_K,
        agree=agree,
    )


def _check_J(J, m: int) -> tuple:
    J = ErasureParams(tuple(J), 1.0).J
    if J[-1] >= m:
        raise ValueError(f"index {J[-1]} in J is outside 0..{m - 1}")
    if len(J) == m:
        raise ValueError("erasing every index leaves no family")
    return J


def erasure_condition(F_img: WeightedFamily, J, C: float, M, tol: ToleranceConfig = DEFAULT_TOL) -> ConditionVerdict:
    """Exact test of ``sum_{i in J} w_i^2 ||P_i f||^2 <= C ||M'f||^2`` for all ``f``.

    Decided by the smallest eigenvalue of ``C M M' - S_J``; a refutation
    carries the corresponding eigenvector.
    """
    J = ErasureParams(tuple(J), C).J
    if J[-1] >= len(F_img):
        raise ValueError(f"index {J[-1]} in J is outside 0..{len(F_img) - 1}")
    M = as_matrix(M, "M")
    n = F_img.ambient_dim
    if M.shape[0] != n:
        raise ValueError(f"M has {M.shape[0]} rows, family lives in R^{n}")
    S_J = fusion_operator(F_img.subset(J))
    w, V = sym_eig(C * M @ M.T - S_J)
    if w[-1] >= -tol.psd_tol:
        return ConditionVerdict(Status.CERTIFIED, None, float(w[-1]), "eigenvalue test")
    return ConditionVerdict(Status.REFUTED, V[:, -1], float(w[-1]), "eigenvalue test")


@dataclass(frozen=True)
class ErasureReport:
    """Outcome of an erasure check.

    ``predicted_lower`` is the constant the statement asserts for the reduced
    pair. ``derived_lower`` is the constant that follows from chaining the
    intertwining lemma with the erasure condition (identical to
    ``predicted_lower`` except for the push-forward form with ``||T|| > 1``).
    """

    status: Status
    reason: str = ""
    hypotheses: dict = field(default_factory=dict)
    A: float = math.nan
    C: float = math.nan
    J: tuple = ()
    threshold: float = math.nan
    condition: ConditionVerdict | None = None
    predicted_lower: float = math.nan
    derived_lower: float = math.nan
    reduced: WeavingReport | None = None
    upper_limit: float = math.nan
    margin: float = math.nan
    derived_margin: float = math.nan
    upper_margin: float = math.nan
    holds: bool = False


def _skip(reason, **kw) -> ErasureReport:
    return ErasureReport(Status.SKIPPED, reason, **kw)


def _finish(reduced: WeavingReport, predicted, derived, upper_limit, tol, **kw) -> ErasureReport:
    if reduced.vacuous:
        margin = derived_margin = math.inf
    else:
        margin = reduced.universal_A - predicted
        derived_margin = reduced.universal_A - derived
    upper_margin = upper_limit - reduced.universal_B
    holds = margin >= -tol.bound_tol and upper_margin >= -tol.bound_tol
    return ErasureReport(
        status=Status.CERTIFIED if holds else Status.REFUTED,
        predicted_lower=predicted,
        derived_lower=derived,
        reduced=reduced,
        upper_limit=upper_limit,
        margin=margin,
        derived_margin=derived_margin,
        upper_margin=upper_margin,
        holds=holds,
        **kw,
    )


def check_erasure_theorem(FW, FV, T, K, J, C: float, tol: ToleranceConfig = DEFAULT_TOL, workers=None) -> ErasureReport:
    """Erasure after push-forward.

    Hypotheses: the containments ``T^+ (T W_i) in W_i`` (and for ``V``), the
    erasure condition for the image members in ``J`` against
    ``M = T K T'``, and ``0 < C < A/||T||^2`` with ``A`` the input pair's
    universal lower K-fusion bound. Conclusion checked: every weaving of
    the reduced image pair has lower ``M``-fusion constant at least
    ``A/||T||^2 - C`` and upper constant at most ``B_1 + B_2``.
    """
    T = as_matrix(T, "T")
    K = as_matrix(K, "K")
    m = len(FW)
    J = _check_J(J, m)
    ctx = {"J": J, "C": C}
    img_W = push_forward(FW, T, K, tol)
    img_V = push_forward(FV, T, K, tol)
    M = img_W.operator
    hyp = {
        "containment": img_W.hypotheses_hold and img_V.hypotheses_hold,
    }
    base = certify_woven_exhaustive(FW, FV, K, tol, workers=workers)
    A = base.universal_A
    t_norm = operator_norm(T)
    threshold = A / t_norm**2 if t_norm > 0 else math.inf
    cond = erasure_condition(img_W.family, J, C, M, tol)
    hyp["erasure condition"] = cond.status is Status.CERTIFIED
    hyp["0 < C < A/||T||^2"] = 0 < C < threshold
    ctx.update(hypotheses=hyp, A=A, threshold=threshold, condition=cond)
    failed = [k for k, ok in hyp.items() if not ok]
    if failed:
        return _skip("hypothesis not met: " + ", ".join(failed), **ctx)
    reduced = certify_woven_exhaustive(img_W.family.without(J), img_V.family.without(J), M, tol, workers=workers)
    upper_limit = bessel_weaving_bound(img_W.family, img_V.family)
    derived = A / t_norm**4 - C
    return _finish(reduced, threshold - C, derived, upper_limit, tol, **ctx)


def check_erasure_corollary(FW, FV, K, J, C: float, tol: ToleranceConfig = DEFAULT_TOL, workers=None) -> ErasureReport:
    """Identity-operator erasure: reduced pair has universal bounds ``A - C, B``."""
    K = as_matrix(K, "K")
    J = _check_J(J, len(FW))
    base = certify_woven_exhaustive(FW, FV, K, tol, workers=workers)
    A, B = base.universal_A, base.universal_B
    cond = erasure_condition(FW, J, C, K, tol)
    hyp = {"erasure condition": cond.status is Status.CERTIFIED, "0 < C < A": 0 < C < A}
    ctx = {"J": J, "C": C, "hypotheses": hyp, "A": A, "threshold": A, "condition": cond}
    failed = [k for k, ok in hyp.items() if not ok]
    if failed:
        return _skip("hypothesis not met: " + ", ".join(failed), **ctx)
    reduced = certify_woven_exhaustive(FW.without(J), FV.without(J), K, tol, workers=workers)
    return _finish(reduced, A - C, A - C, B, tol, **ctx)


def check_erasure_pullback(FW, FV, T, K, J, C: float, tol: ToleranceConfig = DEFAULT_TOL, workers=None) -> ErasureReport:
    """Erasure after pull-back along an injective ``T``.

    ``FW``/``FV`` are the preimage families in R^{n1}; their images
    ``(T W_i, w_i)`` must be woven K-fusion frames for ``R(T)`` with
    universal lower bound ``A``. The reduced pulled-back pair
    ``{(W_i, w_i/||T||)}`` (``i`` not in ``J``) is checked against
    ``A / (||T||^4 ||T^+||^2) - C`` w.r.t. ``T^+ K T``.
    """
    T = as_matrix(T, "T")
    K = as_matrix(K, "K")
    n2, n1 = T.shape
    if FW.ambient_dim != n1:
        raise ValueError(f"T is {n2}x{n1} but families live in R^{FW.ambient_dim}")
    J = _check_J(J, len(FW))
    pinv = pseudoinverse(T, tol)
    if range_basis(T, tol).shape[1] != n1:
        raise ValueError("T is not injective at rank_tol")
    t_norm = operator_norm(T)
    pinv_norm = operator_norm(pinv)
    img_W, _ = image_family(FW, T, tol)
    img_V, _ = image_family(FV, T, tol)
    base = certify_woven_exhaustive(img_W, img_V, K, tol, domain=range_basis(T, tol), workers=workers)
    A = base.universal_A
    threshold = A / (t_norm**4 * pinv_norm**2)
    pulled_W = FW.rescaled(1.0 / t_norm)
    pulled_V = FV.rescaled(1.0 / t_norm)
    M = pinv @ K @ T
    cond = erasure_condition(pulled_W, J, C, M, tol)
    hyp = {
        "images woven on R(T)": base.woven,
        "erasure condition": cond.status is Status.CERTIFIED,
        "0 < C < A/(||T||^4 ||T^+||^2)": 0 < C < threshold,
    }
    ctx = {"J": J, "C": C, "hypotheses": hyp, "A": A, "threshold": threshold, "condition": cond}
    failed = [k for k, ok in hyp.items() if not ok]
    if failed:
        return _skip("hypothesis not met: " + ", ".join(failed), **ctx)
    reduced = certify_woven_exhaustive(pulled_W.without(J), pulled_V.without(J), M, tol, workers=workers)
    upper_limit = base.universal_B * pinv_norm**2
    return _finish(reduced, threshold - C, threshold - C, upper_limit, tol, **ctx)
