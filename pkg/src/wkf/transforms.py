"""Operator constructions on weighted families.

* :func:`push_forward` maps ``{(W_i, w_i)}`` to ``{(T W_i, w_i)}``, which is a
  ``TKT'``-fusion frame with lower constant ``A/||T||^4`` and upper constant
  ``sum w_i^2``.
* :func:`pull_back` goes the other way for an injective ``T``: from images
  forming a K-fusion frame on ``R(T)`` with bounds ``A, B`` to
  ``{(W_i, w_i/||T||)}`` as a ``T^+ K T``-fusion frame with bounds
  ``A / (||T||^4 ||T^+||^2)`` and ``B ||T^+||^2``.
* :func:`k_image_family` maps a fusion frame to ``{(K W_i, w_i)}``, a
  K-fusion frame with lower constant ``A/||K||^2``.

Each construction returns predicted constants next to the constructed
family; the certified optimal constants come from :mod:`wkf.frames` and
:mod:`wkf.weaving` and are never replaced by the predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .frames import (
    Member,
    Subspace,
    WeightedFamily,
    certify_k_fusion_frame,
    fusion_operator,
    optimal_lower_k_bound,
    optimal_upper_bound,
)
from .numerics import (
    DEFAULT_TOL,
    ToleranceConfig,
    as_matrix,
    operator_norm,
    pseudoinverse,
    range_basis,
    rank,
    sym_eig,
)
from .weaving import WeavingReport, bessel_weaving_bound, certify_woven_exhaustive

__all__ = [
    "HypothesisCheck",
    "TransformResult",
    "WovenPushForward",
    "EquivalenceReport",
    "subspace_containment",
    "image_family",
    "push_forward",
    "pull_back",
    "k_image_family",
    "woven_push_forward",
    "fusion_vs_kfusion_equivalence",
]


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    residual: float


@dataclass(frozen=True)
class TransformResult:
    family: WeightedFamily
    operator: np.ndarray
    predicted_lower: float
    predicted_upper: float
    hypothesis_report: tuple = ()
    degenerate: tuple = ()

    @property
    def hypotheses_hold(self) -> bool:
        return all(h.passed for h in self.hypothesis_report)


def subspace_containment(A: Subspace, B: Subspace, tol: ToleranceConfig = DEFAULT_TOL):
    """``(contained, residual)`` with residual ``||(I - P_B) basis_A||``."""
    if A.ambient_dim != B.ambient_dim:
        raise ValueError(f"subspaces live in R^{A.ambient_dim} and R^{B.ambient_dim}")
    if A.is_degenerate:
        return True, 0.0
    R = A.basis - B.basis @ (B.basis.T @ A.basis)
    residual = operator_norm(R)
    return residual <= tol.rank_tol, residual


def _image(T: np.ndarray, sub: Subspace, t_norm: float, tol: ToleranceConfig) -> Subspace:
    return Subspace(range_basis(T @ sub.basis, tol, scale=t_norm))


def image_family(F: WeightedFamily, T, tol: ToleranceConfig = DEFAULT_TOL, weights=None):
    """``({(T W_i, w_i)}, degenerate_indices)``; zero images keep their slot."""
    T = as_matrix(T, "T")
    if T.shape[1] != F.ambient_dim:
        raise ValueError(f"T has {T.shape[1]} columns, family lives in R^{F.ambient_dim}")
    t_norm = operator_norm(T)
    members = []
    degenerate = []
    for i, (sub, w) in enumerate(F):
        img = _image(T, sub, t_norm, tol)
        if img.is_degenerate:
            degenerate.append(i)
        members.append(Member(img, w if weights is None else weights[i]))
    return WeightedFamily(tuple(members)), tuple(degenerate)


def _containment_hypotheses(F: WeightedFamily, images: WeightedFamily, T_pinv, tol, label):
    checks = []
    for i, ((sub, _), (img, _)) in enumerate(zip(F, images)):
        back = Subspace(range_basis(T_pinv @ img.basis, tol, scale=operator_norm(T_pinv))) if img.dim else img
        ok, res = subspace_containment(back, sub, tol) if back.dim else (True, 0.0)
        checks.append(HypothesisCheck(f"{label}[{i}]: T^+ (T W_i) in W_i", ok, res))
    return checks


def push_forward(F: WeightedFamily, T, K, tol: ToleranceConfig = DEFAULT_TOL) -> TransformResult:
    """Image family ``{(T W_i, w_i)}`` as a ``T K T'``-fusion frame."""
    T = as_matrix(T, "T")
    K = as_matrix(K, "K")
    n1 = F.ambient_dim
    if K.shape != (n1, n1):
        raise ValueError(f"K must be {n1}x{n1}, got {K.shape[0]}x{K.shape[1]}")
    images, degenerate = image_family(F, T, tol)
    checks = _containment_hypotheses(F, images, pseudoinverse(T, tol), tol, "W")
    A_F, _ = optimal_lower_k_bound(F, K, tol)
    t_norm = operator_norm(T)
    predicted_lower = math.inf if (math.isinf(A_F) or t_norm == 0.0) else A_F / t_norm**4
    return TransformResult(
        family=images,
        operator=T @ K @ T.T,
        predicted_lower=predicted_lower,
        predicted_upper=float(np.sum(F.weights**2)),
        hypothesis_report=tuple(checks),
        degenerate=degenerate,
    )


def pull_back(F_img: WeightedFamily, T, K, preimages: WeightedFamily, tol: ToleranceConfig = DEFAULT_TOL) -> TransformResult:
    """Pulled-back family ``{(W_i, w_i/||T||)}`` as a ``T^+ K T``-fusion frame.

    ``F_img`` must consist of the images ``(T W_i, w_i)`` of ``preimages``;
    its bounds ``A, B`` are taken over test vectors in ``R(T)``.
    """
    T = as_matrix(T, "T")
    K = as_matrix(K, "K")
    n2, n1 = T.shape
    if preimages.ambient_dim != n1 or F_img.ambient_dim != n2:
        raise ValueError(
            f"T is {n2}x{n1} but preimages live in R^{preimages.ambient_dim} and images in R^{F_img.ambient_dim}"
        )
    if K.shape != (n2, n2):
        raise ValueError(f"K must be {n2}x{n2}, got {K.shape[0]}x{K.shape[1]}")
    r = rank(T, tol)
    if r != n1:
        raise ValueError(f"T is not injective: rank {r} < {n1} at rank_tol={tol.rank_tol}")
    if len(F_img) != len(preimages):
        raise ValueError(f"{len(F_img)} image members but {len(preimages)} preimages")
    t_norm = operator_norm(T)
    checks = [HypothesisCheck("T injective", True, 0.0)]
    for i, ((img, w_img), (pre, w_pre)) in enumerate(zip(F_img, preimages)):
        expected = _image(T, pre, t_norm, tol)
        fwd, res_f = subspace_containment(expected, img, tol)
        bwd, res_b = subspace_containment(img, expected, tol)
        if not (fwd and bwd) or expected.dim != img.dim:
            raise ValueError(f"image member {i} is not T applied to preimage {i} (residual {max(res_f, res_b):.3g})")
        if not math.isclose(w_img, w_pre, rel_tol=1e-12):
            raise ValueError(f"image member {i} has weight {w_img}, preimage weight {w_pre}")
    range_T = range_basis(T, tol)
    report = certify_k_fusion_frame(F_img, K, tol, domain=range_T)
    checks.append(HypothesisCheck("images form a K-fusion frame for R(T)", report.is_frame, report.lower_A))
    T_pinv = pseudoinverse(T, tol)
    pinv_norm = operator_norm(T_pinv)
    if report.vacuous:
        predicted_lower = math.inf
    else:
        predicted_lower = report.lower_A / (t_norm**4 * pinv_norm**2)
    return TransformResult(
        family=preimages.rescaled(1.0 / t_norm),
        operator=T_pinv @ K @ T,
        predicted_lower=predicted_lower,
        predicted_upper=report.upper_B * pinv_norm**2,
        hypothesis_report=tuple(checks),
    )


def k_image_family(F: WeightedFamily, K, tol: ToleranceConfig = DEFAULT_TOL, lower: float | None = None) -> TransformResult:
    """Family ``{(K W_i, w_i)}`` as a K-fusion frame.

    ``lower`` is the fusion lower bound the prediction starts from; it
    defaults to the family's own ``lambda_min(S)``. For a weaving pair pass
    the pair's universal fusion bound.
    """
    K = as_matrix(K, "K")
    n = F.ambient_dim
    if K.shape != (n, n):
        raise ValueError(f"K must be {n}x{n}, got {K.shape[0]}x{K.shape[1]}")
    images, degenerate = image_family(F, K, tol)
    if lower is None:
        lower = max(float(sym_eig(fusion_operator(F))[0][-1]), 0.0)
    k_norm = operator_norm(K)
    return TransformResult(
        family=images,
        operator=K,
        predicted_lower=math.inf if k_norm == 0.0 else lower / k_norm**2,
        predicted_upper=float(np.sum(F.weights**2)),
        degenerate=degenerate,
    )


@dataclass(frozen=True)
class WovenPushForward:
    first: TransformResult
    second: TransformResult
    operator: np.ndarray
    input_report: WeavingReport
    predicted_lower: float
    predicted_upper: float
    image_report: WeavingReport | None = None

    @property
    def hypotheses_hold(self) -> bool:
        return self.first.hypotheses_hold and self.second.hypotheses_hold


def woven_push_forward(FW, FV, T, K, tol: ToleranceConfig = DEFAULT_TOL, certify: bool = True, workers=None) -> WovenPushForward:
    """Push a weaving pair forward under ``T``.

    The predicted universal lower constant is ``A/||T||^4`` where ``A`` is the
    input pair's universal lower K-fusion bound; the upper prediction is the
    Bessel bound ``sum w_i^2 + sum v_i^2`` of the two image families.
    With ``certify`` the image pair is swept exhaustively w.r.t. ``T K T'``.
    """
    first = push_forward(FW, T, K, tol)
    second = push_forward(FV, T, K, tol)
    input_report = certify_woven_exhaustive(FW, FV, K, tol, workers=workers)
    t_norm = operator_norm(T)
    if input_report.vacuous or t_norm == 0.0:
        predicted_lower = math.inf
    else:
        predicted_lower = input_report.universal_A / t_norm**4
    image_report = None
    if certify:
        image_report = certify_woven_exhaustive(first.family, second.family, first.operator, tol, workers=workers)
    return WovenPushForward(
        first=first,
        second=second,
        operator=first.operator,
        input_report=input_report,
        predicted_lower=predicted_lower,
        predicted_upper=first.predicted_upper + second.predicted_upper,
        image_report=image_report,
    )


@dataclass(frozen=True)
class EquivalenceReport:
    """Both directions of the fusion / K-fusion weaving equivalence.

    (i)  ``universal_A_K >= universal_A_fusion / ||K||^2`` over all of R^n.
    (ii) on ``R(K)``: ``fusion bound >= universal_A_K / ||K^+||^2``.
    """

    fusion: WeavingReport
    kfusion: WeavingReport
    fusion_on_range: WeavingReport
    kfusion_on_range: WeavingReport
    k_norm: float
    k_pinv_norm: float
    margin_i: float
    margin_ii: float
    holds_i: bool
    holds_ii: bool
    bessel_bound: float = field(default=math.nan)


def fusion_vs_kfusion_equivalence(FW, FV, K, tol: ToleranceConfig = DEFAULT_TOL, workers=None) -> EquivalenceReport:
    K = as_matrix(K, "K")
    n = FW.ambient_dim
    eye = np.eye(n)
    fusion = certify_woven_exhaustive(FW, FV, eye, tol, workers=workers)
    kfusion = certify_woven_exhaustive(FW, FV, K, tol, workers=workers)
    range_K = range_basis(K, tol)
    fusion_r = certify_woven_exhaustive(FW, FV, eye, tol, domain=range_K, workers=workers)
    kfusion_r = certify_woven_exhaustive(FW, FV, K, tol, domain=range_K, workers=workers)
    k_norm = operator_norm(K)
    pinv_norm = operator_norm(pseudoinverse(K, tol))

    if kfusion.vacuous:
        margin_i = math.inf
    else:
        margin_i = kfusion.universal_A - fusion.universal_A / k_norm**2
    if kfusion_r.vacuous or fusion_r.vacuous:
        margin_ii = math.inf
    else:
        margin_ii = fusion_r.universal_A - kfusion_r.universal_A / pinv_norm**2
    return EquivalenceReport(
        fusion=fusion,
        kfusion=kfusion,
        fusion_on_range=fusion_r,
        kfusion_on_range=kfusion_r,
        k_norm=k_norm,
        k_pinv_norm=pinv_norm,
        margin_i=margin_i,
        margin_ii=margin_ii,
        holds_i=margin_i >= -tol.bound_tol,
        holds_ii=margin_ii >= -tol.bound_tol,
        bessel_bound=bessel_weaving_bound(FW, FV),
    )
