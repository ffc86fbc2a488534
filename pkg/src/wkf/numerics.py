"""Dense real linear algebra kernels shared by the rest of the package.

Every rank decision goes through a single :class:`ToleranceConfig`, so that
subspace identification, positive-semidefinite checks and bound comparisons
use the same documented cut-offs everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

__all__ = [
    "ToleranceConfig",
    "DEFAULT_TOL",
    "NumericalError",
    "ConvergenceError",
    "NotPositiveDefiniteError",
    "SVDResult",
    "as_matrix",
    "svd",
    "rank",
    "pseudoinverse",
    "range_basis",
    "complement_basis",
    "projector",
    "range_projector",
    "operator_norm",
    "lower_norm_bound",
    "sym_eig",
    "min_ratio_on_subspace",
]

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class ToleranceConfig:
    """Global tolerance policy.

    rank_tol
        Singular values ``<= rank_tol * sigma_max`` are treated as zero.
    psd_tol
        Eigenvalues ``>= -psd_tol`` count as non-negative.
    bound_tol
        Slack used when comparing frame bounds.
    """

    rank_tol: float = 1e-10
    psd_tol: float = 1e-9
    bound_tol: float = 1e-8

    def __post_init__(self):
        for name in ("rank_tol", "psd_tol", "bound_tol"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be a finite non-negative number, got {value!r}")

    def replace(self, **changes) -> "ToleranceConfig":
        fields = {"rank_tol": self.rank_tol, "psd_tol": self.psd_tol, "bound_tol": self.bound_tol}
        fields.update(changes)
        return ToleranceConfig(**fields)


DEFAULT_TOL = ToleranceConfig()


class NumericalError(RuntimeError):
    """A numerical kernel failed to produce a trustworthy answer."""


class ConvergenceError(NumericalError):
    """An iterative LAPACK driver reported non-convergence."""

    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} driver attempt(s))")
        self.attempts = attempts


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix required to be positive definite is not."""

    def __init__(self, eigenvalue: float, threshold: float):
        super().__init__(
            f"matrix is not positive definite on the given subspace: smallest eigenvalue "
            f"{eigenvalue:.6g} <= threshold {threshold:.6g}"
        )
        self.eigenvalue = eigenvalue


def as_matrix(A, name: str = "matrix") -> np.ndarray:
    """Return ``A`` as a finite 2-D float64 array, rejecting NaN/Inf."""
    arr = np.asarray(A, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class SVDResult:
    """Thin SVD ``A = U @ diag(singular_values) @ V.T``."""

    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.singular_values) @ self.V.T


def svd(A, full_matrices: bool = False) -> SVDResult:
    """SVD with singular values sorted non-increasing (thin by default).

    The divide-and-conquer driver is tried first and the QR-iteration driver
    second; if both fail a :class:`ConvergenceError` is raised.
    """
    A = as_matrix(A)
    attempts = 0
    for driver in ("gesdd", "gesvd"):
        attempts += 1
        try:
            U, s, Vt = linalg.svd(A, full_matrices=full_matrices, lapack_driver=driver, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            continue
        return SVDResult(U=U, singular_values=s, V=Vt.T)
    raise ConvergenceError(f"SVD of {A.shape[0]}x{A.shape[1]} matrix did not converge", attempts)


def _cutoff(s: np.ndarray, tol: ToleranceConfig, scale: float | None) -> float:
    if scale is None:
        scale = float(s[0]) if s.size else 0.0
    return tol.rank_tol * scale


def rank(A, tol: ToleranceConfig = DEFAULT_TOL) -> int:
    res = svd(A)
    s = res.singular_values
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > _cutoff(s, tol, None)))


def pseudoinverse(A, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD with relative rank truncation.

    The zero matrix maps to the zero matrix of transposed shape.
    """
    A = as_matrix(A)
    res = svd(A)
    s = res.singular_values
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((A.shape[1], A.shape[0]))
    keep = s > _cutoff(s, tol, None)
    return (res.V[:, keep] / s[keep]) @ res.U[:, keep].T


def range_basis(A, tol: ToleranceConfig = DEFAULT_TOL, scale: float | None = None) -> np.ndarray:
    """Orthonormal basis (as columns) for the column space of ``A``.

    ``scale`` sets the reference magnitude for the rank cut-off; by default it
    is ``sigma_max(A)``. Callers computing images ``T @ B`` of orthonormal
    ``B`` pass ``scale=||T||`` so that a numerically annihilated image is
    recognised as zero instead of being renormalised noise.
    """
    A = as_matrix(A)
    if A.shape[1] == 0:
        return np.zeros((A.shape[0], 0))
    res = svd(A)
    s = res.singular_values
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((A.shape[0], 0))
    keep = s > _cutoff(s, tol, scale)
    return res.U[:, keep]


def complement_basis(basis, n: int | None = None) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``span(basis)``."""
    basis = np.asarray(basis, dtype=np.float64)
    if n is None:
        n = basis.shape[0]
    d = basis.shape[1] if basis.ndim == 2 else 0
    if d == 0:
        return np.eye(n)
    if d >= n:
        return np.zeros((n, 0))
    U, _, _ = linalg.svd(basis, full_matrices=True)
    return U[:, d:]


def projector(basis) -> np.ndarray:
    """Orthogonal projector onto the span of orthonormal columns."""
    basis = np.asarray(basis, dtype=np.float64)
    return basis @ basis.T


def range_projector(A, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    return projector(range_basis(A, tol))


def operator_norm(A) -> float:
    """Spectral norm ``sigma_max(A)``."""
    s = svd(A).singular_values
    return float(s[0]) if s.size else 0.0


def lower_norm_bound(A) -> float:
    """``inf ||A x||`` over unit ``x``; zero whenever ``A`` has a kernel."""
    A = as_matrix(A)
    s = svd(A).singular_values
    if A.shape[1] > A.shape[0] or s.size == 0:
        return 0.0
    return float(s[-1])


def _check_symmetric(S: np.ndarray) -> np.ndarray:
    if S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    scale = max(1.0, float(np.max(np.abs(S))) if S.size else 1.0)
    asym = float(np.max(np.abs(S - S.T))) if S.size else 0.0
    if asym > SYMMETRY_TOL * scale:
        raise ValueError(f"matrix is not symmetric: max |S - S^T| = {asym:.3g}")
    return 0.5 * (S + S.T)


def sym_eig(S) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix, eigenvalues non-increasing.

    Asymmetry beyond ``1e-10`` (relative to the largest entry when that
    exceeds one) is rejected rather than silently averaged away.
    """
    S = _check_symmetric(as_matrix(S))
    try:
        w, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"symmetric eigensolver failed: {exc}", 1) from exc
    return w[::-1].copy(), V[:, ::-1].copy()


def min_ratio_on_subspace(S, M, basis, tol: ToleranceConfig = DEFAULT_TOL, return_witness: bool = False):
    """Minimum of ``f'Sf / f'Mf`` over non-zero ``f`` in ``span(basis)``.

    The reduced pencil ``(B'SB, B'MB)`` is whitened with the Cholesky factor
    of ``B'MB`` and the smallest eigenvalue of the whitened matrix is the
    answer. ``B'MB`` must be positive definite (smallest eigenvalue above
    ``tol.psd_tol``).

    With ``return_witness=True`` a unit vector attaining the minimum is
    returned as well.
    """
    S = _check_symmetric(as_matrix(S, "S"))
    M = _check_symmetric(as_matrix(M, "M"))
    B = as_matrix(basis, "basis")
    if S.shape != M.shape or B.shape[0] != S.shape[0]:
        raise ValueError(f"incompatible shapes S{S.shape}, M{M.shape}, basis{B.shape}")
    if B.shape[1] == 0:
        raise ValueError("basis spans the zero subspace")
    Sr = B.T @ S @ B
    Mr = B.T @ M @ B
    Sr = 0.5 * (Sr + Sr.T)
    Mr = 0.5 * (Mr + Mr.T)
    m_min = float(np.linalg.eigvalsh(Mr)[0])
    if m_min <= tol.psd_tol:
        raise NotPositiveDefiniteError(m_min, tol.psd_tol)
    L = linalg.cholesky(Mr, lower=True)
    X = linalg.solve_triangular(L, Sr, lower=True)
    C = linalg.solve_triangular(L, X.T, lower=True)
    C = 0.5 * (C + C.T)
    w, Z = np.linalg.eigh(C)
    value = float(w[0])
    if not return_witness:
        return value
    y = linalg.solve_triangular(L.T, Z[:, 0], lower=False)
    f = B @ y
    return value, f / np.linalg.norm(f)
