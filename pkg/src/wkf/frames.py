"""Weighted subspace families and optimal K-fusion frame bounds.

A weighted family ``{(W_i, w_i)}`` is a K-fusion frame when

    A ||K' f||^2 <= sum_i w_i^2 ||P_{W_i} f||^2 <= B ||f||^2

for every ``f``. The middle term is the quadratic form of the fusion operator
``S = sum_i w_i^2 P_{W_i}``, so ``B`` is ``lambda_max(S)`` and ``A`` is the
smallest value of the pencil ratio ``f'Sf / f'KK'f`` over vectors outside
``ker K'``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .numerics import (
    DEFAULT_TOL,
    ConvergenceError,
    ToleranceConfig,
    as_matrix,
    min_ratio_on_subspace,
    operator_norm,
    range_basis,
    svd,
    sym_eig,
)

__all__ = [
    "Subspace",
    "Member",
    "WeightedFamily",
    "BoundReport",
    "LowerBoundEvaluator",
    "fusion_operator",
    "optimal_upper_bound",
    "optimal_lower_k_bound",
    "certify_k_fusion_frame",
    "domain_basis",
]

ORTHONORMAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Subspace:
    """A subspace of R^n stored as an ``n x d`` orthonormal basis.

    ``d = 0`` is only produced for degenerate images (``T W = {0}``); user
    input always spans at least one direction.
    """

    basis: np.ndarray

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=np.float64)
        if basis.ndim != 2 or basis.shape[0] < 1:
            raise ValueError(f"basis must be an n x d matrix, got shape {basis.shape}")
        n, d = basis.shape
        if d > n:
            raise ValueError(f"subspace dimension {d} exceeds ambient dimension {n}")
        if not np.all(np.isfinite(basis)):
            raise ValueError("basis contains non-finite entries")
        if d and np.max(np.abs(basis.T @ basis - np.eye(d))) > ORTHONORMAL_TOL:
            raise ValueError("basis columns are not orthonormal")
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @classmethod
    def span(cls, vectors, tol: ToleranceConfig = DEFAULT_TOL, allow_zero: bool = False) -> "Subspace":
        """Subspace spanned by the rows of ``vectors`` (orthonormalized)."""
        rows = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        if rows.ndim != 2:
            raise ValueError("spanning set must be a list of vectors")
        basis = range_basis(rows.T, tol)
        if basis.shape[1] == 0 and not allow_zero:
            raise ValueError("spanning set is zero")
        return cls(basis)

    @classmethod
    def from_columns(cls, columns, tol: ToleranceConfig = DEFAULT_TOL, scale: float | None = None) -> "Subspace":
        """Column space of ``columns``; may be zero-dimensional."""
        return cls(range_basis(as_matrix(columns), tol, scale=scale))

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(np.zeros((n, 0)))

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def is_degenerate(self) -> bool:
        return self.dim == 0

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def __repr__(self):
        return f"Subspace(ambient_dim={self.ambient_dim}, dim={self.dim})"


class Member(NamedTuple):
    subspace: Subspace
    weight: float


@dataclass(frozen=True, eq=False)
class WeightedFamily:
    """Finite ordered family ``{(W_i, w_i)}`` of weighted subspaces of R^n."""

    members: tuple

    def __post_init__(self):
        members = tuple(Member(sub, float(w)) for sub, w in self.members)
        if not members:
            raise ValueError("a weighted family needs at least one member")
        n = members[0].subspace.ambient_dim
        for i, (sub, w) in enumerate(members):
            if not isinstance(sub, Subspace):
                raise TypeError(f"member {i}: expected Subspace, got {type(sub).__name__}")
            if sub.ambient_dim != n:
                raise ValueError(f"member {i} lives in R^{sub.ambient_dim}, expected R^{n}")
            if not (math.isfinite(w) and w > 0):
                raise ValueError(f"member {i}: weight must be a positive finite number, got {w}")
        object.__setattr__(self, "members", members)

    @classmethod
    def from_spans(cls, spans: Sequence, weights: Sequence[float], tol: ToleranceConfig = DEFAULT_TOL):
        if len(spans) != len(weights):
            raise ValueError("spans and weights differ in length")
        return cls(tuple(Member(Subspace.span(v, tol), w) for v, w in zip(spans, weights)))

    @property
    def ambient_dim(self) -> int:
        return self.members[0].subspace.ambient_dim

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    @property
    def weights(self) -> np.ndarray:
        return np.array([m.weight for m in self.members])

    def weighted_projectors(self) -> np.ndarray:
        """Stack of ``w_i^2 P_{W_i}``, shape ``(m, n, n)``."""
        return np.stack([m.weight**2 * m.subspace.projector() for m in self.members])

    def subset(self, indices: Sequence[int]) -> "WeightedFamily":
        return WeightedFamily(tuple(self.members[i] for i in indices))

    def without(self, indices) -> "WeightedFamily":
        drop = set(indices)
        return WeightedFamily(tuple(m for i, m in enumerate(self.members) if i not in drop))

    def rescaled(self, factor: float) -> "WeightedFamily":
        return WeightedFamily(tuple(Member(m.subspace, m.weight * factor) for m in self.members))

    def appended(self, subspace: Subspace, weight: float) -> "WeightedFamily":
        return WeightedFamily(self.members + (Member(subspace, weight),))

    def __repr__(self):
        return f"WeightedFamily(ambient_dim={self.ambient_dim}, m={len(self)})"


@dataclass(frozen=True)
class BoundReport:
    """Optimal K-fusion frame bounds with witness vectors.

    ``vacuous`` marks the case where no admissible test vector exists
    (``K' f = 0`` on the whole domain); ``lower_A`` is then ``inf`` and the
    family satisfies the lower inequality trivially.
    """

    lower_A: float
    upper_B: float
    lower_witness: np.ndarray | None
    upper_witness: np.ndarray | None
    is_frame: bool
    vacuous: bool = False


def fusion_operator(F: WeightedFamily) -> np.ndarray:
    """``S = sum_i w_i^2 B_i B_i'`` for orthonormal bases ``B_i``."""
    n = F.ambient_dim
    S = np.zeros((n, n))
    for sub, w in F:
        S += w**2 * (sub.basis @ sub.basis.T)
    return S


def domain_basis(domain, n: int, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray | None:
    """Orthonormal basis for a test-vector domain, ``None`` for all of R^n."""
    if domain is None:
        return None
    if isinstance(domain, Subspace):
        basis = domain.basis
    else:
        basis = range_basis(as_matrix(domain, "domain"), tol)
    if basis.shape[0] != n:
        raise ValueError(f"domain lives in R^{basis.shape[0]}, expected R^{n}")
    return basis


def _eigh_batch(X: np.ndarray):
    try:
        return np.linalg.eigh(X)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"symmetric eigensolver failed: {exc}", 1) from exc


def _eigvalsh_batch(X: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvalsh(X)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"symmetric eigensolver failed: {exc}", 1) from exc


def _sym(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + np.swapaxes(X, -1, -2))


class LowerBoundEvaluator:
    """Optimal lower constant ``A`` in ``A ||K' f||^2 <= f'Sf`` for fixed ``K``.

    Test vectors range over ``domain`` (all of R^n by default). The domain is
    split once into ``R``, the directions where ``K'`` acts (singular values
    above ``rank_tol * ||K||``), and ``N``, the directions it annihilates.
    For a given ``S`` the ``N`` component is minimised out through the
    Schur complement ``S_RR - S_RN S_NN^+ S_NR`` and what remains is a
    definite pencil against ``diag(s^2)``.

    The decomposition depends only on ``K`` and the domain, so a sweep over
    many operators ``S`` reuses it (see :meth:`evaluate_batch`).
    """

    def __init__(self, K, n: int, tol: ToleranceConfig = DEFAULT_TOL, domain=None):
        K = as_matrix(K, "K")
        if K.shape != (n, n):
            raise ValueError(f"K must be {n}x{n}, got {K.shape[0]}x{K.shape[1]}")
        self.n = n
        self.tol = tol
        Q = domain_basis(domain, n, tol)
        if Q is None:
            Q = np.eye(n)
        self.domain = Q
        k_norm = operator_norm(K)
        if Q.shape[1] == 0 or k_norm == 0.0:
            r = 0
            V = np.eye(Q.shape[1])
            s = np.zeros(0)
        else:
            res = svd(K.T @ Q, full_matrices=True)
            s = res.singular_values
            r = int(np.count_nonzero(s > tol.rank_tol * k_norm))
            V = res.V
        self.scales = s[:r]
        self.R = Q @ V[:, :r]
        self.N = Q @ V[:, r:]

    @property
    def vacuous(self) -> bool:
        return self.R.shape[1] == 0

    def _schur(self, S: np.ndarray, R: np.ndarray):
        """Schur complement of ``S`` eliminating the ``N`` block, seen through ``R``."""
        N = self.N
        SR = np.swapaxes(R, -1, -2) @ S @ R
        if N.shape[1] == 0:
            return _sym(SR), None
        SN = _sym(N.T @ S @ N)
        SRN = R.T @ S @ N
        w, E = _eigh_batch(SN)
        fro = np.linalg.norm(S, axis=(-2, -1))
        cutoff = self.tol.rank_tol * np.asarray(fro)[..., None]
        inv = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
        SN_pinv = (E * inv[..., None, :]) @ np.swapaxes(E, -1, -2)
        coupling = SN_pinv @ np.swapaxes(SRN, -1, -2)
        return _sym(SR - SRN @ coupling), coupling

    def _whitened(self, S: np.ndarray) -> np.ndarray:
        if self.N.shape[1] == 0:
            # R diag(1/s) absorbs the whitening into a single congruence
            return self._schur(S, self.R / self.scales)[0]
        schur, _ = self._schur(S, self.R)
        inv_s = 1.0 / self.scales
        return _sym(schur * inv_s[:, None] * inv_s[None, :])

    def evaluate(self, S) -> tuple[float, np.ndarray | None]:
        """``(A, witness)`` for one symmetric PSD operator ``S``.

        The value comes from the same kernel as :meth:`evaluate_batch`, so a
        sweep and a single certification agree bit for bit; the witness
        comes from the Cholesky-whitened pencil.
        """
        S = as_matrix(S, "S")
        if self.vacuous:
            return math.inf, None
        value = float(self.evaluate_batch(S[None])[0])
        schur, coupling = self._schur(S, self.R)
        r = self.R.shape[1]
        _, y = min_ratio_on_subspace(
            schur, np.diag(self.scales**2), np.eye(r), self.tol.replace(psd_tol=0.0), return_witness=True
        )
        f = self.R @ y
        if coupling is not None:
            f = f - self.N @ (coupling @ y)
        return value, f / np.linalg.norm(f)

    def evaluate_batch(self, S: np.ndarray) -> np.ndarray:
        """Optimal ``A`` for a stack of operators of shape ``(b, n, n)``."""
        if self.vacuous:
            return np.full(S.shape[0], math.inf)
        return np.maximum(_eigvalsh_batch(self._whitened(S))[:, 0], 0.0)


def optimal_upper_bound(F: WeightedFamily, domain=None, tol: ToleranceConfig = DEFAULT_TOL):
    """``(B, witness)`` with ``B = lambda_max`` of the fusion operator.

    With ``domain`` the maximum is taken over unit vectors of that subspace.
    """
    S = fusion_operator(F)
    Q = domain_basis(domain, F.ambient_dim, tol)
    if Q is None:
        w, V = sym_eig(S)
        return max(float(w[0]), 0.0), V[:, 0]
    if Q.shape[1] == 0:
        return 0.0, None
    w, V = sym_eig(_sym(Q.T @ S @ Q))
    return max(float(w[0]), 0.0), Q @ V[:, 0]


def optimal_lower_k_bound(F: WeightedFamily, K, tol: ToleranceConfig = DEFAULT_TOL, domain=None):
    """``(A, witness)``: the largest ``A`` with ``A||K'f||^2 <= f'Sf``.

    The constant is optimal over every test vector of ``domain`` (the whole
    space by default) for which ``K'f != 0``. When no such vector exists the
    result is ``(inf, None)``; :func:`certify_k_fusion_frame` reports that as
    a vacuous certificate.
    """
    evaluator = LowerBoundEvaluator(K, F.ambient_dim, tol, domain)
    return evaluator.evaluate(fusion_operator(F))


def certify_k_fusion_frame(F: WeightedFamily, K, tol: ToleranceConfig = DEFAULT_TOL, domain=None) -> BoundReport:
    A, a_wit = optimal_lower_k_bound(F, K, tol, domain)
    B, b_wit = optimal_upper_bound(F, domain, tol)
    vacuous = math.isinf(A)
    return BoundReport(
        lower_A=A,
        upper_B=B,
        lower_witness=a_wit,
        upper_witness=b_wit,
        is_frame=vacuous or A > tol.bound_tol,
        vacuous=vacuous,
    )
