"""Random instance builders and independent oracles shared by the tests."""

import numpy as np

from wkf.frames import Member, Subspace, WeightedFamily, optimal_lower_k_bound, optimal_upper_bound
from wkf.weaving import WeavingPattern, weaving_operator


def random_family(rng, n, m, dmax=None, wlo=0.5, whi=2.0):
    dmax = dmax or max(1, n - 1)
    members = []
    for _ in range(m):
        d = int(rng.integers(1, dmax + 1))
        members.append(Member(Subspace.span(rng.standard_normal((d, n))), float(rng.uniform(wlo, whi))))
    return WeightedFamily(tuple(members))


def random_low_rank(rng, rows, cols, r):
    if r == 0:
        return np.zeros((rows, cols))
    return rng.standard_normal((rows, r)) @ rng.standard_normal((r, cols))


def axes_family(n=2, weights=None):
    weights = weights or [1.0] * n
    return WeightedFamily.from_spans([np.eye(n)[i : i + 1] for i in range(n)], weights)


def family_of(vectors, weights):
    return WeightedFamily.from_spans([np.atleast_2d(v) for v in vectors], weights)


def sampled_ratios(S, M, basis, count, rng):
    """``f'Sf / f'Mf`` for ``count`` random unit vectors ``f`` in ``span(basis)``."""
    Y = rng.standard_normal((count, basis.shape[1]))
    X = Y @ basis.T
    num = np.einsum("ij,jk,ik->i", X, S, X)
    den = np.einsum("ij,jk,ik->i", X, M, X)
    return num / den


def power_iteration_norm(A, iters=5000, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[1])
    G = A.T @ A
    lam = 0.0
    for _ in range(iters):
        y = G @ x
        lam_new = np.linalg.norm(y)
        if lam_new == 0:
            return 0.0
        x = y / lam_new
        if abs(lam_new - lam) <= 1e-15 * lam_new:
            break
        lam = lam_new
    return float(np.sqrt(x @ G @ x))


def naive_sweep(FW, FV, K, tol=None, domain=None):
    """Every weaving rebuilt from scratch and certified independently.

    Returns ``(lower, upper)`` arrays indexed by mask.
    """
    from wkf.numerics import DEFAULT_TOL

    tol = tol or DEFAULT_TOL
    m = len(FW)
    lower = np.empty(1 << m)
    upper = np.empty(1 << m)
    for mask in range(1 << m):
        pattern = WeavingPattern(m, mask)
        members = tuple(FW[i] if i in pattern else FV[i] for i in range(m))
        F = WeightedFamily(members)
        lower[mask] = optimal_lower_k_bound(F, K, tol, domain)[0]
        upper[mask] = optimal_upper_bound(F, domain, tol)[0]
    return lower, upper


def naive_operator(FW, FV, mask):
    return weaving_operator(FW, FV, WeavingPattern(len(FW), mask))


def subspace_inside(rng, basis, d):
    """Random ``d``-dimensional subspace of ``span(basis)`` (orthonormal columns)."""
    coeff = rng.standard_normal((basis.shape[1], d))
    return Subspace.from_columns(basis @ coeff)


def woven_pair(rng, n, m, wlo=0.5, whi=2.0):
    """Two families of hyperplanes; any ``m >= 2`` of them span R^n almost surely."""
    def fam():
        return WeightedFamily(tuple(
            Member(Subspace.span(rng.standard_normal((n - 1, n))), float(rng.uniform(wlo, whi)))
            for _ in range(m)
        ))
    return fam(), fam()


def redundant_pair(rng, n, m, extra, extra_weight=0.2):
    """Woven pair plus ``extra`` low-weight members appended to both families.

    Returns ``(FW, FV, J)`` with ``J`` the indices of the appended members.
    """
    FW, FV = woven_pair(rng, n, m)
    for _ in range(extra):
        sub = Subspace.span(rng.standard_normal((int(rng.integers(1, n + 1)), n)))
        FW = FW.appended(sub, extra_weight)
        FV = FV.appended(sub, extra_weight)
    return FW, FV, tuple(range(m, m + extra))


def minimal_erasure_constant(F, J, M):
    """Smallest ``C`` with ``S_J <= C M M'`` (``M`` invertible)."""
    from wkf.frames import fusion_operator

    Mi = np.linalg.inv(M)
    S_J = fusion_operator(F.subset(J))
    return float(np.linalg.eigvalsh(Mi @ S_J @ Mi.T)[-1])


def well_conditioned(rng, n, lo=0.5, hi=1.5):
    """Random ``n x n`` matrix with singular values in ``[lo, hi]``."""
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return U @ np.diag(rng.uniform(lo, hi, n)) @ V.T
