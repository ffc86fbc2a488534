"""Wovenness certification for pairs of index-aligned weighted families.

A weaving picks member ``i`` from the first family when ``i`` is in the
subset ``sigma`` and from the second family otherwise. The pair is woven
(with respect to ``K``) when every one of the ``2^m`` weavings satisfies the
K-fusion inequality with common constants.

The exhaustive sweep walks the masks in reflected Gray-code order, so
consecutive weaving operators differ by a single member swap
``+-(w_j^2 P_{W_j} - v_j^2 P_{V_j})``. The mask space is cut into fixed-size
contiguous Gray segments; each segment is seeded from scratch and then
updated incrementally. Segment boundaries never depend on the number of
workers, which keeps every per-mask value bit-identical regardless of
scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .frames import (
    LowerBoundEvaluator,
    WeightedFamily,
    _eigvalsh_batch,
    _sym,
    domain_basis,
    optimal_upper_bound,
)
from .numerics import DEFAULT_TOL, ToleranceConfig, as_matrix

__all__ = [
    "WeavingPattern",
    "WeavingReport",
    "SweepResult",
    "DEFAULT_MAX_M",
    "SEGMENT_BITS",
    "gray_code",
    "weaving_operator",
    "gray_code_operators",
    "sweep_exhaustive",
    "sweep_masks",
    "certify_woven_exhaustive",
    "certify_woven_randomized",
    "bessel_weaving_bound",
    "default_workers",
]

DEFAULT_MAX_M = 20
SEGMENT_BITS = 10


def gray_code(i):
    """Reflected binary Gray code of ``i`` (works on ints and int arrays)."""
    return i ^ (i >> 1)


@dataclass(frozen=True)
class WeavingPattern:
    """Subset ``sigma`` of ``{0..m-1}`` as a bitset; bit ``i`` set means
    member ``i`` comes from the first family."""

    m: int
    mask: int

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("m must be non-negative")
        if self.mask < 0 or self.mask >> self.m:
            raise ValueError(f"mask {self.mask:#x} uses bits beyond the low {self.m}")

    @classmethod
    def from_indices(cls, m: int, indices) -> "WeavingPattern":
        mask = 0
        for i in indices:
            if not 0 <= i < m:
                raise ValueError(f"index {i} outside 0..{m - 1}")
            mask |= 1 << i
        return cls(m, mask)

    @classmethod
    def full(cls, m: int) -> "WeavingPattern":
        return cls(m, (1 << m) - 1)

    def indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.m) if self.mask >> i & 1)

    def complement(self) -> "WeavingPattern":
        return WeavingPattern(self.m, ((1 << self.m) - 1) ^ self.mask)

    def __contains__(self, i: int) -> bool:
        return 0 <= i < self.m and bool(self.mask >> i & 1)

    def __str__(self):
        return "{" + ", ".join(map(str, self.indices())) + "}"


@dataclass(frozen=True)
class WeavingReport:
    universal_A: float
    universal_B: float
    worst_sigma: WeavingPattern
    best_B_sigma: WeavingPattern
    exhaustive: bool
    examined_count: int
    woven: bool
    vacuous: bool = False


@dataclass(frozen=True)
class SweepResult:
    """Per-mask optimal bounds; ``lower[k]``/``upper[k]`` belong to ``masks[k]``."""

    masks: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    m: int = field(default=0)


def _check_pair(FW: WeightedFamily, FV: WeightedFamily):
    if FW.ambient_dim != FV.ambient_dim:
        raise ValueError(f"families live in R^{FW.ambient_dim} and R^{FV.ambient_dim}")
    if len(FW) != len(FV):
        raise ValueError(f"families have {len(FW)} and {len(FV)} members; weaving needs a common index set")


def _pattern(m: int, sigma) -> WeavingPattern:
    if isinstance(sigma, WeavingPattern):
        if sigma.m != m:
            raise ValueError(f"pattern is over {sigma.m} indices, families have {m}")
        return sigma
    if isinstance(sigma, (int, np.integer)):
        return WeavingPattern(m, int(sigma))
    return WeavingPattern.from_indices(m, sigma)


def weaving_operator(FW: WeightedFamily, FV: WeightedFamily, sigma) -> np.ndarray:
    """``S_sigma = sum_{i in sigma} w_i^2 P_{W_i} + sum_{i not in sigma} v_i^2 P_{V_i}``."""
    _check_pair(FW, FV)
    pattern = _pattern(len(FW), sigma)
    n = FW.ambient_dim
    S = np.zeros((n, n))
    for i in range(len(FW)):
        sub, w = FW[i] if i in pattern else FV[i]
        S += w**2 * (sub.basis @ sub.basis.T)
    return S


def default_workers() -> int:
    env = os.environ.get("WKF_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"WKF_THREADS must be a positive integer, got {env!r}") from None
        if value < 1:
            raise ValueError(f"WKF_THREADS must be a positive integer, got {env!r}")
        return value
    return os.cpu_count() or 1


class _PairData:
    def __init__(self, FW: WeightedFamily, FV: WeightedFamily):
        _check_pair(FW, FV)
        self.m = len(FW)
        self.n = FW.ambient_dim
        self.PW = FW.weighted_projectors()
        self.PV = FV.weighted_projectors()
        self.delta = self.PW - self.PV

    def from_scratch(self, mask: int) -> np.ndarray:
        S = np.zeros((self.n, self.n))
        for i in range(self.m):
            S += self.PW[i] if mask >> i & 1 else self.PV[i]
        return S

    def segment(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        """Masks and operators for Gray indices ``start..stop-1``.

        The first operator is built from scratch; each later one applies a
        single member swap to its predecessor (a running sum).
        """
        idx = np.arange(start, stop, dtype=np.int64)
        masks = gray_code(idx)
        steps = np.empty((stop - start, self.n, self.n))
        steps[0] = self.from_scratch(int(masks[0]))
        if stop - start > 1:
            changed = masks[1:] ^ masks[:-1]
            bits = np.log2(changed).astype(np.int64)
            sign = np.where(masks[1:] & changed, 1.0, -1.0)
            steps[1:] = sign[:, None, None] * self.delta[bits]
        return masks, np.cumsum(steps, axis=0)


def gray_code_operators(FW: WeightedFamily, FV: WeightedFamily, start: int = 0, stop: int | None = None):
    """Yield ``(mask, S_sigma)`` along the Gray-code walk, one segment at a time."""
    data = _PairData(FW, FV)
    total = 1 << data.m
    stop = total if stop is None else min(stop, total)
    seg = 1 << SEGMENT_BITS
    lo = start
    while lo < stop:
        hi = min(stop, (lo // seg + 1) * seg)
        masks, ops = data.segment(lo, hi)
        for mask, S in zip(masks, ops):
            yield int(mask), S
        lo = hi


def _upper_batch(S: np.ndarray, Q: np.ndarray | None) -> np.ndarray:
    if Q is not None:
        if Q.shape[1] == 0:
            return np.zeros(S.shape[0])
        S = Q.T @ S @ Q
    return np.maximum(_eigvalsh_batch(_sym(S))[:, -1], 0.0)


def sweep_exhaustive(
    FW: WeightedFamily,
    FV: WeightedFamily,
    K,
    tol: ToleranceConfig = DEFAULT_TOL,
    domain=None,
    workers: int | None = None,
    max_m: int = DEFAULT_MAX_M,
) -> SweepResult:
    """Optimal lower (w.r.t. ``K``) and upper bounds for all ``2^m`` weavings.

    Results are indexed by mask integer: ``lower[mask]``.
    """
    data = _PairData(FW, FV)
    m = data.m
    if m > max_m:
        raise ValueError(
            f"exhaustive weaving over m={m} indices exceeds the cap of {max_m}; "
            "use the randomized certifier instead"
        )
    evaluator = LowerBoundEvaluator(K, data.n, tol, domain)
    Q = domain_basis(domain, data.n, tol)
    total = 1 << m
    seg = 1 << SEGMENT_BITS
    bounds = [(lo, min(total, lo + seg)) for lo in range(0, total, seg)]
    lower = np.empty(total)
    upper = np.empty(total)

    def run(span):
        masks, ops = data.segment(*span)
        lower[masks] = evaluator.evaluate_batch(ops)
        upper[masks] = _upper_batch(ops, Q)

    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(bounds) == 1:
        for span in bounds:
            run(span)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, bounds))
    return SweepResult(masks=np.arange(total, dtype=np.int64), lower=lower, upper=upper, m=m)


def sweep_masks(
    FW: WeightedFamily,
    FV: WeightedFamily,
    K,
    bit_rows: np.ndarray,
    tol: ToleranceConfig = DEFAULT_TOL,
    domain=None,
    chunk: int = 1024,
) -> tuple[np.ndarray, np.ndarray]:
    """Bounds for arbitrary weavings given as a ``(k, m)`` 0/1 matrix."""
    data = _PairData(FW, FV)
    evaluator = LowerBoundEvaluator(K, data.n, tol, domain)
    Q = domain_basis(domain, data.n, tol)
    base = data.PV.sum(axis=0)
    flat = data.delta.reshape(data.m, -1)
    lower = np.empty(len(bit_rows))
    upper = np.empty(len(bit_rows))
    for lo in range(0, len(bit_rows), chunk):
        rows = np.asarray(bit_rows[lo : lo + chunk], dtype=np.float64)
        ops = base + (rows @ flat).reshape(-1, data.n, data.n)
        lower[lo : lo + len(rows)] = evaluator.evaluate_batch(ops)
        upper[lo : lo + len(rows)] = _upper_batch(ops, Q)
    return lower, upper


def _report(m, masks, lower, upper, exhaustive, tol) -> WeavingReport:
    # np.argmin/argmax return the first occurrence: ties go to the earliest entry.
    k_lo = int(np.argmin(lower))
    k_hi = int(np.argmax(upper))
    universal_A = float(lower[k_lo])
    vacuous = math.isinf(universal_A)
    return WeavingReport(
        universal_A=universal_A,
        universal_B=float(upper[k_hi]),
        worst_sigma=WeavingPattern(m, int(masks[k_lo])),
        best_B_sigma=WeavingPattern(m, int(masks[k_hi])),
        exhaustive=exhaustive,
        examined_count=len(lower),
        woven=vacuous or universal_A > tol.bound_tol,
        vacuous=vacuous,
    )


def certify_woven_exhaustive(
    FW: WeightedFamily,
    FV: WeightedFamily,
    K,
    tol: ToleranceConfig = DEFAULT_TOL,
    domain=None,
    workers: int | None = None,
    max_m: int = DEFAULT_MAX_M,
) -> WeavingReport:
    """Exact universal bounds over every weaving ``sigma`` of the pair.

    ``domain`` restricts test vectors to a subspace (for statements made
    "for R(K)"). Raises ``ValueError`` when ``m`` exceeds ``max_m``.
    """
    res = sweep_exhaustive(FW, FV, K, tol, domain, workers, max_m)
    return _report(res.m, res.masks, res.lower, res.upper, True, tol)


def randomized_masks(m: int, samples: int, seed: int) -> np.ndarray:
    """Deterministic weaving schedule as a ``(samples + 2 + 2m, m)`` bit matrix:
    empty, full, singletons, co-singletons, then uniform random masks."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    eye = np.eye(m, dtype=np.int8)
    fixed = [np.zeros((1, m), np.int8), np.ones((1, m), np.int8), eye, 1 - eye]
    rand = rng.integers(0, 2, size=(samples, m), dtype=np.int8)
    return np.concatenate(fixed + [rand])


def _bits_to_int(row) -> int:
    return sum(1 << i for i, b in enumerate(row) if b)


def certify_woven_randomized(
    FW: WeightedFamily,
    FV: WeightedFamily,
    K,
    samples: int,
    seed: int,
    tol: ToleranceConfig = DEFAULT_TOL,
    domain=None,
) -> WeavingReport:
    """Refutation search over a seeded subset of weavings.

    The returned ``universal_A`` is an upper estimate of the true universal
    lower bound, so ``woven=True`` only means "not refuted".
    """
    _check_pair(FW, FV)
    m = len(FW)
    rows = randomized_masks(m, samples, seed)
    lower, upper = sweep_masks(FW, FV, K, rows, tol, domain)
    # masks above 63 bits do not fit an int64 array, hence the object dtype
    masks = np.array([_bits_to_int(r) for r in rows], dtype=object)
    return _report(m, masks, lower, upper, False, tol)


def bessel_weaving_bound(FW: WeightedFamily, FV: WeightedFamily) -> float:
    """``B_1 + B_2``: an upper bound valid for every weaving of the pair."""
    _check_pair(FW, FV)
    return optimal_upper_bound(FW)[0] + optimal_upper_bound(FV)[0]
