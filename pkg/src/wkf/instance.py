"""Instance files: JSON ingestion, serialization and seeded generation.

An instance file looks like::

    {
      "ambient_dim": 2,
      "families": {
        "W": [{"subspace": [[1, 0]], "weight": 1.0},
              {"subspace": [[0, 1]], "weight": 1.0}]
      },
      "operators": {"K": [[1, 0], [0, 1]]},
      "tolerances": {"rank_tol": 1e-10},
      "seed": 7,
      "erasure": {"J": [2], "C": 0.25}
    }

Subspaces are given by spanning row vectors and orthonormalized on load.
The operator name ``I`` resolves to the identity when the file does not
define it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .frames import Member, Subspace, WeightedFamily
from .numerics import ToleranceConfig, operator_norm, rank
from .weaving import DEFAULT_MAX_M, certify_woven_exhaustive

__all__ = ["InputError", "InstanceFile", "parse_instance", "load_instance", "serialize_instance", "generate", "KINDS"]

KINDS = ("frame", "woven-pair", "non-woven-pair", "erasure-instance")
_TOL_KEYS = ("rank_tol", "psd_tol", "bound_tol")


class InputError(ValueError):
    """Malformed or inconsistent user input (exit code 1)."""


def _number(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise InputError(f"{where}: expected a finite number, got {x!r}")
    return float(x)


def _matrix(rows, where: str, width: int | None = None) -> list:
    if not isinstance(rows, list) or not rows:
        raise InputError(f"{where}: expected a non-empty list of rows")
    out = []
    for r, row in enumerate(rows):
        if not isinstance(row, list) or not row:
            raise InputError(f"{where}[{r}]: expected a non-empty list of numbers")
        if width is not None and len(row) != width:
            raise InputError(f"{where}[{r}]: length {len(row)} does not match dimension {width}")
        width = len(row)
        out.append([_number(x, f"{where}[{r}][{c}]") for c, x in enumerate(row)])
    return out


@dataclass
class InstanceFile:
    ambient_dim: int
    families: dict[str, list[dict[str, Any]]]
    operators: dict[str, list[list[float]]] = field(default_factory=dict)
    tolerances: dict[str, float] | None = None
    seed: int | None = None
    erasure: dict[str, Any] | None = None

    def tol(self) -> ToleranceConfig:
        return ToleranceConfig(**(self.tolerances or {}))

    def family(self, name: str) -> WeightedFamily:
        if name not in self.families:
            raise InputError(f"unknown family {name!r} (available: {', '.join(self.families) or 'none'})")
        tol = self.tol()
        members = []
        for i, entry in enumerate(self.families[name]):
            try:
                sub = Subspace.span(entry["subspace"], tol)
            except ValueError as exc:
                raise InputError(f"families.{name}[{i}].subspace: {exc}") from None
            members.append(Member(sub, entry["weight"]))
        return WeightedFamily(tuple(members))

    def operator(self, name: str) -> np.ndarray:
        if name in self.operators:
            return np.array(self.operators[name], dtype=np.float64)
        if name == "I":
            return np.eye(self.ambient_dim)
        raise InputError(f"unknown operator {name!r} (available: {', '.join(self.operators) or 'none'}, I)")

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"ambient_dim": self.ambient_dim, "families": self.families, "operators": self.operators}
        if self.tolerances is not None:
            out["tolerances"] = self.tolerances
        if self.seed is not None:
            out["seed"] = self.seed
        if self.erasure is not None:
            out["erasure"] = self.erasure
        return out


def parse_instance(data: Any) -> InstanceFile:
    """Validate a decoded JSON object; every error names the offending field."""
    if not isinstance(data, dict):
        raise InputError("instance: expected a JSON object")
    known = {"ambient_dim", "families", "operators", "tolerances", "seed", "erasure"}
    extra = set(data) - known
    if extra:
        raise InputError(f"instance: unknown field(s) {', '.join(sorted(extra))}")
    n = data.get("ambient_dim")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InputError(f"ambient_dim: expected a positive integer, got {n!r}")
    fams = data.get("families")
    if not isinstance(fams, dict) or not fams:
        raise InputError("families: expected a non-empty object of named families")
    families = {}
    for name, members in fams.items():
        if not isinstance(members, list) or not members:
            raise InputError(f"families.{name}: expected a non-empty list of members")
        parsed = []
        for i, entry in enumerate(members):
            where = f"families.{name}[{i}]"
            if not isinstance(entry, dict) or set(entry) != {"subspace", "weight"}:
                raise InputError(f"{where}: expected an object with 'subspace' and 'weight'")
            vectors = _matrix(entry["subspace"], f"{where}.subspace", n)
            if not any(any(x != 0.0 for x in v) for v in vectors):
                raise InputError(f"{where}.subspace: spanning set is zero")
            weight = _number(entry["weight"], f"{where}.weight")
            if weight <= 0:
                raise InputError(f"{where}.weight: must be positive, got {weight}")
            parsed.append({"subspace": vectors, "weight": weight})
        families[name] = parsed
    ops = data.get("operators", {})
    if not isinstance(ops, dict):
        raise InputError("operators: expected an object of named matrices")
    operators = {name: _matrix(rows, f"operators.{name}") for name, rows in ops.items()}
    tolerances = data.get("tolerances")
    if tolerances is not None:
        if not isinstance(tolerances, dict) or set(tolerances) - set(_TOL_KEYS):
            raise InputError(f"tolerances: expected an object with keys among {', '.join(_TOL_KEYS)}")
        tolerances = {k: _number(v, f"tolerances.{k}") for k, v in tolerances.items()}
        if any(v < 0 for v in tolerances.values()):
            raise InputError("tolerances: values must be non-negative")
    seed = data.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise InputError(f"seed: expected an integer, got {seed!r}")
    erasure = data.get("erasure")
    if erasure is not None:
        if not isinstance(erasure, dict) or set(erasure) != {"J", "C"}:
            raise InputError("erasure: expected an object with 'J' and 'C'")
        J = erasure["J"]
        if not isinstance(J, list) or not J or not all(isinstance(j, int) and not isinstance(j, bool) for j in J):
            raise InputError("erasure.J: expected a non-empty list of integers")
        erasure = {"J": list(J), "C": _number(erasure["C"], "erasure.C")}
    return InstanceFile(n, families, operators, tolerances, seed, erasure)


def load_instance(text: str) -> InstanceFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"instance is not valid JSON: {exc}") from None
    return parse_instance(data)


def serialize_instance(inst: InstanceFile) -> str:
    return json.dumps(inst.to_dict(), indent=2) + "\n"


# -- generation ---------------------------------------------------------------


def _rows(B: np.ndarray) -> list:
    return [[float(x) for x in row] for row in B]


def _member(vectors: np.ndarray, weight: float) -> dict:
    return {"subspace": _rows(np.atleast_2d(vectors)), "weight": float(weight)}


def _random_subspace_rows(rng, n: int, d: int) -> np.ndarray:
    return rng.standard_normal((d, n))


def _orthogonal(rng, n: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def _gen_frame(rng, n, m, dims):
    if m * dims < n:
        raise InputError(f"m*dims = {m * dims} < n = {n}: the family cannot span R^{n}")
    for _ in range(100):
        spans = [_random_subspace_rows(rng, n, dims) for _ in range(m)]
        if rank(np.vstack(spans).T) == n:
            break
    weights = rng.uniform(0.5, 2.0, m)
    return {"W": [_member(s, w) for s, w in zip(spans, weights)]}


def _gen_woven(rng, n, m, dims):
    if m < n:
        raise InputError(f"woven-pair needs m >= n so that the shared cores span R^{n} (got m={m}, n={n})")
    for _ in range(100):
        cores = rng.standard_normal((m, n))
        if rank(cores.T) == n:
            break
    W, V = [], []
    for i in range(m):
        extra_w = rng.standard_normal((dims - 1, n))
        extra_v = rng.standard_normal((dims - 1, n))
        W.append(_member(np.vstack([cores[i], extra_w]), rng.uniform(0.5, 2.0)))
        V.append(_member(np.vstack([cores[i], extra_v]), rng.uniform(0.5, 2.0)))
    return {"W": W, "V": V}


def _gen_non_woven(rng, n, m):
    if n < 2 or m < n:
        raise InputError(f"non-woven-pair needs n >= 2 and m >= n (got n={n}, m={m})")
    Q = _orthogonal(rng, n)
    q = Q.T
    W, V = [], []
    others = np.delete(q, 1, axis=0)
    for i in range(m):
        if i < n:
            W.append(_member(q[i], rng.uniform(0.5, 2.0)))
            V.append(_member(q[(i + 1) % n], rng.uniform(0.5, 2.0)))
        else:
            # extra members stay orthogonal to q_1, preserving the obstruction at sigma = {0}
            vec = rng.standard_normal(n - 1) @ others
            W.append(_member(vec, rng.uniform(0.5, 2.0)))
            V.append(_member(vec, rng.uniform(0.5, 2.0)))
    return {"W": W, "V": V}


def _gen_erasure(rng, n, m, dims):
    r = max(1, m // 4)
    if m - r < n:
        raise InputError(f"erasure-instance needs m - max(1, m//4) >= n (got m={m}, n={n})")
    if m > DEFAULT_MAX_M:
        raise InputError(f"erasure-instance needs m <= {DEFAULT_MAX_M} to certify C exhaustively")
    fams = _gen_woven(rng, n, m - r, dims)
    K = rng.standard_normal((n, n)) + n * np.eye(n)
    K /= operator_norm(K)
    extra = [(rng.standard_normal((dims, n)), rng.uniform(0.2, 0.5)) for _ in range(r)]
    J = list(range(m - r, m))
    Kinv = np.linalg.inv(K)
    for _ in range(60):
        W = fams["W"] + [_member(v, w) for v, w in extra]
        V = fams["V"] + [_member(v, w) for v, w in extra]
        inst = InstanceFile(n, {"W": W, "V": V}, {"K": _rows(K)})
        FW, FV = inst.family("W"), inst.family("V")
        S_J = sum(FW[j].weight ** 2 * FW[j].subspace.projector() for j in J)
        C = 1.05 * float(np.linalg.eigvalsh(Kinv @ S_J @ Kinv.T)[-1])
        A = certify_woven_exhaustive(FW, FV, K).universal_A
        if C < 0.9 * A:
            return {"W": W, "V": V}, K, {"J": J, "C": C}
        extra = [(v, 0.5 * w) for v, w in extra]
    raise InputError("could not construct an erasure instance with C < A")


def generate(kind: str, n: int, m: int, dims: int = 1, seed: int = 0) -> InstanceFile:
    """Deterministic instance of the requested ``kind`` from ``seed``.

    ``woven-pair`` shares one spanning core direction per index between the
    two families, so every weaving contains the cores and is a frame.
    ``non-woven-pair`` rotates the axis-swap obstruction: the weaving
    ``sigma = {0}`` misses one direction entirely.
    """
    if kind not in KINDS:
        raise InputError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    if n < 1 or m < 1 or dims < 1:
        raise InputError("n, m and dims must be positive")
    if dims > n:
        raise InputError(f"dims = {dims} exceeds n = {n}")
    rng = np.random.default_rng(seed)
    erasure = None
    if kind == "frame":
        families = _gen_frame(rng, n, m, dims)
    elif kind == "woven-pair":
        families = _gen_woven(rng, n, m, dims)
    elif kind == "non-woven-pair":
        families = _gen_non_woven(rng, n, m)
    else:
        families, K, erasure = _gen_erasure(rng, n, m, dims)
    if kind != "erasure-instance":
        K = rng.standard_normal((n, n))
    T = rng.standard_normal((n, n))
    T /= operator_norm(T)
    operators = {"K": _rows(K), "T": _rows(T)}
    return InstanceFile(n, families, operators, None, seed, erasure)
