"""Maximally monotone operators with exact resolvents, and property checkers.

Each catalog operator is maximally monotone by construction, so its
resolvent ``J = (Id + gamma A)^{-1}`` is a total, single-valued, firmly
nonexpansive map. All resolvents and projectors accept either one vector of
shape ``(d,)`` or a batch of row vectors of shape ``(n, d)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from . import kernels
from .hilbert import AffineSubspace, Check, DimensionError, as_vector

#: Default slack of the sampled property checkers.
SLACK = 1e-9


def _as_points(x, dim: int | None) -> tuple[np.ndarray, bool]:
    """Return a C-contiguous ``(n, d)`` batch and whether the input was 1-D."""
    X = np.asarray(x, dtype=float)
    if X.ndim not in (1, 2) or X.shape[-1] == 0:
        raise DimensionError(f"expected shape (d,) or (n, d), got {X.shape}")
    if dim is not None and X.shape[-1] != dim:
        raise DimensionError(f"dimension mismatch: operator acts on dimension {dim}, got {X.shape[-1]}")
    return np.ascontiguousarray(np.atleast_2d(X)), X.ndim == 1


def _restore(Y: np.ndarray, single: bool) -> np.ndarray:
    return Y[0] if single else Y


# -- convex sets ---------------------------------------------------------------


class ConvexSet:
    """Nonempty closed convex set with an exact projector."""

    kind: str = ""
    dim: int

    def project(self, x) -> np.ndarray:
        X, single = _as_points(x, self.dim)
        return _restore(self._project(X), single)

    def _project(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def distance(self, x) -> float:
        x = as_vector(x, self.dim)
        return float(np.linalg.norm(x - self.project(x)))

    def to_spec(self) -> dict:
        raise NotImplementedError


class Ball(ConvexSet):
    kind = "ball"

    def __init__(self, center, radius: float):
        if not radius > 0:
            raise ValueError(f"radius must be positive, got {radius}")
        self.center = as_vector(center).copy()
        self.radius = float(radius)
        self.dim = self.center.size

    def _project(self, X):
        return kernels.project_ball(X, self.center, self.radius)

    def to_spec(self):
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}


class Box(ConvexSet):
    kind = "box"

    def __init__(self, lower, upper):
        self.lower = as_vector(lower).copy()
        self.upper = as_vector(upper, self.lower.size).copy()
        if np.any(self.lower > self.upper):
            raise ValueError("box bounds must satisfy lower <= upper")
        self.dim = self.lower.size

    def _project(self, X):
        return kernels.project_box(X, self.lower, self.upper)

    def to_spec(self):
        return {"kind": self.kind, "lower": self.lower.tolist(), "upper": self.upper.tolist()}


class Affine(ConvexSet):
    kind = "affine"

    def __init__(self, subspace: AffineSubspace):
        self.subspace = subspace
        self.dim = subspace.dim

    def _project(self, X):
        return kernels.project_affine(X, self.subspace.anchor, self.subspace.basis)

    def to_spec(self):
        return self.subspace.to_spec()


class Halfspace(ConvexSet):
    """``{x : <normal, x> <= offset}``; the normal is rescaled to unit length."""

    kind = "halfspace"

    def __init__(self, normal, offset: float):
        a = as_vector(normal)
        na = float(np.linalg.norm(a))
        if na == 0.0:
            raise ValueError("halfspace normal must be nonzero")
        self.normal = a / na
        self.offset = float(offset) / na
        self.dim = a.size

    def _project(self, X):
        return kernels.project_halfspace(X, self.normal, self.offset)

    def to_spec(self):
        return {"kind": self.kind, "normal": self.normal.tolist(), "offset": self.offset}


class Diagonal(ConvexSet):
    """Diagonal ``{(y, ..., y)}`` of ``X^m``, acting on flattened product vectors."""

    kind = "diagonal"

    def __init__(self, m: int, d: int):
        if m < 2 or d < 1:
            raise ValueError(f"need m >= 2 and d >= 1, got m={m}, d={d}")
        self.m, self.d = m, d
        self.dim = m * d

    def _project(self, X):
        B = X.reshape(X.shape[0], self.m, self.d)
        mean = B.mean(axis=1, keepdims=True)
        return np.ascontiguousarray(np.broadcast_to(mean, B.shape).reshape(X.shape))

    def to_spec(self):
        return {"kind": self.kind, "m": self.m, "d": self.d}


# -- operators -----------------------------------------------------------------


class MonotoneOperator:
    """Catalog operator. ``dim`` is ``None`` for dimension-free operators."""

    kind: str = ""
    dim: int | None = None

    def resolvent(self, x, gamma: float = 1.0) -> np.ndarray:
        if not gamma > 0:
            raise ValueError(f"resolvent scale must be positive, got {gamma}")
        X, single = _as_points(x, self.dim)
        return _restore(self._resolvent(X, float(gamma)), single)

    def _resolvent(self, X: np.ndarray, gamma: float) -> np.ndarray:
        raise NotImplementedError

    def to_spec(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class Zero(MonotoneOperator):
    kind = "zero"

    def __init__(self, dim: int | None = None):
        self.dim = dim

    def _resolvent(self, X, gamma):
        return X.copy()

    def to_spec(self):
        return {"kind": self.kind} if self.dim is None else {"kind": self.kind, "dim": self.dim}


class LinearMonotone(MonotoneOperator):
    """``x -> M x`` with ``M + M^T`` positive semidefinite."""

    kind = "linear"

    def __init__(self, matrix):
        M = np.array(matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError(f"matrix must be square, got shape {M.shape}")
        sym = 0.5 * (M + M.T)
        lam = np.linalg.eigvalsh(sym).min()
        if lam < -1e-10 * max(1.0, np.abs(M).max()):
            raise ValueError(f"M + M^T is not positive semidefinite (min eigenvalue {lam:.3g})")
        self.matrix = M
        self.dim = M.shape[0]
        self._lu = {1.0: sla.lu_factor(np.eye(self.dim) + M)}

    def _factor(self, gamma):
        lu = self._lu.get(gamma)
        if lu is None:
            lu = self._lu[gamma] = sla.lu_factor(np.eye(self.dim) + gamma * self.matrix)
        return lu

    def _resolvent(self, X, gamma):
        return np.ascontiguousarray(sla.lu_solve(self._factor(gamma), X.T).T)

    def to_spec(self):
        return {"kind": self.kind, "matrix": self.matrix.tolist()}


class NormalCone(MonotoneOperator):
    """Normal cone of a convex set; its resolvent is the projector."""

    kind = "normal_cone"

    def __init__(self, convex_set: ConvexSet):
        self.set = convex_set
        self.dim = convex_set.dim

    def _resolvent(self, X, gamma):
        return self.set._project(X)

    def to_spec(self):
        return {"kind": self.kind, "set": self.set.to_spec()}


class SubdiffAbsSum(MonotoneOperator):
    """Subdifferential of ``weight * ||x||_1``; resolvent is soft thresholding."""

    kind = "abs_sum"

    def __init__(self, weight: float = 1.0, dim: int | None = None):
        if not weight > 0:
            raise ValueError(f"weight must be positive, got {weight}")
        self.weight = float(weight)
        self.dim = dim

    def _resolvent(self, X, gamma):
        return kernels.soft_threshold(X, gamma * self.weight)

    def to_spec(self):
        spec = {"kind": self.kind, "weight": self.weight}
        if self.dim is not None:
            spec["dim"] = self.dim
        return spec


class SubdiffQuadratic(MonotoneOperator):
    """Gradient of ``0.5 <x, Q x> + <b, x>`` with ``Q`` symmetric PSD."""

    kind = "quadratic"

    def __init__(self, Q, b=None):
        Q = np.array(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"Q must be square, got shape {Q.shape}")
        scale = max(1.0, np.abs(Q).max())
        if np.abs(Q - Q.T).max() > 1e-12 * scale:
            raise ValueError("Q must be symmetric")
        lam = np.linalg.eigvalsh(Q).min()
        if lam < -1e-10 * scale:
            raise ValueError(f"Q is not positive semidefinite (min eigenvalue {lam:.3g})")
        self.Q = Q
        self.dim = Q.shape[0]
        self.b = np.zeros(self.dim) if b is None else as_vector(b, self.dim).copy()
        self._cho = {1.0: sla.cho_factor(np.eye(self.dim) + Q)}

    def _factor(self, gamma):
        c = self._cho.get(gamma)
        if c is None:
            c = self._cho[gamma] = sla.cho_factor(np.eye(self.dim) + gamma * self.Q)
        return c

    def _resolvent(self, X, gamma):
        rhs = (X - gamma * self.b).T
        return np.ascontiguousarray(sla.cho_solve(self._factor(gamma), rhs).T)

    def to_spec(self):
        return {"kind": self.kind, "Q": self.Q.tolist(), "b": self.b.tolist()}


class ProductOperator(MonotoneOperator):
    """Blockwise operator ``(A_i)_{i in I}`` on flattened ``X^m``."""

    kind = "product"

    def __init__(self, operators: Sequence[MonotoneOperator], d: int):
        if len(operators) < 2:
            raise ValueError("a product operator needs at least two factors")
        for op in operators:
            if op.dim is not None and op.dim != d:
                raise DimensionError(f"factor {op!r} does not act on dimension {d}")
        self.operators = list(operators)
        self.m, self.d = len(operators), d
        self.dim = self.m * d

    def _resolvent(self, X, gamma):
        out = np.empty_like(X)
        for i, op in enumerate(self.operators):
            sl = slice(i * self.d, (i + 1) * self.d)
            out[:, sl] = op._resolvent(np.ascontiguousarray(X[:, sl]), gamma)
        return out

    def to_spec(self):
        return {"kind": self.kind, "d": self.d, "operators": [op.to_spec() for op in self.operators]}


def resolvent(A: MonotoneOperator, x, gamma: float = 1.0) -> np.ndarray:
    """``J_{gamma A} x``: the unique ``p`` with ``p + gamma u = x``, ``u in A p``."""
    return A.resolvent(x, gamma)


def reflected_resolvent(A: MonotoneOperator, x, gamma: float = 1.0) -> np.ndarray:
    """``R_A x = 2 J_A x - x``."""
    return 2.0 * A.resolvent(x, gamma) - np.asarray(x, dtype=float)


def minty_sample(A: MonotoneOperator, x, gamma: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Point of ``gra A`` from the Minty parametrization: ``(J x, (x - J x) / gamma)``."""
    p = A.resolvent(x, gamma)
    return p, (np.asarray(x, dtype=float) - p) / gamma


# -- single-valued maps --------------------------------------------------------


@dataclass(frozen=True)
class OperatorMap:
    """Named single-valued map ``X -> X`` used as the T or F of a checker.

    ``batched`` maps accept ``(n, d)`` inputs row-wise in one call.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    batched: bool = True

    def __call__(self, x):
        return self.fn(x)


def identity_map() -> OperatorMap:
    return OperatorMap("identity", lambda x: np.array(x, dtype=float))


def scaling_map(c: float) -> OperatorMap:
    return OperatorMap(f"scale({c:g})", lambda x: c * np.asarray(x, dtype=float))


def resolvent_map(A: MonotoneOperator, gamma: float = 1.0) -> OperatorMap:
    return OperatorMap(f"J[{A.kind}]", lambda x: A.resolvent(x, gamma))


def reflector_map(A: MonotoneOperator, gamma: float = 1.0) -> OperatorMap:
    return OperatorMap(f"R[{A.kind}]", lambda x: reflected_resolvent(A, x, gamma))


def projector_map(S: ConvexSet) -> OperatorMap:
    return OperatorMap(f"P[{S.kind}]", S.project)


def averaged_map(T: Callable) -> OperatorMap:
    """``1/2 Id + 1/2 T``; firmly nonexpansive whenever ``T`` is nonexpansive."""
    name = getattr(T, "name", "T")
    return OperatorMap(f"avg({name})",
                       lambda x: 0.5 * np.asarray(x, dtype=float) + 0.5 * apply_map(T, x),
                       batched=True)


def complement_map(F: Callable) -> OperatorMap:
    """``Id - F``."""
    name = getattr(F, "name", "F")
    return OperatorMap(f"Id-{name}", lambda x: np.asarray(x, dtype=float) - apply_map(F, x),
                       batched=True)


def apply_map(F: Callable, x) -> np.ndarray:
    """Evaluate ``F`` on a vector or row-wise on a batch."""
    X = np.asarray(x, dtype=float)
    if X.ndim == 1 or getattr(F, "batched", False):
        return np.asarray(F(X), dtype=float)
    return np.array([F(row) for row in X], dtype=float).reshape(X.shape)


# -- sampled property checkers -------------------------------------------------


def _pairs(pairs) -> tuple[np.ndarray, np.ndarray]:
    P = np.asarray(pairs, dtype=float)
    if P.ndim != 3 or P.shape[1] != 2 or P.shape[0] == 0:
        raise ValueError(f"expected a non-empty list of vector pairs, got shape {P.shape}")
    return np.ascontiguousarray(P[:, 0]), np.ascontiguousarray(P[:, 1])


def check_firmly_nonexpansive(F: Callable, pairs, slack: float = SLACK) -> Check:
    """Sampled test of ``||Fx-Fy||^2 + ||(x-Fx)-(y-Fy)||^2 <= ||x-y||^2``.

    ``margin`` is the largest excess of the left side over the right side.
    """
    X, Y = _pairs(pairs)
    FX = np.ascontiguousarray(apply_map(F, X))
    FY = np.ascontiguousarray(apply_map(F, Y))
    margins = kernels.fne_margins(X, Y, FX, FY)
    k = int(np.argmax(margins))
    worst = float(margins[k])
    return Check(worst <= slack, worst, f"worst pair #{k}")


def check_nonexpansive(T: Callable, pairs, slack: float = SLACK) -> Check:
    """Sampled test of ``||Tx - Ty|| <= ||x - y||``; ``margin`` is the worst excess."""
    X, Y = _pairs(pairs)
    TX = np.ascontiguousarray(apply_map(T, X))
    TY = np.ascontiguousarray(apply_map(T, Y))
    margins = kernels.ne_margins(X, Y, TX, TY)
    k = int(np.argmax(margins))
    worst = float(margins[k])
    return Check(worst <= slack, worst, f"worst pair #{k}")


def check_monotone(samples, slack: float = SLACK) -> Check:
    """Test ``<x - y, u - v> >= -slack`` over all pairs of graph samples ``(x, u)``.

    ``margin`` is the smallest observed inner product (negative means a
    violation), unlike the nonexpansiveness checkers.
    """
    S = np.asarray(samples, dtype=float)
    if S.ndim != 3 or S.shape[1] != 2 or S.shape[0] < 2:
        raise ValueError(f"need at least two (x, u) samples, got shape {S.shape}")
    X = np.ascontiguousarray(S[:, 0])
    U = np.ascontiguousarray(S[:, 1])
    best, i, j = kernels.monotone_min_margin(X, U)
    return Check(best >= -slack, float(best), f"worst pair ({i}, {j})")


def sample_pairs(d: int, n: int, rng: np.random.Generator, scale: float = 3.0) -> np.ndarray:
    """``n`` random pairs in dimension ``d`` as an ``(n, 2, d)`` array.

    Coordinates are Gaussian with standard deviation ``scale``; a quarter of
    the pairs are placed close together to probe the local behavior.
    """
    P = rng.normal(scale=scale, size=(n, 2, d))
    near = rng.random(n) < 0.25
    P[near, 1] = P[near, 0] + rng.normal(scale=1e-3 * scale, size=(int(near.sum()), d))
    return P


# -- JSON specs ------------------------------------------------------------------


def set_from_spec(spec: dict) -> ConvexSet:
    kind = spec["kind"]
    if kind == "ball":
        return Ball(spec["center"], spec["radius"])
    if kind == "box":
        return Box(spec["lower"], spec["upper"])
    if kind == "affine":
        return Affine(AffineSubspace.from_spanning(spec["anchor"], spec.get("basis", [])))
    if kind == "halfspace":
        return Halfspace(spec["normal"], spec["offset"])
    if kind == "diagonal":
        return Diagonal(spec["m"], spec["d"])
    raise ValueError(f"unknown set kind {kind!r}")


def operator_from_spec(spec: dict) -> MonotoneOperator:
    kind = spec["kind"]
    if kind == "zero":
        return Zero(spec.get("dim"))
    if kind == "linear":
        return LinearMonotone(spec["matrix"])
    if kind == "normal_cone":
        return NormalCone(set_from_spec(spec["set"]))
    if kind == "abs_sum":
        return SubdiffAbsSum(spec.get("weight", 1.0), spec.get("dim"))
    if kind == "quadratic":
        return SubdiffQuadratic(spec["Q"], spec.get("b"))
    if kind == "product":
        return ProductOperator([operator_from_spec(s) for s in spec["operators"]], spec["d"])
    raise ValueError(f"unknown operator kind {kind!r}")
