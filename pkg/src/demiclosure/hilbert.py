"""Finite-dimensional model of a real Hilbert space.

Vectors are 1-D float64 numpy arrays. A vector of length ``d`` stands for
the first ``d`` coordinates of an element of l2(N) whose remaining
coordinates vanish, so the sequences used in the experiments (finitely
supported per term) live in the model exactly.

Product points ``x = (x_i)_{i in I}`` of ``X^I`` are stored as ``(m, d)``
arrays wrapped in :class:`ProductPoint`; the flattened ``(m*d,)`` view is
what the splitting solver iterates on.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

#: Orthonormality tolerance for subspace bases.
ORTHO_TOL = 1e-12
#: Gram-Schmidt drop tolerance.
DROP_TOL = 1e-12


class DimensionError(ValueError):
    """Raised when operands live in spaces of different dimension."""


class Check(NamedTuple):
    """Outcome of a sampled property check.

    ``margin`` is the worst observed value of the quantity the check bounds,
    signed so that larger is worse unless the checker documents otherwise.
    """

    passed: bool
    margin: float
    detail: str = ""


def as_vector(x, dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a 1-D float64 array, optionally checking its length."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if dim is not None and v.size != dim:
        raise DimensionError(f"expected dimension {dim}, got {v.size}")
    return v


def _same_dim(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise DimensionError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")


def inner(x, y) -> float:
    """Euclidean inner product ``sum_k x_k y_k``."""
    x, y = as_vector(x), as_vector(y)
    _same_dim(x, y)
    return float(np.dot(x, y))


def norm(x) -> float:
    x = as_vector(x)
    return float(np.sqrt(np.dot(x, x)))


def standard_basis_vector(k: int, d: int) -> np.ndarray:
    """Unit vector ``e_k`` in dimension ``d``."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not 0 <= k < d:
        raise IndexError(f"index {k} out of range for dimension {d}")
    e = np.zeros(d)
    e[k] = 1.0
    return e


def gram_schmidt(vectors: Iterable, dim: int, drop_tol: float = DROP_TOL) -> np.ndarray:
    """Orthonormalize ``vectors`` by modified Gram-Schmidt (two passes).

    Vectors whose residual norm falls below ``drop_tol`` are dropped and the
    drop is logged. Returns a ``(k, dim)`` array, ``k`` possibly 0.
    """
    basis: list[np.ndarray] = []
    for idx, v in enumerate(vectors):
        w = as_vector(v, dim).copy()
        for _ in range(2):
            for q in basis:
                w -= np.dot(q, w) * q
        nw = np.sqrt(np.dot(w, w))
        if nw <= drop_tol:
            log.info("gram_schmidt: dropped dependent vector #%d (residual %.3g)", idx, nw)
            continue
        basis.append(w / nw)
    if not basis:
        return np.zeros((0, dim))
    return np.array(basis)


@dataclass(frozen=True, eq=False)
class AffineSubspace:
    """Closed affine subspace ``anchor + span(basis)``.

    ``basis`` holds orthonormal rows spanning the direction space ``V = C - C``;
    an empty basis gives the singleton ``{anchor}``.
    """

    anchor: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        anchor = as_vector(self.anchor).copy()
        d = anchor.size
        basis = np.array(self.basis, dtype=float).reshape(-1, d)
        gram = basis @ basis.T
        err = np.max(np.abs(gram - np.eye(basis.shape[0])), initial=0.0)
        if err > ORTHO_TOL:
            raise ValueError(f"basis is not orthonormal (max Gram error {err:.3g})")
        anchor.setflags(write=False)
        basis = np.ascontiguousarray(basis)
        basis.setflags(write=False)
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "basis", basis)

    @classmethod
    def from_spanning(cls, anchor, vectors: Iterable = ()) -> "AffineSubspace":
        """Build from any spanning set; dependent vectors are dropped."""
        anchor = as_vector(anchor)
        return cls(anchor, gram_schmidt(vectors, anchor.size))

    @classmethod
    def full_space(cls, d: int) -> "AffineSubspace":
        return cls(np.zeros(d), np.eye(d))

    @classmethod
    def singleton(cls, point) -> "AffineSubspace":
        point = as_vector(point)
        return cls(point, np.zeros((0, point.size)))

    @property
    def dim(self) -> int:
        """Ambient dimension."""
        return self.anchor.size

    @property
    def rank(self) -> int:
        """Dimension of the direction space."""
        return self.basis.shape[0]

    def project(self, z) -> np.ndarray:
        return affine_project(self, z)

    @cached_property
    def perp_basis(self) -> np.ndarray:
        """Orthonormal basis of ``V^perp`` (computed once)."""
        return _complement_rows(self)

    def complement(self, anchor=None) -> "AffineSubspace":
        """``anchor + V^perp``; anchored at the origin by default."""
        a = np.zeros(self.dim) if anchor is None else as_vector(anchor, self.dim)
        out = AffineSubspace(a, self.perp_basis)
        # (V^perp)^perp = V: hand over our basis instead of recomputing it
        out.__dict__["perp_basis"] = self.basis
        return out

    def to_spec(self) -> dict:
        return {"kind": "affine", "anchor": self.anchor.tolist(), "basis": self.basis.tolist()}


def affine_project(C: AffineSubspace, z) -> np.ndarray:
    """Nearest point of ``C`` to ``z``: ``anchor + sum_b <z - anchor, b> b``.

    Accepts a single vector or an ``(n, d)`` batch of row vectors.
    """
    Z = np.asarray(z, dtype=float)
    if Z.shape[-1] != C.dim or Z.ndim not in (1, 2):
        raise DimensionError(f"dimension mismatch: {Z.shape[-1]} vs {C.dim}")
    Z2 = np.ascontiguousarray(np.atleast_2d(Z))
    if 2 * C.rank <= C.dim:
        out = kernels.project_affine(Z2, C.anchor, C.basis)
    else:
        # cheaper through the complement: P_C z = z - P_{V^perp}(z - anchor)
        out = Z2 + C.anchor - kernels.project_affine(Z2, C.anchor, C.perp_basis)
    return out[0] if Z.ndim == 1 else out


def complement_basis(C: AffineSubspace) -> np.ndarray:
    """Orthonormal basis of ``(C - C)^perp`` as a ``(d - k, d)`` array."""
    return C.perp_basis


def _complement_rows(C: AffineSubspace) -> np.ndarray:
    d, k = C.dim, C.rank
    if k == 0:
        return np.eye(d)
    if k == d:
        return np.zeros((0, d))
    _, _, vt = np.linalg.svd(C.basis, full_matrices=True)
    # SVD rows are orthonormal already; one pass against C's basis trims cross terms
    comp = vt[k:]
    comp = comp - (comp @ C.basis.T) @ C.basis
    q, _ = np.linalg.qr(comp.T)
    return np.ascontiguousarray(q.T)


def check_orthogonal_pair(C: AffineSubspace, D: AffineSubspace, tol: float = ORTHO_TOL) -> Check:
    """Check ``D - D = (C - C)^perp``.

    Passes iff the two direction dimensions add up to the ambient dimension
    and every cross inner product of basis vectors is below ``tol``.
    """
    if C.dim != D.dim:
        raise DimensionError(f"dimension mismatch: {C.dim} vs {D.dim}")
    cross = float(np.max(np.abs(C.basis @ D.basis.T), initial=0.0))
    if C.rank + D.rank != C.dim:
        return Check(False, cross, f"ranks {C.rank} + {D.rank} != dimension {C.dim}")
    if cross >= tol:
        return Check(False, cross, f"direction spaces not orthogonal (max |<c,d>| = {cross:.3g})")
    return Check(True, cross)


# -- product space ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProductPoint:
    """Element ``(x_i)_{i in I}`` of ``X^I`` with ``m >= 2`` blocks."""

    blocks: np.ndarray

    def __post_init__(self):
        b = np.array(self.blocks, dtype=float)
        if b.ndim != 2 or b.shape[0] < 2 or b.shape[1] < 1:
            raise DimensionError(f"need an (m, d) block array with m >= 2, got shape {b.shape}")
        b.setflags(write=False)
        object.__setattr__(self, "blocks", b)

    @classmethod
    def from_flat(cls, v, m: int) -> "ProductPoint":
        v = as_vector(v)
        if v.size % m:
            raise DimensionError(f"length {v.size} is not a multiple of m={m}")
        return cls(v.reshape(m, -1))

    @property
    def m(self) -> int:
        return self.blocks.shape[0]

    @property
    def d(self) -> int:
        return self.blocks.shape[1]

    def flatten(self) -> np.ndarray:
        return self.blocks.reshape(-1).copy()

    def __add__(self, other: "ProductPoint") -> "ProductPoint":
        return ProductPoint(self.blocks + other.blocks)


def product_inner(p: ProductPoint, q: ProductPoint) -> float:
    """``sum_i <x_i, y_i>``."""
    if p.blocks.shape != q.blocks.shape:
        raise DimensionError(f"shape mismatch: {p.blocks.shape} vs {q.blocks.shape}")
    return float(sum(np.dot(a, b) for a, b in zip(p.blocks, q.blocks)))


def product_norm(p: ProductPoint) -> float:
    return float(np.sqrt(product_inner(p, p)))


def product_project(kind: str, p: ProductPoint) -> ProductPoint:
    """Project onto the diagonal ``{(y, ..., y)}`` or its complement.

    ``kind="diagonal"`` replaces every block by the block mean;
    ``kind="antidiagonal"`` subtracts it (blocks then sum to zero).
    """
    mean = p.blocks.mean(axis=0)
    if kind == "diagonal":
        return ProductPoint(np.broadcast_to(mean, p.blocks.shape))
    if kind == "antidiagonal":
        return ProductPoint(p.blocks - mean)
    raise ValueError(f"unknown product projection {kind!r}")


def diagonal_subspace(m: int, d: int) -> AffineSubspace:
    """The diagonal of ``X^m`` as a linear subspace of the flattened space."""
    basis = np.zeros((d, m * d))
    for k in range(d):
        basis[k, k::d] = 1.0 / np.sqrt(m)
    return AffineSubspace(np.zeros(m * d), basis)


def split_blocks(v: np.ndarray, m: int) -> Sequence[np.ndarray]:
    """View a flattened product vector (or batch) as its ``m`` blocks."""
    v = np.asarray(v)
    return np.split(v, m, axis=-1)
