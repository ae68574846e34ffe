"""Douglas-Rachford splitting with full iteration traces.

For maximally monotone ``A`` and ``B`` the Douglas-Rachford operator is

    T = 1/2 Id + 1/2 R_B R_A = J_B (2 J_A - Id) + (Id - J_A),

and the governing sequence ``z_{n+1} = T z_n`` has shadows ``J_A z_n`` that
approach a zero of ``A + B``. ``consensus_lift`` reduces ``0 in sum_i A_i x``
to a two-operator problem on ``X^m`` with the diagonal as second set.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .hilbert import Check, DimensionError, as_vector
from .operators import (Diagonal, MonotoneOperator, NormalCone, OperatorMap, ProductOperator,
                        reflected_resolvent)

log = logging.getLogger(__name__)

#: Slack for the monotone decrease of the residual sequence.
MONOTONE_SLACK = 1e-12


def dr_map(A: MonotoneOperator, B: MonotoneOperator, z, gamma: float = 1.0) -> np.ndarray:
    """``T z = z - J_A z + J_B(2 J_A z - z)``; vector or row batch."""
    z = np.asarray(z, dtype=float)
    x = A.resolvent(z, gamma)
    return z - x + B.resolvent(2.0 * x - z, gamma)


def dr_map_reflected(A: MonotoneOperator, B: MonotoneOperator, z, gamma: float = 1.0) -> np.ndarray:
    """Same operator written as ``1/2 z + 1/2 R_B R_A z``."""
    z = np.asarray(z, dtype=float)
    return 0.5 * z + 0.5 * reflected_resolvent(B, reflected_resolvent(A, z, gamma), gamma)


def dr_operator_map(A: MonotoneOperator, B: MonotoneOperator, gamma: float = 1.0) -> OperatorMap:
    return OperatorMap(f"DR[{A.kind},{B.kind}]", lambda z: dr_map(A, B, z, gamma))


def _common_dim(*ops: MonotoneOperator) -> int | None:
    dims = {op.dim for op in ops if op.dim is not None}
    if len(dims) > 1:
        raise DimensionError(f"operators act on different dimensions: {sorted(dims)}")
    return dims.pop() if dims else None


@dataclass
class DRProblem:
    """Find ``z`` with ``z = T z``; then ``J_A z`` is a zero of ``A + B``.

    ``extra_iterations`` keeps applying ``T`` after the stopping rule fires,
    so certificates have a settled tail window to look at.
    """

    A: MonotoneOperator
    B: MonotoneOperator
    z0: np.ndarray
    tol: float = 1e-10
    max_iter: int = 100_000
    probe_indices: Sequence[int] | None = None
    gamma: float = 1.0
    extra_iterations: int = 0
    trace_cap: int = 10_000
    trace_stride: int = 100
    trace_tail: int = 64

    def __post_init__(self):
        d = _common_dim(self.A, self.B)
        self.z0 = as_vector(self.z0, d)
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be positive, got {self.max_iter}")
        if self.probe_indices is None:
            self.probe_indices = list(range(self.dim))
        elif any(not 0 <= k < self.dim for k in self.probe_indices):
            raise IndexError(f"probe index out of range for dimension {self.dim}")

    @property
    def dim(self) -> int:
        return self.z0.size


@dataclass(frozen=True, eq=False)
class IterationTrace:
    """Recorded iterations; row ``k`` belongs to iteration ``iters[k]``.

    Up to ``trace_cap`` iterations are kept in full; beyond that only every
    ``trace_stride``-th iterate plus a rolling tail window survives.
    """

    iters: np.ndarray
    z: np.ndarray
    shadow: np.ndarray
    y: np.ndarray
    residual: np.ndarray
    inner_diag: np.ndarray
    probes: tuple = ()

    def __post_init__(self):
        for name in ("iters", "z", "shadow", "y", "residual", "inner_diag"):
            getattr(self, name).setflags(write=False)

    def __len__(self):
        return self.iters.size

    @property
    def contiguous(self) -> bool:
        """True if no iteration was dropped by the memory cap."""
        return bool(np.all(np.diff(self.iters) == 1))


@dataclass
class SolutionReport:
    converged: bool
    iterations: int
    z_limit: np.ndarray
    shadow_limit: np.ndarray
    zer_residual: float
    witness_a: np.ndarray = field(repr=False)
    witness_b: np.ndarray = field(repr=False)
    b_point: np.ndarray = field(repr=False)

    @property
    def witness_gap(self) -> float:
        """``||u + v||`` for ``u in A x``, ``v in B(J_B R_A z)``; equals ``||z - T z||``."""
        return float(np.linalg.norm(self.witness_a + self.witness_b))

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "z_limit": self.z_limit.tolist(),
            "shadow_limit": self.shadow_limit.tolist(),
            "zer_residual": self.zer_residual,
            "witness_gap": self.witness_gap,
        }


class _Recorder:
    def __init__(self, cap: int, stride: int, tail: int):
        self.cap, self.stride = cap, max(1, stride)
        self.rows: list[tuple] = []
        self.tail: deque = deque(maxlen=max(1, tail))

    def push(self, row: tuple) -> None:
        n = row[0]
        if n < self.cap or (n - self.cap) % self.stride == 0:
            self.rows.append(row)
        else:
            self.tail.append(row)

    def finish(self, probes) -> IterationTrace:
        kept = {r[0]: r for r in self.rows}
        for r in self.tail:
            kept.setdefault(r[0], r)
        rows = [kept[k] for k in sorted(kept)]
        cols = list(zip(*rows))
        return IterationTrace(
            iters=np.array(cols[0], dtype=int),
            z=np.array(cols[1]),
            shadow=np.array(cols[2]),
            y=np.array(cols[3]),
            residual=np.array(cols[4]),
            inner_diag=np.array(cols[5]),
            probes=tuple(probes),
        )


def dr_iterate(p: DRProblem) -> tuple[IterationTrace, SolutionReport]:
    """Iterate ``z_{n+1} = T z_n`` until ``||z_n - T z_n|| <= tol`` or ``max_iter``.

    Non-convergence is reported through ``converged=False``, never raised.
    """
    A, B, gamma = p.A, p.B, p.gamma
    rec = _Recorder(p.trace_cap, p.trace_stride, p.trace_tail)
    z = p.z0.copy()
    converged, n_stop, extra = False, p.max_iter, p.extra_iterations
    n = 0
    while True:
        x = A.resolvent(z, gamma)
        y = 2.0 * x - z
        w = B.resolvent(y, gamma)
        d = x - w
        r = float(np.sqrt(np.dot(d, d)))
        rec.push((n, z, x, y, r, float(np.dot(x, z - x))))
        if not converged and r <= p.tol:
            converged, n_stop = True, n
        if converged:
            if extra <= 0:
                break
            extra -= 1
        elif n >= p.max_iter:
            break
        z = z - d
        n += 1
    if not converged:
        log.info("dr_iterate: no convergence within %d iterations (residual %.3g)", p.max_iter, r)
    report = SolutionReport(
        converged=converged,
        iterations=n_stop,
        z_limit=z,
        shadow_limit=x,
        zer_residual=r,
        witness_a=(z - x) / gamma,
        witness_b=(y - w) / gamma,
        b_point=w,
    )
    return rec.finish(p.probe_indices), report


def asymptotic_regularity_check(trace, tol: float) -> Check:
    """Residuals ``||z_n - T z_n||`` are nonincreasing and end below ``tol``.

    ``trace`` is an :class:`IterationTrace` or a plain residual sequence.
    """
    r = np.asarray(trace.residual if isinstance(trace, IterationTrace) else trace, dtype=float)
    if r.size < 2:
        raise ValueError("asymptotic regularity needs at least two recorded residuals")
    rise = float(np.max(np.diff(r)))
    if rise > MONOTONE_SLACK:
        k = int(np.argmax(np.diff(r)))
        return Check(False, rise, f"residual increases after iteration {k}")
    if r[-1] > tol:
        return Check(False, float(r[-1]), f"final residual {r[-1]:.3g} above {tol:g}")
    return Check(True, float(r[-1]))


# -- product-space consensus ----------------------------------------------------


class ConsensusResult(NamedTuple):
    trace: IterationTrace
    report: SolutionReport
    point: np.ndarray
    diagonal_gap: float


def consensus_lift(ops: Sequence[MonotoneOperator], z0=None, d: int | None = None,
                   **problem_kw) -> DRProblem:
    """Lift ``0 in sum_i A_i x`` to DR on ``X^m`` with ``B = N_diagonal``.

    ``z0`` may be a base-space point (tiled over the blocks) or a full
    flattened product point; it defaults to zero.
    """
    m = len(ops)
    if m < 2:
        raise ValueError(f"consensus needs m >= 2 operators, got {m}")
    dim = _common_dim(*ops)
    if dim is None:
        dim = d
    if dim is None:
        if z0 is None:
            raise DimensionError("cannot infer the base dimension; pass d= or z0")
        # dimension-free factors only: z0 is read as a base-space point
        dim = as_vector(z0).size
    if z0 is None:
        z0 = np.zeros(m * dim)
    else:
        z0 = as_vector(z0)
        if z0.size == dim:
            z0 = np.tile(z0, m)
        elif z0.size != m * dim:
            raise DimensionError(f"z0 must have length {dim} or {m * dim}, got {z0.size}")
    probes = problem_kw.pop("probe_indices", None)
    if probes is not None:
        probes = [i * dim + k for i in range(m) for k in probes]
    return DRProblem(ProductOperator(ops, dim), NormalCone(Diagonal(m, dim)), z0,
                     probe_indices=probes, **problem_kw)


def read_common_block(v, m: int) -> np.ndarray:
    """Mean of the ``m`` blocks of a flattened product vector."""
    v = np.asarray(v, dtype=float)
    return v.reshape(m, -1).mean(axis=0)


def consensus_solve(ops: Sequence[MonotoneOperator], z0=None, **kw) -> ConsensusResult:
    """Run the lifted problem and map the shadow back to the base space."""
    p = consensus_lift(ops, z0, **kw)
    trace, report = dr_iterate(p)
    m = len(ops)
    point = read_common_block(report.shadow_limit, m)
    gap = float(np.linalg.norm(report.shadow_limit - np.tile(point, m)))
    return ConsensusResult(trace, report, point, gap)
