"""Demiclosedness principles as checkers over recorded sequences.

Each certificate takes finitely many recorded iterates, tests the
principle's hypotheses on a tail window, estimates the limits, and then
measures how far the principle's conclusion is from holding.

Two kinds of convergence are told apart:

* strong (``-> 0`` in norm): the largest residual norm over the last
  ``window`` entries must be below ``hyp_tol``;
* weak: a coordinatewise surrogate. On the probe coordinates the last
  ``window`` values must spread by less than ``hyp_tol`` and the whole
  sequence must stay bounded. The limit estimate is the tail mean on the
  probes and zero on every other coordinate, which is the weak limit of a
  sequence whose support keeps moving off to infinity.

A report's verdict is ``pass``, ``hypothesis-failed(<name>)`` naming the
first failing hypothesis, or ``conclusion-failed``. The last one means the
hypotheses held but the conclusion did not, which contradicts the theorem,
so it points to a bug in the data pipeline or in this module.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .hilbert import (AffineSubspace, DimensionError, affine_project, check_orthogonal_pair,
                      complement_basis, diagonal_subspace)
from .operators import (MonotoneOperator, OperatorMap, apply_map, averaged_map,
                        check_firmly_nonexpansive, check_nonexpansive)

#: Graph-membership tolerance for recorded pairs.
MEMBERSHIP_TOL = 1e-9
#: Spot-check slack for (firm) nonexpansiveness on recorded points.
SPOT_SLACK = 1e-9
#: Most pairs used by a spot check.
SPOT_PAIRS = 512


class OrthogonalityError(ValueError):
    """C and D do not satisfy ``D - D = (C - C)^perp``."""


@dataclass(frozen=True)
class Tolerances:
    """Tail-window semantics shared by all certificates.

    ``window=None`` means ``min(64, len // 4)`` (at least 1);
    ``probes=None`` means every coordinate.
    """

    hyp_tol: float = 1e-6
    concl_tol: float = 1e-6
    window: int | None = None
    probes: Sequence[int] | None = None
    bound: float = 1e8

    def window_for(self, n: int) -> int:
        w = self.window if self.window is not None else min(64, n // 4)
        return max(1, min(w, n))


class WeakLimit(NamedTuple):
    vector: np.ndarray
    converged: bool
    spread: float


def _weak_limit(seq: np.ndarray, probes, window: int, tol: float, bound: float = 1e8) -> WeakLimit:
    n, d = seq.shape
    probes = np.arange(d) if probes is None else np.asarray(probes, dtype=int)
    if probes.size and (probes.min() < 0 or probes.max() >= d):
        raise IndexError(f"probe index out of range for dimension {d}")
    tail = seq[n - window:, probes]
    spread = float(np.max(tail.max(axis=0) - tail.min(axis=0), initial=0.0))
    est = np.zeros(d)
    # centre on the last term so a settled (constant) tail is returned exactly
    est[probes] = tail[-1] + (tail - tail[-1]).mean(axis=0)
    top = float(np.max(np.linalg.norm(seq, axis=1)))
    ok = bool(np.isfinite(top) and top <= bound and spread < tol)
    return WeakLimit(est, ok, spread if np.isfinite(top) and top <= bound else np.inf)


def weak_limit_estimate(seq, probes=None, window: int | None = None,
                        tol: float = 1e-6) -> tuple[np.ndarray, bool]:
    """Coordinatewise tail limit of ``seq`` on ``probes``.

    Returns the estimate restricted to the probe coordinates and a flag that
    is false if any probe coordinate still moves by ``tol`` or more over the
    last ``window`` entries, or if some term has norm above ``1e8``.
    """
    S = np.asarray(seq, dtype=float)
    if S.ndim != 2 or S.shape[0] == 0:
        raise ValueError("weak_limit_estimate needs a non-empty sequence of vectors")
    if window is None:
        window = Tolerances().window_for(S.shape[0])
    if not 1 <= window <= S.shape[0]:
        raise ValueError(f"window {window} not in [1, {S.shape[0]}]")
    lim = _weak_limit(S, probes, window, tol)
    idx = np.arange(S.shape[1]) if probes is None else np.asarray(probes, dtype=int)
    return lim.vector[idx], lim.converged


# -- reports --------------------------------------------------------------------


@dataclass(frozen=True)
class Hypothesis:
    name: str
    kind: str  # "strong", "weak" or "check"
    value: float
    passed: bool


@dataclass
class CertificateReport:
    name: str
    hypotheses: list[Hypothesis]
    surrogate_limits: dict[str, np.ndarray]
    inner_product_trace: np.ndarray
    conclusions: dict[str, float]
    tolerances: Tolerances
    reduced: "CertificateReport | None" = None
    notes: list[str] = field(default_factory=list)

    @property
    def hypothesis_residuals(self) -> dict[str, float]:
        return {h.name: h.value for h in self.hypotheses}

    @property
    def failed_hypothesis(self) -> str | None:
        for h in self.hypotheses:
            if not h.passed:
                return h.name
        return None

    @property
    def conclusion_gap(self) -> float:
        vals = [v for v in self.conclusions.values()]
        if not vals:
            return 0.0
        return float("inf") if any(np.isnan(vals)) else float(max(vals))

    @property
    def verdict(self) -> str:
        failed = self.failed_hypothesis
        if failed is not None:
            return f"hypothesis-failed({failed})"
        if self.conclusion_gap < self.tolerances.concl_tol:
            return "pass"
        return "conclusion-failed"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def is_defect(self) -> bool:
        """Hypotheses held but the conclusion failed."""
        return self.verdict == "conclusion-failed"

    def to_dict(self) -> dict:
        t = self.tolerances
        return {
            "certificate": self.name,
            "verdict": self.verdict,
            "hypotheses": [
                {"name": h.name, "kind": h.kind, "value": h.value, "passed": h.passed}
                for h in self.hypotheses
            ],
            "surrogate_limits": {k: v.tolist() for k, v in self.surrogate_limits.items()},
            "inner_product_trace": self.inner_product_trace.tolist(),
            "conclusions": dict(self.conclusions),
            "conclusion_gap": self.conclusion_gap,
            "tolerances": {
                "hyp_tol": t.hyp_tol,
                "concl_tol": t.concl_tol,
                "window": t.window,
                "probes": None if t.probes is None else list(t.probes),
            },
            "notes": list(self.notes),
            "reduced": None if self.reduced is None else self.reduced.to_dict(),
        }


def _rownorms(M: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", M, M))


def _strong(name: str, residuals: np.ndarray, window: int, tol: Tolerances) -> Hypothesis:
    tail = float(np.max(residuals[-window:]))
    return Hypothesis(name, "strong", tail, bool(tail < tol.hyp_tol))


def _weak(name: str, lim: WeakLimit) -> Hypothesis:
    return Hypothesis(name, "weak", lim.spread, lim.converged)


def _spot_pairs(Z: np.ndarray) -> np.ndarray:
    n = Z.shape[0]
    if n == 1:
        return np.stack([Z, Z], axis=1)
    idx = np.unique(np.linspace(0, n - 2, min(n - 1, SPOT_PAIRS // 2)).astype(int))
    a = np.stack([Z[idx], Z[idx + 1]], axis=1)
    b = np.stack([Z[idx], np.broadcast_to(Z[-1], Z[idx].shape)], axis=1)
    return np.concatenate([a, b])


def _spot(name: str, check) -> Hypothesis:
    return Hypothesis(name, "check", check.margin, check.passed)


def _sequence(zs, dim: int | None = None) -> np.ndarray:
    Z = np.asarray(zs, dtype=float)
    if Z.ndim != 2 or Z.shape[0] == 0:
        raise ValueError(f"expected a non-empty sequence of vectors, got shape {Z.shape}")
    if dim is not None and Z.shape[1] != dim:
        raise DimensionError(f"sequence lives in dimension {Z.shape[1]}, expected {dim}")
    return np.ascontiguousarray(Z)


def _require_orthogonal(C: AffineSubspace, D: AffineSubspace) -> None:
    chk = check_orthogonal_pair(C, D)
    if not chk.passed:
        raise OrthogonalityError(chk.detail)


# -- single-operator principles -------------------------------------------------


@dataclass(frozen=True, eq=False)
class GraphSequence:
    """Recorded pairs ``(x_n, u_n)``, meant to lie in ``gra A``."""

    x: np.ndarray
    u: np.ndarray
    operator: MonotoneOperator | None = None

    def __post_init__(self):
        x, u = _sequence(self.x), _sequence(self.u)
        if x.shape != u.shape:
            raise DimensionError(f"x and u sequences differ in shape: {x.shape} vs {u.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)

    @classmethod
    def from_minty(cls, A: MonotoneOperator, zs) -> "GraphSequence":
        """``(J_A z_n, z_n - J_A z_n)`` for recorded ``z_n``."""
        Z = _sequence(zs, A.dim)
        X = A.resolvent(Z)
        return cls(X, Z - X, A)

    def membership_gaps(self) -> np.ndarray:
        """``||J_A(x_n + u_n) - x_n||`` per pair."""
        if self.operator is None:
            raise ValueError("no operator attached")
        return _rownorms(self.operator.resolvent(self.x + self.u) - self.x)


def theorem22_certificate(g: GraphSequence, C: AffineSubspace, D: AffineSubspace,
                          tol: Tolerances = Tolerances()) -> CertificateReport:
    """Graph sequence that converges weakly and approaches ``C x D`` in norm.

    Hypotheses: ``(x_n, u_n)`` in ``gra A`` (when ``g.operator`` is set),
    ``x_n`` and ``u_n`` converge weakly, ``x_n - P_C x_n -> 0`` and
    ``u_n - P_D u_n -> 0``. Conclusions: ``x in C``, ``u in D``,
    ``(x, u) in gra A`` and ``<x_n, u_n> -> <x, u>``.
    """
    _require_orthogonal(C, D)
    X, U = g.x, g.u
    if X.shape[1] != C.dim:
        raise DimensionError(f"sequence dimension {X.shape[1]} vs subspace dimension {C.dim}")
    n = X.shape[0]
    w = tol.window_for(n)
    hyps = []
    if g.operator is not None:
        gap = float(np.max(g.membership_gaps()))
        hyps.append(Hypothesis("graph-membership", "check", gap, gap <= MEMBERSHIP_TOL))
    lx = _weak_limit(X, tol.probes, w, tol.hyp_tol, tol.bound)
    lu = _weak_limit(U, tol.probes, w, tol.hyp_tol, tol.bound)
    hyps += [_weak("weak-limit:x", lx), _weak("weak-limit:u", lu)]
    hyps.append(_strong("C-residual", _rownorms(X - affine_project(C, X)), w, tol))
    hyps.append(_strong("D-residual", _rownorms(U - affine_project(D, U)), w, tol))

    x, u = lx.vector, lu.vector
    ip = np.einsum("ij,ij->i", X, U)
    concl = {
        "x-in-C": float(np.linalg.norm(x - affine_project(C, x))),
        "u-in-D": float(np.linalg.norm(u - affine_project(D, u))),
        "inner-product": float(np.max(np.abs(ip[-w:] - np.dot(x, u)))),
    }
    if g.operator is not None:
        concl["graph"] = float(np.linalg.norm(g.operator.resolvent(x + u) - x))
    return CertificateReport("theorem22", hyps, {"x": x, "u": u}, ip, concl, tol)


def firm_principle_certificate(F: Callable, zs, C: AffineSubspace, D: AffineSubspace,
                               tol: Tolerances = Tolerances()) -> CertificateReport:
    """Firm nonexpansiveness principle.

    With ``z_n`` converging weakly to ``z`` and ``F z_n`` weakly to ``x``,
    ``F z_n - P_C F z_n -> 0`` and ``(z_n - F z_n) - P_D(z_n - F z_n) -> 0``
    force ``x in C``, ``z in x + D`` and ``F z = x``.
    """
    _require_orthogonal(C, D)
    Z = _sequence(zs, C.dim)
    FZ = apply_map(F, Z)
    R = Z - FZ
    w = tol.window_for(Z.shape[0])
    lz = _weak_limit(Z, tol.probes, w, tol.hyp_tol, tol.bound)
    lx = _weak_limit(FZ, tol.probes, w, tol.hyp_tol, tol.bound)
    hyps = [
        _spot("firm-nonexpansive", check_firmly_nonexpansive(F, _spot_pairs(Z), SPOT_SLACK)),
        _weak("weak-limit:z", lz),
        _weak("weak-limit:Fz", lx),
        _strong("C-residual", _rownorms(FZ - affine_project(C, FZ)), w, tol),
        _strong("D-residual", _rownorms(R - affine_project(D, R)), w, tol),
    ]
    z, x = lz.vector, lx.vector
    concl = {
        "x-in-C": float(np.linalg.norm(x - affine_project(C, x))),
        "z-in-x+D": float(np.linalg.norm((z - x) - affine_project(D, z - x))),
        "Fz=x": float(np.linalg.norm(apply_map(F, z) - x)),
    }
    ip = np.einsum("ij,ij->i", FZ, R)
    return CertificateReport("firm_principle", hyps, {"z": z, "x": x}, ip, concl, tol)


def nonexp_principle_certificate(T: Callable, zs, C: AffineSubspace, D: AffineSubspace,
                                 tol: Tolerances = Tolerances()) -> CertificateReport:
    """Nonexpansiveness principle, reduced to the firm one via ``F = (Id + T)/2``.

    Conclusions: ``(z + y)/2 in C``, ``(z - y)/2 in D`` and ``T z = y``,
    where ``y`` is the weak limit of ``T z_n``.
    """
    _require_orthogonal(C, D)
    Z = _sequence(zs, C.dim)
    TZ = apply_map(T, Z)
    w = tol.window_for(Z.shape[0])
    lz = _weak_limit(Z, tol.probes, w, tol.hyp_tol, tol.bound)
    ly = _weak_limit(TZ, tol.probes, w, tol.hyp_tol, tol.bound)
    c_res = Z + TZ - affine_project(C, Z) - affine_project(C, TZ)
    d_res = Z - TZ - affine_project(D, Z) - affine_project(D, -TZ)
    hyps = [
        _spot("nonexpansive", check_nonexpansive(T, _spot_pairs(Z), SPOT_SLACK)),
        _weak("weak-limit:z", lz),
        _weak("weak-limit:Tz", ly),
        _strong("C-residual", _rownorms(c_res), w, tol),
        _strong("D-residual", _rownorms(d_res), w, tol),
    ]
    z, y = lz.vector, ly.vector
    mid, half = 0.5 * z + 0.5 * y, 0.5 * z - 0.5 * y
    concl = {
        "(z+y)/2-in-C": float(np.linalg.norm(mid - affine_project(C, mid))),
        "(z-y)/2-in-D": float(np.linalg.norm(half - affine_project(D, half))),
        "Tz=y": float(np.linalg.norm(apply_map(T, z) - y)),
    }
    reduced = firm_principle_certificate(averaged_map(T), Z, C, D, tol)
    ip = np.einsum("ij,ij->i", 0.5 * (Z + TZ), 0.5 * (Z - TZ))
    return CertificateReport("nonexp_principle", hyps, {"z": z, "y": y}, ip, concl, tol,
                             reduced=reduced)


def classical_certificate(T: Callable, zs, x_strong, tol: Tolerances = Tolerances()) -> CertificateReport:
    """Classical demiclosedness: ``z_n`` weakly to ``z``, ``z_n - T z_n -> x`` in norm.

    Routed through the nonexpansiveness principle with ``C = X`` and
    ``D = {x/2}``. If the strong-convergence precondition fails the
    certificate refuses: no reduction is attempted and the verdict names
    ``strong-convergence``.
    """
    Z = _sequence(zs)
    d = Z.shape[1]
    xs = np.asarray(x_strong, dtype=float)
    if xs.shape != (d,):
        raise DimensionError(f"x_strong must have shape ({d},), got {xs.shape}")
    TZ = apply_map(T, Z)
    w = tol.window_for(Z.shape[0])
    lz = _weak_limit(Z, tol.probes, w, tol.hyp_tol, tol.bound)
    hyps = [
        _spot("nonexpansive", check_nonexpansive(T, _spot_pairs(Z), SPOT_SLACK)),
        _weak("weak-limit:z", lz),
        _strong("strong-convergence", _rownorms(Z - TZ - xs), w, tol),
    ]
    z = lz.vector
    concl = {"z-Tz=x": float(np.linalg.norm(z - apply_map(T, z) - xs))}
    reduced, notes = None, []
    if hyps[-1].passed:
        C = AffineSubspace.full_space(d)
        D = AffineSubspace.singleton(0.5 * xs)
        reduced = nonexp_principle_certificate(T, Z, C, D, tol)
    else:
        notes.append("strong-convergence precondition failed; reduction not attempted")
    return CertificateReport("classical", hyps, {"z": z, "x": xs.copy()},
                             np.einsum("ij,ij->i", Z, Z - TZ), concl, tol, reduced=reduced, notes=notes)


# -- multi-operator principles --------------------------------------------------


def _bundle(Zs, m_min: int = 2) -> np.ndarray:
    S = np.asarray(Zs, dtype=float)
    if S.ndim != 3:
        raise DimensionError(f"expected m sequences of equal length and dimension, got shape {S.shape}")
    if S.shape[0] < m_min:
        raise ValueError(f"need at least {m_min} sequences, got {S.shape[0]}")
    if S.shape[1] == 0:
        raise ValueError("sequences are empty")
    return S


def _pairwise_max(S: np.ndarray) -> np.ndarray:
    m = S.shape[0]
    best = np.zeros(S.shape[1])
    for i in range(m):
        for j in range(i + 1, m):
            best = np.maximum(best, _rownorms(S[i] - S[j]))
    return best


def _lift_probes(probes, m: int, d: int):
    if probes is None:
        return None
    return [i * d + k for i in range(m) for k in probes]


def _product_map(maps: Sequence[Callable], d: int) -> OperatorMap:
    m = len(maps)

    def fn(v):
        V = np.atleast_2d(np.asarray(v, dtype=float))
        out = np.concatenate([apply_map(maps[i], V[:, i * d:(i + 1) * d]) for i in range(m)], axis=1)
        return out[0] if np.ndim(v) == 1 else out

    return OperatorMap("product(" + ",".join(getattr(f, "name", "F") for f in maps) + ")", fn)


def multi_firm_certificate(Fs: Sequence[Callable], Zs, tol: Tolerances = Tolerances()) -> CertificateReport:
    """Multi-operator principle for firmly nonexpansive ``F_1, ..., F_m``.

    Hypotheses: ``z_{i,n}`` weakly to ``z_i`` and ``F_i z_{i,n}`` weakly to a
    common ``x``; ``sum_i (z_{i,n} - F_i z_{i,n}) -> -m x + sum_i z_i`` and
    ``F_i z_{i,n} - F_j z_{j,n} -> 0`` in norm. Conclusion: ``F_i z_i = x``.

    The report's ``reduced`` entry re-checks the same data as a single firm
    principle on ``X^m`` with the diagonal as ``C`` and ``z - x + C^perp``
    as ``D``.
    """
    S = _bundle(Zs)
    m, n, d = S.shape
    if len(Fs) != m:
        raise ValueError(f"{len(Fs)} maps for {m} sequences")
    W = np.stack([apply_map(F, S[i]) for i, F in enumerate(Fs)])
    w = tol.window_for(n)
    lz = [_weak_limit(S[i], tol.probes, w, tol.hyp_tol, tol.bound) for i in range(m)]
    lx = [_weak_limit(W[i], tol.probes, w, tol.hyp_tol, tol.bound) for i in range(m)]
    x = np.mean([l.vector for l in lx], axis=0)
    zsum = np.sum([l.vector for l in lz], axis=0)
    disagreement = max(float(np.linalg.norm(l.vector - x)) for l in lx)

    hyps = [_spot(f"firm-nonexpansive[{i}]", check_firmly_nonexpansive(F, _spot_pairs(S[i]), SPOT_SLACK))
            for i, F in enumerate(Fs)]
    hyps += [_weak(f"weak-limit:z[{i}]", l) for i, l in enumerate(lz)]
    hyps += [_weak(f"weak-limit:Fz[{i}]", l) for i, l in enumerate(lx)]
    hyps.append(_strong("pairwise-gap", _pairwise_max(W), w, tol))
    hyps.append(_strong("summed-residual", _rownorms((S - W).sum(axis=0) - (zsum - m * x)), w, tol))
    hyps.append(Hypothesis("common-limit", "weak", disagreement, disagreement < tol.hyp_tol))

    concl = {"Fz=x": max(float(np.linalg.norm(apply_map(F, lz[i].vector) - x)) for i, F in enumerate(Fs))}
    limits = {f"z[{i}]": l.vector for i, l in enumerate(lz)}
    limits["x"] = x

    diag = diagonal_subspace(m, d)
    anchor = np.concatenate([l.vector for l in lz]) - np.tile(x, m)
    D = AffineSubspace(anchor, complement_basis(diag))
    lifted_tol = replace(tol, probes=_lift_probes(tol.probes, m, d))
    flat = np.ascontiguousarray(S.transpose(1, 0, 2).reshape(n, m * d))
    reduced = firm_principle_certificate(_product_map(Fs, d), flat, diag, D, lifted_tol)

    ip = np.einsum("inj,inj->n", W, S - W)
    return CertificateReport("multi_firm", hyps, limits, ip, concl, tol, reduced=reduced)


def multi_nonexp_certificate(Ts: Sequence[Callable], Zs, tol: Tolerances = Tolerances()) -> CertificateReport:
    """Multi-operator principle for nonexpansive ``T_1, ..., T_m``.

    Hypotheses: ``z_{i,n}`` weakly to ``z_i``, ``T_i z_{i,n}`` weakly to
    ``y_i``; ``sum_i (z_{i,n} - T_i z_{i,n}) -> sum_i (z_i - y_i)`` and
    ``z_{i,n} - z_{j,n} + T_i z_{i,n} - T_j z_{j,n} -> 0`` in norm.
    Conclusion: ``T_i z_i = y_i``. Reduced to :func:`multi_firm_certificate`
    with ``F_i = (Id + T_i)/2``.
    """
    S = _bundle(Zs)
    m, n, d = S.shape
    if len(Ts) != m:
        raise ValueError(f"{len(Ts)} maps for {m} sequences")
    Y = np.stack([apply_map(T, S[i]) for i, T in enumerate(Ts)])
    w = tol.window_for(n)
    lz = [_weak_limit(S[i], tol.probes, w, tol.hyp_tol, tol.bound) for i in range(m)]
    ly = [_weak_limit(Y[i], tol.probes, w, tol.hyp_tol, tol.bound) for i in range(m)]
    target = np.sum([a.vector - b.vector for a, b in zip(lz, ly)], axis=0)

    hyps = [_spot(f"nonexpansive[{i}]", check_nonexpansive(T, _spot_pairs(S[i]), SPOT_SLACK))
            for i, T in enumerate(Ts)]
    hyps += [_weak(f"weak-limit:z[{i}]", l) for i, l in enumerate(lz)]
    hyps += [_weak(f"weak-limit:Tz[{i}]", l) for i, l in enumerate(ly)]
    hyps.append(_strong("pairwise-gap", _pairwise_max(S + Y), w, tol))
    hyps.append(_strong("summed-residual", _rownorms((S - Y).sum(axis=0) - target), w, tol))

    concl = {"Tz=y": max(float(np.linalg.norm(apply_map(T, lz[i].vector) - ly[i].vector))
                         for i, T in enumerate(Ts))}
    limits = {f"z[{i}]": l.vector for i, l in enumerate(lz)}
    limits.update({f"y[{i}]": l.vector for i, l in enumerate(ly)})
    reduced = multi_firm_certificate([averaged_map(T) for T in Ts], S, tol)
    ip = np.einsum("inj,inj->n", 0.5 * (S + Y), 0.5 * (S - Y))
    return CertificateReport("multi_nonexp", hyps, limits, ip, concl, tol, reduced=reduced)
