"""Reproducible runs built on the solver and the certificates.

* ``zarantonello_run``: the unit-ball projector is not weakly continuous
  along ``z_n = e_0 + e_n``.
* ``remark14_run``: with ``T = Id - P_C`` on the same sequence, weak
  convergence of ``z_n - T z_n`` is not enough for demiclosedness.
* ``svaiter_shadow_run``: a Douglas-Rachford run whose shadow sequence is
  certified by the two-operator firm principle.
* ``feasibility_demo_run``: convex feasibility, lifted to the product space
  when there are more than two sets.

Every positive verdict comes from a certificate checker.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import serialization
from .demiclosedness import (CertificateReport, GraphSequence, Tolerances, classical_certificate,
                             firm_principle_certificate, multi_firm_certificate,
                             multi_nonexp_certificate, theorem22_certificate, weak_limit_estimate)
from .hilbert import AffineSubspace, diagonal_subspace, standard_basis_vector
from .operators import (Ball, ConvexSet, MonotoneOperator, NormalCone, ProductOperator,
                        check_firmly_nonexpansive, complement_map, projector_map, reflector_map,
                        resolvent_map)
from .splitting import (DRProblem, IterationTrace, consensus_lift, dr_iterate, dr_map_reflected,
                        read_common_block)

log = logging.getLogger(__name__)

DEFAULT_SEED = 0x5EED
#: Tolerance for the per-iterate algebraic identities of the shadow argument.
IDENTITY_TOL = 1e-12


@dataclass
class ExperimentConfig:
    tol: float = 1e-10
    max_iter: int = 100_000
    window: int = 64
    hyp_tol: float = 1e-6
    concl_tol: float = 1e-6
    probes: Sequence[int] | None = None
    seed: int = DEFAULT_SEED

    def tolerances(self, probes=None) -> Tolerances:
        return Tolerances(self.hyp_tol, self.concl_tol, self.window,
                          probes if probes is not None else self.probes)


@dataclass
class ExperimentResult:
    name: str
    parameters: dict
    ok: bool
    scalars: dict[str, float] = field(default_factory=dict)
    verdicts: dict[str, str] = field(default_factory=dict)
    sequences: dict[str, np.ndarray] = field(default_factory=dict)
    certificates: dict[str, CertificateReport] = field(default_factory=dict)
    traces: dict[str, IterationTrace] = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "experiment": self.name,
            "ok": self.ok,
            "parameters": self.parameters,
            "scalars": self.scalars,
            "verdicts": self.verdicts,
            "certificates": {k: v.to_dict() for k, v in self.certificates.items()},
            "artifacts": self.artifacts,
        }

    def write(self, out_dir, fmt: str = "both") -> list[str]:
        """Write ``<name>.json`` and/or one CSV per sequence and trace."""
        out = Path(out_dir)
        written = []
        if fmt in ("csv", "both"):
            for key, seq in self.sequences.items():
                seq = np.atleast_2d(seq)
                header = ["n"] + [f"c{k}" for k in range(seq.shape[1])]
                p = serialization.write_csv(out / f"{self.name}_{key}.csv", header,
                                            ([n, *row] for n, row in enumerate(seq)))
                written.append(str(p))
            for key, tr in self.traces.items():
                written.append(str(serialization.write_trace_csv(out / f"{self.name}_{key}.csv", tr)))
        if fmt in ("json", "both"):
            path = out / f"{self.name}.json"
            self.artifacts = written + [str(path)]
            serialization.write_json(path, self.to_dict())
            written.append(str(path))
        else:
            self.artifacts = written
        return written


def _moving_sequence(N: int) -> np.ndarray:
    """Rows ``e_0 + e_n`` for ``n = 1..N`` in dimension ``N + 2``."""
    d = N + 2
    Z = np.zeros((N, d))
    Z[:, 0] = 1.0
    Z[np.arange(N), np.arange(1, N + 1)] = 1.0
    return Z


def _check_probes(probes, N):
    probes = list(range(11)) if probes is None else list(probes)
    if any(not 0 <= k < N + 2 for k in probes):
        raise IndexError(f"probe index out of range for dimension {N + 2}")
    return probes


def zarantonello_run(N: int = 1000, probes=None, window: int = 64) -> ExperimentResult:
    """Project ``z_n = e_0 + e_n`` onto the unit ball and compare weak limits."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    probes = _check_probes(probes, N)
    d = N + 2
    window = min(window, N)
    ball = Ball(np.zeros(d), 1.0)
    Z = _moving_sequence(N)
    PZ = ball.project(Z)
    e0 = standard_basis_vector(0, d)
    P_e0 = ball.project(e0)

    wz, okz = weak_limit_estimate(Z, probes, window)
    wp, okp = weak_limit_estimate(PZ, probes, window)
    dist = np.linalg.norm(PZ - P_e0, axis=1)
    coord0 = PZ[:, 0]
    wz_full = np.zeros(d)
    wz_full[probes] = wz
    wp_full = np.zeros(d)
    wp_full[probes] = wp
    gap = float(np.linalg.norm(wp_full - ball.project(wz_full)))

    # the demiclosedness hypotheses fail on this data: x_n keeps mass off span{e_0}
    C = AffineSubspace(np.zeros(d), e0[None, :])
    D = C.complement(anchor=(Z[0] - PZ[0])[0] * e0)
    tol = Tolerances(window=window, probes=probes)
    cert = theorem22_certificate(GraphSequence(PZ, Z - PZ), C, D, tol)

    fne = check_firmly_nonexpansive(ball.project, np.stack([Z, np.broadcast_to(e0, Z.shape)], axis=1))
    ok = bool(okz and okp and gap > tol.concl_tol and fne.passed
              and cert.failed_hypothesis == "C-residual")
    return ExperimentResult(
        name="zarantonello",
        parameters={"N": N, "dim": d, "probes": probes, "window": window},
        ok=ok,
        scalars={
            "coord0_first": float(coord0[0]),
            "coord0_min": float(coord0.min()),
            "coord0_max": float(coord0.max()),
            "coord0_spread": float(coord0.max() - coord0.min()),
            "weak_limit_z_coord0": float(wz[probes.index(0)]) if 0 in probes else float("nan"),
            "weak_limit_Pz_coord0": float(wp[probes.index(0)]) if 0 in probes else float("nan"),
            "distance_to_P_e0": float(dist[0]),
            "distance_spread": float(dist.max() - dist.min()),
            "weak_discontinuity_gap": gap,
            "fne_margin": fne.margin,
        },
        verdicts={
            "weak_limit_z": "converged" if okz else "not-converged",
            "weak_limit_Pz": "converged" if okp else "not-converged",
            "projector_weakly_continuous": "no" if gap > tol.concl_tol else "yes",
            "theorem22": cert.verdict,
            "firmly_nonexpansive": "pass" if fne.passed else "fail",
        },
        sequences={"coord0": coord0[:, None], "distance_to_P_e0": dist[:, None],
                   "weak_limit_z": wz[None, :], "weak_limit_Pz": wp[None, :]},
        certificates={"theorem22": cert},
    )


def remark14_run(N: int = 1000, probes=None, window: int = 64) -> ExperimentResult:
    """``T = Id - P_C``: weak-weak data that violates the naive principle."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    probes = _check_probes(probes, N)
    d = N + 2
    window = min(window, N)
    ball = Ball(np.zeros(d), 1.0)
    T = complement_map(projector_map(ball))
    Z = _moving_sequence(N)
    R = Z - T(Z)  # = P_C z_n
    tol = Tolerances(window=window, probes=probes)

    wz, okz = weak_limit_estimate(Z, probes, window)
    wr, okr = weak_limit_estimate(R, probes, window)
    z = np.zeros(d)
    z[probes] = wz
    x = np.zeros(d)
    x[probes] = wr
    gap = float(np.linalg.norm((z - T(z)) - x))

    cert = classical_certificate(T, Z, x, tol)
    fne = check_firmly_nonexpansive(T, np.stack([Z[:-1], Z[1:]], axis=1))
    ok = bool(okz and okr and gap > tol.concl_tol and fne.passed
              and cert.failed_hypothesis == "strong-convergence")
    return ExperimentResult(
        name="counterexample",
        parameters={"N": N, "dim": d, "probes": probes, "window": window},
        ok=ok,
        scalars={
            "weak_limit_z_coord0": float(z[0]),
            "weak_limit_residual_coord0": float(x[0]),
            "gap": gap,
            "strong_residual_tail": cert.hypothesis_residuals["strong-convergence"],
            "fne_margin": fne.margin,
        },
        verdicts={
            "naive_principle": "fails" if gap > tol.concl_tol else "holds",
            "classical": cert.verdict,
            "firmly_nonexpansive": "pass" if fne.passed else "fail",
        },
        sequences={"weak_limit_z": wz[None, :], "weak_limit_residual": wr[None, :]},
        certificates={"classical": cert},
    )


# -- Douglas-Rachford based runs ------------------------------------------------


def dr_identity_errors(A: MonotoneOperator, B: MonotoneOperator, trace: IterationTrace) -> dict[str, float]:
    """Per-iterate identities of the shadow argument, as max absolute errors.

    ``J_A z_n - J_B y_n = z_n - T z_n`` (with ``T`` in its reflected form)
    and ``(z_n - J_A z_n) + (y_n - J_B y_n) = J_A z_n - J_B y_n``.
    """
    Z, X, Y = trace.z, trace.shadow, trace.y
    W = B.resolvent(Y)
    TZ = dr_map_reflected(A, B, Z)
    e1 = np.abs((X - W) - (Z - TZ)).max()
    e2 = np.abs((Z - X) + (Y - W) - (X - W)).max()
    return {"shadow_gap_identity": float(e1), "summed_identity": float(e2)}


def certify_dr_run(A: MonotoneOperator, B: MonotoneOperator, trace: IterationTrace,
                   tol: Tolerances) -> dict[str, CertificateReport]:
    """Certify harvested DR data three ways.

    ``multi_firm`` feeds ``F_1 = J_A`` on ``z_n`` and ``F_2 = J_B`` on
    ``y_n = R_A z_n``. ``firm`` and ``theorem22`` state the same thing on
    ``X^2``: with ``C`` the diagonal and ``D = C^perp`` (its anchor vanishes
    because ``z + y = 2x``), for the blockwise resolvent and for the graph
    sequence of ``A x B``.
    """
    d = trace.z.shape[1]
    pt = Tolerances(tol.hyp_tol, tol.concl_tol, tol.window,
                    None if tol.probes is None else [i * d + k for i in range(2) for k in tol.probes],
                    tol.bound)
    AB = ProductOperator([A, B], d)
    flat = np.concatenate([trace.z, trace.y], axis=1)
    C = diagonal_subspace(2, d)
    D = C.complement()
    return {
        "multi_firm": multi_firm_certificate([resolvent_map(A), resolvent_map(B)], [trace.z, trace.y], tol),
        "firm": firm_principle_certificate(resolvent_map(AB), flat, C, D, pt),
        "theorem22": theorem22_certificate(GraphSequence.from_minty(AB, flat), C, D, pt),
    }


def svaiter_shadow_run(A: MonotoneOperator, B: MonotoneOperator, z0, cfg: ExperimentConfig | None = None,
                       name: str = "svaiter") -> ExperimentResult:
    """Douglas-Rachford run plus certification of the shadow limit.

    The run continues ``cfg.window`` iterations past the stopping rule so
    the certificates see a settled tail.
    """
    cfg = cfg or ExperimentConfig()
    p = DRProblem(A, B, z0, tol=cfg.tol, max_iter=cfg.max_iter, probe_indices=cfg.probes,
                  extra_iterations=cfg.window)
    trace, report = dr_iterate(p)
    tol = cfg.tolerances()
    certs = certify_dr_run(A, B, trace, tol)
    mf = certs["multi_firm"]
    z_lim, x_lim = mf.surrogate_limits["z[0]"], mf.surrogate_limits["x"]
    shadow_gap = float(np.linalg.norm(x_lim - A.resolvent(z_lim)))
    ids = dr_identity_errors(A, B, trace)
    ok = bool(report.converged and mf.passed and shadow_gap < 1e-8
              and max(ids.values()) <= IDENTITY_TOL)
    return ExperimentResult(
        name=name,
        parameters={"A": A.to_spec(), "B": B.to_spec(), "z0": np.asarray(z0, dtype=float).tolist(),
                    **asdict(cfg)},
        ok=ok,
        scalars={
            "iterations": report.iterations,
            "zer_residual": report.zer_residual,
            "witness_gap": report.witness_gap,
            "shadow_gap": shadow_gap,
            **ids,
        },
        verdicts={"converged": "yes" if report.converged else "no",
                  **{k: v.verdict for k, v in certs.items()}},
        sequences={"shadow_limit": report.shadow_limit[None, :], "z_limit": report.z_limit[None, :]},
        certificates=certs,
        traces={"trace": trace},
    )


def feasibility_demo_run(sets: Sequence[ConvexSet], z0=None, cfg: ExperimentConfig | None = None) -> ExperimentResult:
    """Find a point in the intersection of ``sets`` by Douglas-Rachford.

    Two sets are handled directly; more are lifted to the product space.
    The lifted (or direct) iterates are cross-checked with the
    multi-operator nonexpansive principle on ``R_A z_n`` and ``R_B y_n``.
    """
    cfg = cfg or ExperimentConfig()
    m = len(sets)
    if m < 2:
        raise ValueError("feasibility needs at least two sets")
    d = sets[0].dim
    if z0 is None:
        z0 = np.random.default_rng(cfg.seed).normal(size=d)
    ops = [NormalCone(S) for S in sets]
    kw = dict(tol=cfg.tol, max_iter=cfg.max_iter, extra_iterations=cfg.window)
    if m == 2:
        p = DRProblem(ops[0], ops[1], z0, probe_indices=cfg.probes, **kw)
    else:
        p = consensus_lift(ops, z0, probe_indices=cfg.probes, **kw)
    trace, report = dr_iterate(p)
    point = report.shadow_limit if m == 2 else read_common_block(report.shadow_limit, m)
    gaps = [S.distance(point) for S in sets]

    tol = Tolerances(cfg.hyp_tol, cfg.concl_tol, cfg.window)
    cert = multi_nonexp_certificate([reflector_map(p.A), reflector_map(p.B)], [trace.z, trace.y], tol)
    ok = bool(report.converged and max(gaps) < 1e-8 and cert.passed)
    return ExperimentResult(
        name="feasibility",
        parameters={"sets": [S.to_spec() for S in sets], "z0": np.asarray(z0, dtype=float).tolist(),
                    "lifted": m > 2, **asdict(cfg)},
        ok=ok,
        scalars={"iterations": report.iterations, "zer_residual": report.zer_residual,
                 "max_membership_gap": float(max(gaps)),
                 **{f"membership_gap_{i}": g for i, g in enumerate(gaps)}},
        verdicts={"converged": "yes" if report.converged else "no", "multi_nonexp": cert.verdict},
        sequences={"point": point[None, :]},
        certificates={"multi_nonexp": cert},
        traces={"trace": trace},
    )
