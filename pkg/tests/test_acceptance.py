"""Acceptance gate: one test per criterion, numbered 1 to 10.

The terminal summary (see conftest) prints one PASS/FAIL line per criterion.
"""
import numpy as np
import pytest

from conftest import SEED, make_catalog
from demiclosure.demiclosedness import (GraphSequence, Tolerances, classical_certificate,
                                        firm_principle_certificate, multi_firm_certificate,
                                        multi_nonexp_certificate, nonexp_principle_certificate,
                                        theorem22_certificate)
from demiclosure.experiments import (ExperimentConfig, certify_dr_run, feasibility_demo_run,
                                     remark14_run, svaiter_shadow_run, zarantonello_run)
from demiclosure.hilbert import AffineSubspace, standard_basis_vector
from demiclosure.operators import (Affine, Ball, Box, Halfspace, LinearMonotone, NormalCone,
                                   OperatorMap, SubdiffAbsSum, SubdiffQuadratic, Zero,
                                   check_firmly_nonexpansive, check_monotone, check_nonexpansive,
                                   identity_map, minty_sample, projector_map, resolvent_map,
                                   sample_pairs, scaling_map)
from demiclosure.splitting import (DRProblem, asymptotic_regularity_check, dr_iterate,
                                   dr_operator_map)
from demiclosure import kernels

INV_SQRT2 = 0.7071067811865476
DIST = 0.7653668647301796
GAP = 0.2928932188134524
SLACK = 1e-9


def failed(report):
    return [h.name for h in report.hypotheses if not h.passed]


def test_criterion_01_zarantonello():
    """Zarantonello: P_C(e_0+e_n) has coordinate 0 = 1/sqrt2 and stays 0.765... from P_C e_0"""
    res = zarantonello_run(1000, probes=range(11))
    coord0 = res.sequences["coord0"][:, 0]
    assert coord0.size == 1000
    assert np.max(np.abs(coord0 - INV_SQRT2)) <= 1e-12
    wp = res.sequences["weak_limit_Pz"][0]
    expected = np.zeros(11)
    expected[0] = INV_SQRT2
    assert np.max(np.abs(wp - expected)) <= 1e-12
    dist = res.sequences["distance_to_P_e0"][:, 0]
    assert np.max(np.abs(dist - DIST)) <= 1e-12
    # weak limit of P_C z_n differs from P_C of the weak limit e_0
    assert res.scalars["weak_discontinuity_gap"] > 0.29
    assert res.ok


def test_criterion_02_counterexample():
    """Id - P_C: gap 1 - 1/sqrt2 and the classical certificate refuses"""
    res = remark14_run(1000)
    assert abs(res.scalars["gap"] - GAP) <= 1e-12
    cert = res.certificates["classical"]
    assert cert.verdict == "hypothesis-failed(strong-convergence)"
    assert failed(cert) == ["strong-convergence"]


def test_criterion_03_firm_nonexpansiveness():
    """Catalog resolvents and every DR operator are firmly nonexpansive on 10^4 pairs"""
    cat = make_catalog()
    pairs = sample_pairs(3, 10_000, np.random.default_rng(SEED))
    worst = -np.inf
    for name, A in cat.items():
        chk = check_firmly_nonexpansive(resolvent_map(A), pairs)
        assert chk.passed and chk.margin <= SLACK, name
        worst = max(worst, chk.margin)
    for a, A in cat.items():
        for b, B in cat.items():
            chk = check_firmly_nonexpansive(dr_operator_map(A, B), pairs)
            assert chk.passed and chk.margin <= SLACK, (a, b)
            worst = max(worst, chk.margin)
    bad = check_firmly_nonexpansive(scaling_map(2.0), pairs)
    assert not bad.passed and bad.margin > 0
    print(f"worst firm-nonexpansive margin {worst:.3e}")


def _rotation():
    R = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    return OperatorMap("rotation", lambda X: np.asarray(X) @ R.T)


def test_criterion_04_equivalence():
    """F firmly nonexpansive iff 2F - Id nonexpansive, on 10^3 pairs per map"""
    cat = make_catalog()
    maps = {name: resolvent_map(A) for name, A in cat.items()}
    maps.update({"half": scaling_map(0.5), "double": scaling_map(2.0), "minus": scaling_map(-1.0),
                 "rotation": _rotation(), "one_and_half": scaling_map(1.5)})
    rng = np.random.default_rng(SEED + 4)
    seen = set()
    for name, F in maps.items():
        pairs = sample_pairs(3, 1000, rng)
        R = OperatorMap(f"2{name}-Id", lambda X, F=F: 2.0 * F(X) - np.asarray(X))
        firm = check_firmly_nonexpansive(F, pairs, SLACK)
        ne = check_nonexpansive(R, pairs, SLACK)
        assert firm.passed == ne.passed, name
        seen.add(firm.passed)
        # per pair: ||x-y||^2 - firm LHS = (||x-y||^2 - ||Rx-Ry||^2) / 2
        X, Y = pairs[:, 0], pairs[:, 1]
        FX, FY = F(X), F(Y)
        lhs = np.sum((FX - FY) ** 2, 1) + np.sum(((X - FX) - (Y - FY)) ** 2, 1)
        rdiff = np.sum((R(X) - R(Y)) ** 2, 1)
        d2 = np.sum((X - Y) ** 2, 1)
        np.testing.assert_allclose(d2 - lhs, 0.5 * (d2 - rdiff), atol=SLACK * (1 + d2.max()))
    assert seen == {True, False}  # both directions exercised


def test_criterion_05_minty_monotonicity():
    """Minty samples of every catalog operator are monotone across 10^3 inputs"""
    rng = np.random.default_rng(SEED + 5)
    for name, A in make_catalog().items():
        X = rng.normal(scale=3.0, size=(1000, 3))
        p, u = minty_sample(A, X)
        chk = check_monotone(np.stack([p, u], axis=1), SLACK)
        assert chk.passed and chk.margin >= -SLACK, name


def test_criterion_06_dr_convergence():
    """Two lines at 30 degrees from (5,3): r_n <= 1e-10 within 500 steps, monotone residuals"""
    c, s = np.cos(np.pi / 6), np.sin(np.pi / 6)
    A = NormalCone(Affine(AffineSubspace.from_spanning([0.0, 0.0], [[1.0, 0.0]])))
    B = NormalCone(Affine(AffineSubspace.from_spanning([0.0, 0.0], [[c, s]])))
    trace, rep = dr_iterate(DRProblem(A, B, [5.0, 3.0], tol=1e-10, max_iter=500))
    assert rep.converged and rep.iterations <= 500
    assert rep.zer_residual <= 1e-10
    assert np.linalg.norm(rep.shadow_limit) <= 1e-8
    assert trace.contiguous
    assert np.all(np.diff(trace.residual) <= 1e-12)
    assert asymptotic_regularity_check(trace, 1e-10).passed
    print(f"30-degree lines: {rep.iterations} iterations")


def _svaiter_cases():
    ball = NormalCone(Ball([0.0, 0.0], 1.0))
    line = NormalCone(Affine(AffineSubspace.from_spanning([0.5, 0.0], [[0.0, 1.0]])))
    skew = LinearMonotone([[0.0, -1.0], [1.0, 0.0]])
    quad = SubdiffQuadratic(np.eye(2), np.zeros(2))
    return [("ball-line", ball, line, [3.0, -2.0]),
            ("zero-zero", Zero(), Zero(), [0.7, -1.3]),
            ("skew-quadratic", skew, quad, [1.0, 1.0])]


def test_criterion_07_svaiter_shadow():
    """DR shadows certified by the two-operator firm principle, identities to 1e-12"""
    for name, A, B, z0 in _svaiter_cases():
        res = svaiter_shadow_run(A, B, z0)
        mf = res.certificates["multi_firm"]
        assert mf.passed, (name, mf.verdict)
        for h in mf.hypotheses:
            if h.kind == "check":
                assert h.value <= SLACK, (name, h.name)
            else:
                assert h.value < 1e-6, (name, h.name, h.value)
        assert res.scalars["shadow_gap"] < 1e-8, name
        rep_x, rep_z = res.sequences["shadow_limit"][0], res.sequences["z_limit"][0]
        assert np.linalg.norm(rep_x - A.resolvent(rep_z)) < 1e-8, name
        assert res.scalars["shadow_gap_identity"] <= 1e-12, name
        assert res.scalars["summed_identity"] <= 1e-12, name
        assert res.ok, name
    # the shadow of the ball-line run is feasible, the skew run lands on the unique zero
    x = svaiter_shadow_run(*_svaiter_cases()[0][1:]).sequences["shadow_limit"][0]
    assert abs(x[0] - 0.5) <= 1e-8 and np.linalg.norm(x) <= 1 + 1e-8
    x = svaiter_shadow_run(*_svaiter_cases()[2][1:]).sequences["shadow_limit"][0]
    assert np.linalg.norm(x) <= 1e-8


def test_criterion_08_consensus():
    """Three boxes: common point in [1.5, 2], gaps < 1e-8, lifted run certified"""
    boxes = [Box([0.0], [2.0]), Box([1.0], [3.0]), Box([1.5], [2.5])]
    res = feasibility_demo_run(boxes, [0.0], ExperimentConfig())
    p = res.sequences["point"][0, 0]
    assert 1.5 - 1e-8 <= p <= 2.0 + 1e-8
    assert res.scalars["max_membership_gap"] < 1e-8
    assert res.parameters["lifted"]
    assert res.certificates["multi_nonexp"].passed


# -- criterion 9: a seeded matrix of problems with independently known zeros -----------


def _family_balls(rng):
    c = rng.normal(size=2)
    v = rng.normal(size=2)
    v /= np.linalg.norm(v)
    r1, r2 = rng.uniform(0.5, 2.0, size=2)
    c2 = c + v * rng.uniform(0.1, 0.9) * (r1 + r2)
    A, B = NormalCone(Ball(c, r1)), NormalCone(Ball(c2, r2))
    return A, B, lambda x: max(A.set.distance(x), B.set.distance(x)) < 1e-8


def _family_box_halfspace(rng):
    lo = rng.uniform(-2, 0, size=3)
    hi = lo + rng.uniform(0.5, 2, size=3)
    a = rng.normal(size=3)
    offset = float(a @ (0.5 * (lo + hi))) + rng.uniform(0, 1)  # box centre is feasible
    A, B = NormalCone(Box(lo, hi)), NormalCone(Halfspace(a, offset))
    return A, B, lambda x: max(A.set.distance(x), B.set.distance(x)) < 1e-8


def _family_linear_quadratic(rng):
    G, S, H = rng.normal(size=(3, 3, 3))
    M = G @ G.T / 3 + np.eye(3) * 0.1 + (S - S.T)
    Q = H @ H.T / 3
    b = rng.normal(size=3)
    x_star = np.linalg.solve(M + Q, -b)
    return LinearMonotone(M), SubdiffQuadratic(Q, b), lambda x: np.linalg.norm(x - x_star) < 1e-7


def _family_abs_quadratic(rng):
    q = rng.uniform(0.5, 2.0, size=3)
    b = rng.normal(scale=2.0, size=3)
    lam = rng.uniform(0.2, 1.5)
    # separable: q x + b + lam sign(x) contains 0  =>  x = -sign(b) max(|b| - lam, 0) / q
    x_star = -np.sign(b) * np.maximum(np.abs(b) - lam, 0.0) / q
    return (SubdiffAbsSum(lam, 3), SubdiffQuadratic(np.diag(q), b),
            lambda x: np.linalg.norm(x - x_star) < 1e-7)


def _family_line_ball(rng):
    p = rng.normal(size=2)
    d = rng.normal(size=2)
    A = NormalCone(Affine(AffineSubspace.from_spanning(p, [d])))
    B = NormalCone(Ball(p + rng.normal(scale=0.3, size=2), 1.0))
    return A, B, lambda x: max(A.set.distance(x), B.set.distance(x)) < 1e-8


FAMILIES = [_family_balls, _family_box_halfspace, _family_linear_quadratic,
            _family_abs_quadratic, _family_line_ball]


def test_criterion_09_certificate_soundness():
    """20 seeded DR runs with known zeros: firm and theorem22 certificates pass"""
    rng = np.random.default_rng(SEED + 9)
    tol = Tolerances()
    converged = 0
    for k in range(20):
        A, B, is_zero = FAMILIES[k % len(FAMILIES)](rng)
        z0 = rng.normal(scale=3.0, size=A.dim)
        trace, rep = dr_iterate(DRProblem(A, B, z0, extra_iterations=64))
        if not rep.converged:
            continue
        converged += 1
        assert is_zero(rep.shadow_limit), k
        certs = certify_dr_run(A, B, trace, tol)
        for name in ("firm", "theorem22", "multi_firm"):
            c = certs[name]
            assert not c.is_defect, (k, name, c.conclusions)  # would contradict the theorem
            assert c.passed, (k, name, c.verdict)
            assert c.conclusion_gap <= 10 * tol.concl_tol, (k, name)
    assert converged == 20


# -- criterion 10: negative controls, exactly one named hypothesis fails ---------------


def _moving(N=300):
    Z = np.zeros((N, N + 2))
    Z[:, 0] = 1.0
    Z[np.arange(N), np.arange(1, N + 1)] = 1.0
    return Z


def _settling(limit, n=200):
    limit = np.asarray(limit, dtype=float)
    return limit + (0.5 ** np.arange(1, n + 1))[:, None] * np.linspace(1.0, -1.0, limit.size)


def _negative_controls():
    Z = _moving()
    d = Z.shape[1]
    e0 = standard_basis_vector(0, d)
    ball = Ball(np.zeros(d), 1.0)
    P = projector_map(ball)
    probes = Tolerances(probes=range(11))
    C0 = AffineSubspace(np.zeros(d), e0[None, :])
    D0 = C0.complement((1 - INV_SQRT2) * e0)
    full2 = AffineSubspace.full_space(2)
    X = _settling([0.5, 0.0])
    X[:, 1] = 0.0
    xaxis = AffineSubspace.from_spanning([0.0, 0.0], [[1.0, 0.0]])
    yaxis = AffineSubspace.from_spanning([0.0, 0.0], [[0.0, 1.0]])
    T = OperatorMap("Id-P", lambda V: np.asarray(V) - P(V))
    return {
        "theorem22": (theorem22_certificate(GraphSequence(X, X.copy(), LinearMonotone(np.eye(2))),
                                            xaxis, yaxis), "D-residual"),
        "firm_principle": (firm_principle_certificate(P, Z, C0, D0, probes), "C-residual"),
        "nonexp_principle": (nonexp_principle_certificate(identity_map(), _settling([1.0, 4.0]), full2,
                                                          AffineSubspace.singleton([1.0, 1.0])), "D-residual"),
        "classical": (classical_certificate(T, Z, INV_SQRT2 * e0, probes), "strong-convergence"),
        "multi_firm": (multi_firm_certificate([P, P], [Z, Z], probes), "summed-residual"),
        "multi_nonexp": (multi_nonexp_certificate([identity_map(), identity_map()],
                                                  [_settling([0.0, 0.0]), _settling([1.0, 0.0])]),
                         "pairwise-gap"),
    }


def test_criterion_10_negative_controls():
    """Each checker has a fixture where exactly one named hypothesis fails"""
    controls = _negative_controls()
    assert set(controls) == {"theorem22", "firm_principle", "nonexp_principle", "classical",
                             "multi_firm", "multi_nonexp"}
    for name, (report, hyp) in controls.items():
        assert failed(report) == [hyp], (name, failed(report))
        assert report.verdict == f"hypothesis-failed({hyp})", name


def test_backend_reported():
    print(f"kernel backend: {kernels.BACKEND}")
    assert kernels.BACKEND in ("cython", "python")
