import re

import numpy as np
import pytest

from demiclosure.hilbert import AffineSubspace
from demiclosure.operators import (Affine, Ball, Box, Halfspace, LinearMonotone, NormalCone,
                                   ProductOperator, SubdiffAbsSum, SubdiffQuadratic, Zero)

SEED = 0x5EED


def make_catalog(d: int = 3, seed: int = SEED) -> dict:
    """One seeded instance of every catalog operator on R^d."""
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(d, d))
    S = rng.normal(size=(d, d))
    H = rng.normal(size=(d, d))
    line = AffineSubspace.from_spanning(rng.normal(size=d), [rng.normal(size=d)])
    return {
        "zero": Zero(d),
        "linear": LinearMonotone(G @ G.T / d + (S - S.T)),
        "skew": LinearMonotone(S - S.T),
        "ball": NormalCone(Ball(rng.normal(size=d), 1.5)),
        "box": NormalCone(Box(-np.ones(d), np.arange(1, d + 1, dtype=float))),
        "affine": NormalCone(Affine(line)),
        "halfspace": NormalCone(Halfspace(rng.normal(size=d), 0.3)),
        "abs_sum": SubdiffAbsSum(0.7, d),
        "quadratic": SubdiffQuadratic(H @ H.T / d, rng.normal(size=d)),
        "product": ProductOperator([SubdiffAbsSum(1.0), NormalCone(Box([0.0], [1.0])),
                                    Zero()], 1),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture(scope="session")
def catalog():
    return make_catalog()


# -- acceptance summary: one PASS/FAIL line per criterion ------------------------------

_CRITERIA: dict = {}


def _criterion(nodeid: str):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", nodeid)
    return int(m.group(1)) if m else None


def pytest_itemcollected(item):
    k = _criterion(item.nodeid)
    if k is not None:
        doc = (item.function.__doc__ or "").strip().splitlines()
        _CRITERIA[k] = {"title": doc[0] if doc else item.name, "outcome": "not run"}


def pytest_runtest_logreport(report):
    k = _criterion(report.nodeid)
    if k is None or k not in _CRITERIA:
        return
    if report.when == "call" or report.failed or report.skipped:
        entry = _CRITERIA[k]
        if entry["outcome"] in ("not run", "passed"):
            entry["outcome"] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        entry = _CRITERIA[k]
        verdict = "PASS" if entry["outcome"] == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {k:2d}: {verdict}  {entry['title']}")
