"""Shared fixtures plus a terminal summary for the acceptance suite."""

import re

import numpy as np
import pytest

import quasilat as ql

ACCEPTANCE = {
    1: "silver model set equals the exhaustive enumeration oracle",
    2: "Meyer axioms: gaps >= 0.1, difference sets nest, random patch fails",
    3: "group laws exact on 10^4 integer triples, dilation residual <= 1e-9",
    4: "twisted densities converge with monotonically shrinking Cauchy tail",
    5: "equivariance residuals decrease along T, final <= 5e-2",
    6: "central diffraction coefficients within stated tolerances and bounds",
    7: "Bragg peaks relatively dense and contain the epsilon-dual frequencies",
    8: "diffraction atoms match Palm coefficients within 5% of c_1",
    9: "counting sandwich around the smoothed ball integral holds",
    10: "Pisot/Salem suite: minimal polynomials, dilations, symplectic product",
    11: "uniformly large fibers detected, broken by a singleton, then repaired",
    12: "identical config and seed reproduce byte-identical outputs",
}

_results: dict[int, bool] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = re.match(r"test_ac(\d+)_", item.name)
    if m and rep.when in ("setup", "call") and rep.outcome != "passed":
        _results[int(m.group(1))] = False
    elif m and rep.when == "call" and rep.passed:
        _results.setdefault(int(m.group(1)), True)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        if k not in _results:
            continue
        verdict = "PASS" if _results[k] else "FAIL"
        terminalreporter.write_line(f"AC{k:<2d} {verdict:<4}  {ACCEPTANCE[k]}")


@pytest.fixture(scope="session")
def theta1_10k():
    return ql.generate_model_set(ql.silver_scheme(-1, 1), 10_000.0)


@pytest.fixture(scope="session")
def heisenberg():
    return ql.heisenberg_group()


@pytest.fixture(scope="session")
def palm_patch(heisenberg):
    # Big enough for S = 50, T = 101 Palm averages on the integer lattice.
    return ql.integer_lattice_patch(heisenberg, window_z=101.0, window_q=50.0)


@pytest.fixture(scope="session")
def split_product(heisenberg):
    Xi = ql.integer_lattice_patch(ql.abelian_group(1, 0), window_z=10.0)
    Delta = ql.integer_lattice_patch(ql.abelian_group(2, 0), window_z=2.0)
    return ql.symplectic_product(Xi, Delta, heisenberg, k=2)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260814)
