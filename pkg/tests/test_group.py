"""Central extension arithmetic, gauges, and cocycle bounds."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import quasilat as ql

coord = st.integers(min_value=-50, max_value=50)
triple = st.tuples(coord, coord, coord)


def h3_elt(c):
    return ql.element_from_ints([c[0]], [c[1], c[2]])


@given(triple, triple, triple)
def test_h3_group_laws(c1, c2, c3):
    H = ql.heisenberg_group()
    g, h, k = h3_elt(c1), h3_elt(c2), h3_elt(c3)
    assert H.mul(H.mul(g, h), k) == H.mul(g, H.mul(h, k))
    e = H.mul(g, H.inv(g))
    assert e.z == (0.0,) and e.q == (0.0, 0.0)
    e2 = H.mul(H.inv(g), g)
    assert e2.z == (0.0,) and e2.q == (0.0, 0.0)
    gh = H.mul(g, h)
    # central product: z adds with the symplectic correction, q just adds
    assert gh.q == (float(c1[1] + c2[1]), float(c1[2] + c2[2]))
    assert gh.z == (float(c1[0] + c2[0] + c1[1] * c2[2] - c1[2] * c2[1]),)


@given(triple, triple)
def test_h3_commutator_is_central(c1, c2):
    H = ql.heisenberg_group()
    g, h = h3_elt(c1), h3_elt(c2)
    c = H.commutator(g, h)
    assert c.q == (0.0, 0.0)
    assert c.z == (2.0 * (c1[1] * c2[2] - c1[2] * c2[1]),)


@given(triple)
def test_gauge_structure(c):
    H = ql.heisenberg_group()
    g = h3_elt(c)
    zn = abs(float(c[0]))
    qn = math.hypot(float(c[1]), float(c[2]))
    assert H.gauge(g) == pytest.approx(max(qn, math.sqrt(zn)))
    assert H.gauge(H.inv(g)) == pytest.approx(H.gauge(g))
    # homogeneity under the stratified dilation
    for t in (2.0, 1 + math.sqrt(2)):
        assert H.gauge(H.dilation(t, g)) == pytest.approx(t * H.gauge(g), rel=1e-12)


def test_abelian_gauge_is_euclidean():
    A = ql.abelian_group(2, 0)
    g = ql.element_from_ints([3, 4], [])
    assert A.gauge(g) == pytest.approx(5.0)
    assert A.is_abelian
    # a zero cocycle on a nontrivial q block is degenerate
    assert not ql.abelian_group(1, 2).is_nondegenerate


def test_h3_is_nondegenerate_nonabelian():
    H = ql.heisenberg_group()
    assert not H.is_abelian
    assert H.is_nondegenerate
    assert H.dim_z == 1 and H.dim_q == 2
    e = H.identity()
    assert e.z == (0.0,) and e.q == (0.0, 0.0)


def test_abelian_extension_mul_has_no_twist():
    A = ql.abelian_group(1, 2)
    g = ql.element_from_ints([1], [2, 3])
    h = ql.element_from_ints([10], [-1, 1])
    gh = A.mul(g, h)
    assert gh.z == (11.0,) and gh.q == (1.0, 4.0)
    assert A.inv(g).z == (-1.0,) and A.inv(g).q == (-2.0, -3.0)


def test_dilation_scales_blocks():
    H = ql.heisenberg_group()
    g = h3_elt((4, 2, -1))
    d = H.dilation(3.0, g)
    assert d.z == (36.0,) and d.q == (6.0, -3.0)


@given(triple, triple)
def test_cocycle_bilinear_antisymmetric(c1, c2):
    beta = ql.heisenberg_cocycle()
    u = np.array([float(c1[1]), float(c1[2])])
    v = np.array([float(c2[1]), float(c2[2])])
    assert beta.beta(u, v)[0] == -beta.beta(v, u)[0]
    assert beta.beta(u, u)[0] == 0.0
    assert beta.beta(2.0 * u, v)[0] == 2.0 * beta.beta(u, v)[0]
    assert beta.beta(u + v, v)[0] == beta.beta(u, v)[0] + beta.beta(v, v)[0]


def test_cocycle_array_forms_match_scalar():
    beta = ql.heisenberg_cocycle()
    rng = np.random.default_rng(5)
    U = rng.integers(-9, 10, size=(40, 2)).astype(float)
    V = rng.integers(-9, 10, size=(40, 2)).astype(float)
    rows = beta.beta_rows(U, V)
    pairs = beta.beta_pairs(U, V)
    for i in range(40):
        want = beta.beta(U[i], V[i])
        assert rows[i, 0] == want[0]
        assert pairs[i, i, 0] == want[0]


def test_cocycle_drift_bounds_hold():
    beta = ql.heisenberg_cocycle()
    rng = np.random.default_rng(6)
    U = rng.uniform(-3.0, 3.0, size=(200, 2))
    V = rng.uniform(-7.0, 7.0, size=(200, 2))
    vals = np.abs(beta.beta_pairs(U, V)[:, :, 0])
    assert vals.max() <= beta.box_drift(3.0, 7.0) + 1e-12
    norms = np.linalg.norm(U, axis=1)[:, None] * np.linalg.norm(V, axis=1)[None, :]
    assert np.all(vals <= beta.drift_bound * norms + 1e-12)


def test_cocycle_integrality_flag():
    assert ql.heisenberg_cocycle().is_integral
    assert ql.abelian_cocycle(1, 2).is_integral
    tilted = ql.Cocycle.from_matrices([np.array([[0.0, 0.5], [-0.5, 0.0]])], dim_q=2)
    assert not tilted.is_integral


def test_element_dimension_check():
    H = ql.heisenberg_group()
    flat = ql.element_from_ints([1, 2], [])
    with pytest.raises(ValueError):
        H.mul(flat, flat)


def test_ball_volumes():
    assert ql.ball_volume(1, 3.0) == pytest.approx(6.0)
    assert ql.ball_volume(2, 2.0) == pytest.approx(math.pi * 4.0)
    assert ql.ball_volume(3, 1.0) == pytest.approx(4.0 * math.pi / 3.0)
    # stratified gauge ball {max(|q|, sqrt|z|) <= T} = B_q(T) x B_z(T^2)
    assert ql.gauge_ball_volume(1, 2, 2.0) == pytest.approx(
        ql.ball_volume(2, 2.0) * ql.ball_volume(1, 4.0)
    )
    assert ql.gauge_ball_volume(1, 0, 5.0) == pytest.approx(10.0)
    assert ql.gauge_ball_volume(0, 2, 3.0) == pytest.approx(math.pi * 9.0)


def test_mul_rows_matches_elementwise():
    H = ql.heisenberg_group()
    rng = np.random.default_rng(11)
    z1 = rng.integers(-20, 21, size=(30, 1)).astype(float)
    q1 = rng.integers(-20, 21, size=(30, 2)).astype(float)
    z2 = rng.integers(-20, 21, size=(30, 1)).astype(float)
    q2 = rng.integers(-20, 21, size=(30, 2)).astype(float)
    z, q = H.mul_rows(z1, q1, z2, q2)
    for i in range(30):
        g = ql.GroupElement(z=tuple(z1[i]), q=tuple(q1[i]))
        h = ql.GroupElement(z=tuple(z2[i]), q=tuple(q2[i]))
        gh = H.mul(g, h)
        assert tuple(z[i]) == gh.z and tuple(q[i]) == gh.q
    gauges = H.gauge_rows(z, q)
    for i in range(30):
        assert gauges[i] == pytest.approx(
            H.gauge(ql.GroupElement(z=tuple(z[i]), q=tuple(q[i])))
        )


def test_distance_left_invariant():
    H = ql.heisenberg_group()
    g = h3_elt((1, 2, 3))
    h = h3_elt((-4, 0, 1))
    a = h3_elt((7, -2, 5))
    d0 = H.distance(g, h)
    d1 = H.distance(H.mul(a, g), H.mul(a, h))
    assert d0 == pytest.approx(d1, rel=1e-12)
