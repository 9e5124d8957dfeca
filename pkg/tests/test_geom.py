import math

import numpy as np
import pytest

from kkconformal import jet as J
from kkconformal import models as M
from kkconformal.geom import (PAPER, STANDARD, Box, Geometry, GeometryError, MetricField, christoffel,
                              cov_deriv, curvature_bundle)
from kkconformal.jet import Jet3

import oracles as O

KINDS = [(M.SPHERE, 1.0), (M.HYPERBOLIC, -1.0)]


def sample(m, n, seed):
    rng = np.random.default_rng(seed)
    return [m.domain.sample(u) for u in rng.random((n, m.dim))]


def test_euclidean_christoffel_zero():
    flat = M.constant_curvature_space(5, 0.0, M.FLAT)
    assert not np.abs(christoffel(flat, np.full(5, 0.3))).any()


def test_two_sphere_christoffel():
    s2 = M.constant_curvature_space(2, 2.0, M.SPHERE, M.HYPERSPHERICAL)  # unit radius, (theta, phi)
    gam = christoffel(s2, [math.pi / 4, 1.0])
    assert gam[1, 1, 0] == pytest.approx(-0.5, abs=1e-14)  # Gamma^theta_{phi phi}
    assert gam[0, 1, 1] == pytest.approx(1.0, abs=1e-14)  # Gamma^phi_{theta phi} = cot(pi/4)


def test_conformal_christoffel_closed_form():
    dim = 4
    ev = lambda c: [[J.exp(c[0] * 2.0) if i == j else c[0] * 0.0 for j in range(dim)] for i in range(dim)]  # noqa: E731
    m = MetricField(dim, ev, Box.cube(dim, 1.0))
    p = np.array([0.3, -0.2, 0.5, 0.1])
    ref = O.conformal_christoffel(np.eye(dim)[0])
    assert np.abs(christoffel(m, p) - ref).max() <= 1e-12


@pytest.mark.parametrize("kind,sign", KINDS)
@pytest.mark.parametrize("dim", [3, 4, 5, 6, 7])
def test_space_forms(kind, sign, dim):
    mag = 2.0 * dim * (dim - 1)  # radius 1/sqrt(2)
    m = M.constant_curvature_space(dim, mag, kind)
    for p in sample(m, 3, dim):
        b = curvature_bundle(m, p)
        assert b.scalar == pytest.approx(-sign * mag, rel=1e-11)  # paper convention: spheres negative
        ref = O.sphere_riemann_lowered(m.values(p), sign * mag / (dim * (dim - 1)))
        assert np.abs(b.riemann_lowered - ref).max() <= 1e-10 * np.abs(ref).max()
        assert np.abs(b.weyl).max() <= 1e-10
        assert np.abs(b.cotton).max() <= 1e-9


def test_unit_three_sphere_hyperspherical():
    m = M.constant_curvature_space(3, 6.0, M.SPHERE, M.HYPERSPHERICAL)
    for p in sample(m, 20, 0):
        assert curvature_bundle(m, p).scalar == pytest.approx(-6.0, rel=1e-12)
        assert curvature_bundle(m, p, STANDARD).scalar == pytest.approx(6.0, rel=1e-12)


def test_flat_everything_zero():
    m = M.constant_curvature_space(4, 0.0, M.FLAT)
    b = curvature_bundle(m, np.full(4, 0.2))
    for t in (b.riemann, b.ricci, b.cotton, b.weyl):
        assert np.abs(t).max() <= 1e-13


@pytest.mark.parametrize("seed", range(5))
def test_weyl_vanishes_in_three_dimensions(seed):
    m = O.polynomial_metric(3, seed)
    p = sample(m, 1, seed)[0]
    b = curvature_bundle(m, p)
    assert np.abs(b.riemann).max() > 1e-2  # genuinely curved
    assert np.abs(b.weyl).max() <= 1e-10


@pytest.mark.parametrize("dim", [4, 5, 7])
def test_cotton_weyl_identity(dim):
    m = O.polynomial_metric(dim, 100 + dim)
    geo = Geometry(m.jet(sample(m, 1, dim)[0]))
    lhs = (dim - 3) * geo.cotton_paper.value
    rhs = (dim - 2) * np.einsum("JKI->IJK", geo.weyl_divergence.value)
    assert np.abs(lhs).max() > 1e-3
    assert O.rel_err(lhs, rhs) <= 1e-8


@pytest.mark.parametrize("dim", [4, 5, 6, 7])
def test_conformally_flat_witness(dim):
    m = O.conformally_flat_metric(dim, dim)
    for p in sample(m, 2, dim):
        b = curvature_bundle(m, p)
        assert np.abs(b.ricci).max() > 1e-2
        assert np.abs(b.weyl).max() <= 1e-10
        assert np.abs(b.cotton).max() <= 1e-9


def test_convention_coherence():
    m = O.polynomial_metric(4, 7)
    p = sample(m, 1, 7)[0]
    a, b = curvature_bundle(m, p, PAPER), curvature_bundle(m, p, STANDARD)
    assert np.array_equal(a.riemann_lowered, b.riemann_lowered)
    assert np.array_equal(a.weyl, b.weyl)
    for x, y in ((a.ricci, b.ricci), (a.schouten, b.schouten), (a.cotton, b.cotton)):
        assert np.array_equal(x, -y)
    assert a.scalar == -b.scalar
    with pytest.raises(GeometryError):
        curvature_bundle(m, p, "mostly-plus")


def test_riemann_symmetries_and_first_bianchi():
    m = O.polynomial_metric(5, 3)
    r = curvature_bundle(m, sample(m, 1, 3)[0]).riemann_lowered
    assert np.abs(r + r.transpose(1, 0, 2, 3)).max() <= 1e-13
    assert np.abs(r + r.transpose(0, 1, 3, 2)).max() <= 1e-13
    assert np.abs(r - r.transpose(2, 3, 0, 1)).max() <= 1e-12
    cyc = r + r.transpose(1, 2, 0, 3) + r.transpose(2, 0, 1, 3)
    assert np.abs(cyc).max() <= 1e-12


def test_cotton_symmetries():
    m = O.polynomial_metric(4, 9)
    p = sample(m, 1, 9)[0]
    geo = Geometry(m.jet(p))
    c = geo.cotton_paper.value
    assert np.abs(c + c.transpose(0, 2, 1)).max() <= 1e-12
    assert np.abs(np.einsum("iik->k", np.einsum("ijk,jl->ilk", c, geo.ginv.value))).max() <= 1e-12
    w = geo.weyl.value
    assert np.abs(np.einsum("ijkl,ik->jl", w, geo.ginv.value)).max() <= 1e-12


def test_metricity_and_constant_scalar():
    m = O.polynomial_metric(4, 2)
    p = sample(m, 1, 2)[0]
    ng = cov_deriv(lambda c: m.evaluate(c), ("down", "down"), m, p)
    assert np.abs(ng).max() <= 1e-11
    const = cov_deriv(lambda c: Jet3.constant(3.0, c[0].dim), (), m, p)
    assert not np.abs(const).any()


def test_low_dimension_guards():
    m = M.constant_curvature_space(2, 2.0, M.SPHERE)
    b = curvature_bundle(m, [0.1, 0.2])
    assert b.cotton is None and b.weyl is None
    with pytest.raises(GeometryError):
        _ = Geometry(m.jet([0.1, 0.2])).weyl
    with pytest.raises(GeometryError):
        m.jet([5.0, 0.0])
    with pytest.raises(GeometryError):
        Geometry(Jet3.constant(np.zeros((2, 3)), 2))


def test_evaluation_is_bit_deterministic():
    m = O.polynomial_metric(5, 4)
    p = sample(m, 1, 4)[0]
    a, b = curvature_bundle(m, p), curvature_bundle(m, p)
    assert a.cotton.tobytes() == b.cotton.tobytes()
