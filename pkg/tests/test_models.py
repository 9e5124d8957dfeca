import math

import numpy as np
import pytest

from kkconformal import jet as J
from kkconformal import models as M
from kkconformal.geom import STANDARD, Geometry, curvature_bundle
from kkconformal.kk import KKFields, commutator_residual, killing_residual
from kkconformal.verify import sample_box, sample_kk_points

import oracles as O


def frame_at(frame, y):
    return J.array(frame.evaluate(J.seed_point(y)), len(y))


@pytest.mark.parametrize("radius", [1.0, 0.7, 1.8])
def test_s3_frame_killing_orthonormal_and_closed(radius):
    m, frame = M.s3_metric(radius), M.s3_killing_frame(radius)
    sc = M.s3_structure_constants(radius)
    assert np.abs(sc - (2.0 / radius) * M.levi_civita3()).max() == 0.0
    for y in sample_box(m.domain, 30, 1):
        K, kappa = frame_at(frame, y), m.jet(y)
        assert np.abs(killing_residual(kappa, K)).max() <= 1e-10
        assert np.abs(commutator_residual(K, sc)).max() <= 1e-10
        gbar = K.value @ kappa.value @ K.value.T
        assert np.abs(gbar - np.eye(3)).max() <= 1e-10


def test_unit_s3_bracket_by_finite_differences():
    # [K1, K2] = 2 K3 from the plain vector-field bracket, differentiated numerically
    frame = M.s3_killing_frame(1.0)
    y = np.array([0.2, -0.3, 0.1])
    h = 1e-6

    def K(p):
        return frame_at(frame, p).value

    dK = np.stack([(K(y + h * e) - K(y - h * e)) / (2 * h) for e in np.eye(3)])  # [j, a, i]
    k0 = K(y)
    br = np.einsum("j,ji->i", k0[0], dK[:, 1]) - np.einsum("j,ji->i", k0[1], dK[:, 0])
    assert np.abs(br - 2 * k0[2]).max() <= 1e-8


def test_right_frame_closes_with_opposite_sign():
    m, frame = M.s3_metric(1.0), M.s3_killing_frame(1.0, "right")
    y = np.array([0.1, 0.4, -0.2])
    K = frame_at(frame, y)
    assert np.abs(commutator_residual(K, -2 * M.levi_civita3())).max() <= 1e-10
    assert np.abs(killing_residual(m.jet(y), K)).max() <= 1e-10


def test_berger_metric_right_frame_is_killing_not_orthonormal():
    m = M.berger_s3_metric((0.7, 1.0, 1.3))
    frame = M.s3_killing_frame(1.0, "right")
    for y in sample_box(m.domain, 10, 2):
        K = frame_at(frame, y)
        assert np.abs(killing_residual(m.jet(y), K)).max() <= 1e-10
    b = curvature_bundle(m, np.array([0.1, 0.2, 0.3]))
    assert np.abs(b.cotton).max() > 1e-2  # squashed: not conformally flat


def test_s2_rotation_frame():
    m = M.constant_curvature_space(2, 2.0, M.SPHERE)
    frame = M.s2_rotation_frame()
    for y in sample_box(m.domain, 10, 3):
        K = frame_at(frame, y)
        assert np.abs(killing_residual(m.jet(y), K)).max() <= 1e-10
        assert np.abs(commutator_residual(K, -M.levi_civita3())).max() <= 1e-10


def test_space_form_examples():
    assert M.constant_curvature_space(3, 6.0, M.SPHERE).name.startswith("sphere3(r=1)")
    assert M.constant_curvature_space(4, 12.0, M.HYPERBOLIC).name.startswith("hyperbolic4(r=1)")
    for bad in [(3, -1.0, M.SPHERE), (3, 0.0, M.SPHERE), (3, 1.0, M.FLAT), (3, 1.0, "torus")]:
        with pytest.raises(M.ModelError):
            M.constant_curvature_space(*bad)


def test_thooft_symbols_algebra():
    eta = M.thooft_symbols(True)
    prod = np.einsum("amk,bkn->abmn", eta, eta)
    cliff = prod + prod.transpose(1, 0, 2, 3) + 2 * np.einsum("ab,mn->abmn", np.eye(3), np.eye(4))
    assert np.abs(cliff).max() == 0.0
    for a in range(3):
        assert np.abs(eta[a] + eta[a].T).max() == 0.0


@pytest.mark.parametrize("k", [4.0, 2.5])
def test_quaternionic_space_form_curvature(k):
    qk = M.quaternionic_space_form(k)
    origin = np.zeros(4)
    assert np.allclose(qk.g.values(origin), (4.0 / k) * np.eye(4), atol=0)
    for p in sample_box(qk.g.domain, 5, 0):
        b = curvature_bundle(qk.g, p, STANDARD)
        ric = b.ricci @ np.linalg.inv(qk.g.values(p))
        assert np.abs(ric - 3 * k * np.eye(4)).max() <= 1e-10 * k  # (d+8)k/4 with d = 4
        assert b.scalar == pytest.approx(12 * k, rel=1e-12)


def test_quaternionic_space_form_guards_and_calibration():
    with pytest.raises(M.ModelError):
        M.quaternionic_space_form(0.0)
    with pytest.raises(M.ModelError):
        M.quaternionic_space_form(4.0, d=8)
    cal = M.quaternionic_space_form(4.0).calibration
    assert cal["clifford"] <= 1e-12 and cal["parallel"] <= 1e-12 and cal["reconstruction"] <= 1e-12
    alt = M.quaternionic_space_form(4.0, triple="algebra").calibration
    assert alt["commutator"] <= 1e-12


def test_theta_radical_selects_two_thirds():
    out = M.calibrate_theta_radical(4.0, 6.0)
    assert out["selected"] == "sqrt(2|R_in|/3)"
    assert out["sqrt(2|R_in|/3)"] <= 1e-12 < 1e-3 <= out["sqrt(2|R_in|/2)"]
    with pytest.raises(M.ModelError):
        M.instanton_gauge_field(4.0, 5.0)


def test_instanton_scalar_chain():
    spec = M.hopf_instanton_spec()
    f = KKFields(spec, sample_kk_points(spec, 1, 0)[0])
    # oracles: F2 = 4d/(c-1) |R_in| = 48, then the scalar relation of the system fixes R_ex
    c, d, r_in = 3, 4, -6.0  # unit sphere, negative with this curvature sign
    f2 = 4 * d / (c - 1) * abs(r_in)
    r_ex = -(d * (d - 1) * r_in + (c - 1) * (2 * d + 3 * c - 2) / 4 * f2) / (c * (c - 1))
    assert (f2, r_ex) == (48.0, -48.0)
    assert float(f.F2.value) == pytest.approx(f2, rel=1e-12)
    assert float(f.ext.scalar.value) == pytest.approx(r_ex, rel=1e-12)
    assert float(f.int.scalar.value) == pytest.approx(r_in, rel=1e-12)
    eig = np.linalg.eigvals(f.ext.ricci.value @ f.gi.value).real
    assert np.abs(eig + (d + 3 * c - 1) / (4 * c * d) * f2).max() <= 1e-10
    assert math.sqrt(c * d / f2) * 2 == 1.0


@pytest.mark.parametrize("d,expected", [(4, 12.0), (2, 2.0), (3, 6.0)])
def test_trivial_solution_external_magnitude(d, expected):
    spec = M.trivial_solution_spec(d, 3, -6.0)
    p = sample_kk_points(spec, 1, 0)[0]
    f = KKFields(spec, p)
    assert float(f.ext.scalar.value) == pytest.approx(expected, rel=1e-12)  # hyperbolic: positive here
    if spec.D >= 4:
        assert np.abs(f.full.weyl.value).max() <= 1e-8


def test_trivial_solution_guards():
    with pytest.raises(M.ModelError):
        M.trivial_solution_spec(4, 2, -6.0)
    with pytest.raises(M.ModelError):
        M.trivial_solution_spec(4, 3, 6.0)
    assert M.trivial_solution_spec(4, 3, 6.0, STANDARD).branch == "trivial"
    assert M.trivial_solution_spec(4, 1, 0.0).c == 1


@pytest.mark.parametrize("internal", M.RANDOM_INTERNALS)
def test_random_spec_is_generic_and_reproducible(internal):
    a, b = M.random_spec(3, 4, internal), M.random_spec(3, 4, internal)
    p = sample_kk_points(a, 1, 0)[0]
    fa, fb = KKFields(a, p), KKFields(b, p)
    assert fa.full_metric.value.tobytes() == fb.full_metric.value.tobytes()
    assert np.abs(fa.full.weyl.value).max() > 1e-3
    with pytest.raises(M.ModelError):
        M.random_spec(0, 4, "torus")


def test_random_spec_metric_is_curved():
    spec = M.random_spec(1)
    g = Geometry(spec.external.jet(np.full(4, 0.2)))
    assert np.abs(g.riemann.value).max() > 1e-3
    assert O.rel_err(g.g.value, g.g.value.T) == 0.0
