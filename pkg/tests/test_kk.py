import numpy as np
import pytest

from kkconformal import jet as J
from kkconformal import models as M
from kkconformal.jet import Jet3
from kkconformal.kk import (KKError, KKFields, KKSpec, assemble_jets, assemble_metric, gauge_curvature,
                            gauge_curvature_at, project_components, validate)
from kkconformal.specfile import spec_from_dict
from kkconformal.verify import sample_kk_points

import oracles as O


def eps3():
    return M.levi_civita3()


def test_zero_gauge_gives_product_metric():
    spec = M.trivial_solution_spec(4, 3, -6.0)
    p = sample_kk_points(spec, 1, 0)[0]
    G = assemble_metric(spec).values(p.coords)
    assert np.array_equal(G[:4, 4:], np.zeros((4, 3)))
    assert np.allclose(G[:4, :4], spec.external.values(p.x), atol=0)
    assert np.allclose(G[4:, 4:], spec.internal.values(p.y), atol=0)


@pytest.mark.parametrize("a", [0.0, 0.7, -2.5])
def test_one_plus_one_ansatz_by_hand(a):
    one = Jet3.constant(np.ones((1, 1)), 2)
    A = Jet3.constant(np.array([[a]]), 2)
    G = assemble_jets(one, one, one, A).value
    assert G == pytest.approx(np.array([[1 + a * a, a], [a, 1.0]]))


def test_su2_curvature_by_hand():
    A = Jet3.constant(np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0] * 4]), 4)
    F = gauge_curvature(A, 2.0 * eps3(), range(4)).value
    assert F[2, 0, 1] == pytest.approx(-2.0)
    assert F[2, 1, 0] == pytest.approx(2.0)
    assert np.count_nonzero(F) == 2


def test_constant_abelian_potential_has_no_curvature():
    A = Jet3.constant(np.arange(8.0).reshape(2, 4), 4)
    assert not gauge_curvature(A, np.zeros((2, 2, 2)), range(4)).value.any()


def abelian_spec(linear, internal=None):
    return spec_from_dict({
        "external": {"kind": "flat", "dim": 4},
        "internal": internal or {"kind": "flat", "dim": 1},
        "gauge": {"linear": linear},
    })


def test_constant_field_strength_is_hat_parallel():
    rng = np.random.default_rng(0)
    spec = abelian_spec(rng.normal(size=(1, 4, 4)).tolist())
    f = KKFields(spec, sample_kk_points(spec, 1, 0)[0])
    assert np.abs(f.F_low.value).max() > 0.1
    assert np.abs(f.hat_nabla(f.F_low, ("int_down", "ext_down", "ext_down")).value).max() <= 1e-14


def test_pure_gauge_has_no_curvature():
    rng = np.random.default_rng(1)
    s = rng.normal(size=(4, 4))
    lin = np.zeros((3, 4, 4))
    lin[0] = s + s.T  # A^1 = grad(x.S.x / 2): one generator, exact
    spec = abelian_spec(lin.tolist(), {"kind": "s3", "radius": 1.0})
    f = KKFields(spec, sample_kk_points(spec, 1, 2)[0])
    assert np.abs(f.F_alg.value).max() <= 1e-14
    assert np.abs(f.hat_nabla(f.F_low, ("int_down", "ext_down", "ext_down")).value).max() <= 1e-13


@pytest.mark.parametrize("internal", M.RANDOM_INTERNALS)
def test_inverse_identity_and_block_inverse(internal):
    spec = M.random_spec(4, 4, internal)
    for p in sample_kk_points(spec, 5, 1):
        f = KKFields(spec, p)
        G, Gi = f.full_metric.value, f.full.ginv.value
        assert np.abs(G @ Gi - np.eye(spec.D)).max() <= 1e-11
        # closed-form block inverse
        gi, ki, a = f.gi.value, f.ki.value, f.A_int.value  # a[mu, i] = A^i_mu
        ref = np.block([[gi, -gi @ a], [-a.T @ gi, ki + a.T @ gi @ a]])
        assert np.abs(Gi - ref).max() <= 1e-11


def test_gauge_rotation_leaves_metric_unchanged():
    spec = M.random_spec(2, 4, "s3")
    p = sample_kk_points(spec, 1, 3)[0]
    f = KKFields(spec, p)
    th = 0.83
    axis = np.array([1.0, -2.0, 0.5]) / np.linalg.norm([1.0, -2.0, 0.5])
    kx = np.einsum("abc,c->ab", -eps3(), axis)
    rot = np.eye(3) + np.sin(th) * kx + (1 - np.cos(th)) * kx @ kx
    K2 = J.einsum("ab,bi->ai", rot, f.K)
    A2 = J.einsum("ab,bm->am", rot, f.A)
    sc = np.asarray(spec.structure_constants)
    sc2 = np.einsum("ax,by,zc,xyz->abc", rot, rot, rot.T, sc)
    assert np.abs(sc2 - sc).max() <= 1e-14  # eps is rotation invariant
    G2 = assemble_jets(f.g, f.kappa, K2, A2).value
    assert np.abs(G2 - f.full_metric.value).max() <= 1e-12
    F2 = np.einsum("ab,bmn->amn", rot, f.F_alg.value)
    assert np.abs(gauge_curvature(A2, sc2, range(4)).value - F2).max() <= 1e-12


def test_validation_passes_and_catches_bad_constants():
    spec = M.random_spec(0)
    ys = [p.y for p in sample_kk_points(spec, 10, 0)]
    assert validate(spec, ys).ok()
    bad = KKSpec(spec.external, spec.internal, spec.killing, spec.gauge, 2.2 * eps3(), name="bad")
    with pytest.raises(KKError):
        validate(bad, ys)
    rep = validate(bad, ys, raise_on_fail=False)
    assert rep.commutator > 0.1 and rep.jacobi == 0.0
    skew = spec.structure_constants.copy()
    skew[0, 1, 2] += 0.5
    assert validate(KKSpec(spec.external, spec.internal, spec.killing, spec.gauge, skew), ys,
                    raise_on_fail=False).antisymmetry == pytest.approx(0.5)


def test_detuned_frame_is_not_killing_for_wrong_radius():
    frame = M.s3_killing_frame(1.0)
    spec = KKSpec(M.constant_curvature_space(4, 0.0, M.FLAT), M.s3_metric(1.0), frame,
                  M._zero_gauge(3, 4), M.s3_structure_constants(1.0))
    ys = [p.y for p in sample_kk_points(spec, 5, 0)]
    assert validate(spec, ys).ok()
    with pytest.raises(KKError):
        validate(KKSpec(spec.external, spec.internal, spec.killing, spec.gauge, -spec.structure_constants), ys)


def test_shape_checks():
    spec = M.random_spec(0)
    with pytest.raises(KKError):
        KKSpec(spec.external, spec.internal, spec.killing, spec.gauge, np.zeros((2, 2, 2))).check_shapes()
    with pytest.raises(KKError):
        KKSpec(spec.external, M.constant_curvature_space(2, 2.0, M.SPHERE), spec.killing, spec.gauge,
               spec.structure_constants).check_shapes()


def test_projection_of_product_metric():
    spec = M.trivial_solution_spec(4, 3, -6.0)
    p = sample_kk_points(spec, 1, 5)[0]
    f = KKFields(spec, p)
    Gi = f.full.ginv.value
    assert np.allclose(project_components(Gi, Gi, 4, ["external_down", "external_down"]), f.gi.value, atol=1e-14)
    G = f.full_metric.value
    assert np.allclose(project_components(G, Gi, 4, ["external_up", "external_up"]), f.gi.value, atol=1e-14)
    riem = f.full.riemann_lowered.value
    ext = project_components(riem, Gi, 4, ["external_down"] * 4)
    intr = project_components(riem, Gi, 4, ["internal_down"] * 4)
    assert O.rel_err(ext, f.ext.riemann_lowered.value) <= 1e-12
    assert O.rel_err(intr, f.int.riemann_lowered.value) <= 1e-12
    assert np.abs(project_components(riem, Gi, 4, ["external_down", "internal_down"] * 2)).max() <= 1e-12
    cot = f.full.cotton.value
    for pat in (["external_up"] * 3, ["internal_down"] * 3, ["external_up", "internal_down", "internal_down"]):
        assert np.abs(project_components(cot, Gi, 4, pat)).max() <= 1e-9
    with pytest.raises(KKError):
        project_components(G, Gi, 4, ["external_up"])
    with pytest.raises(KKError):
        project_components(G, Gi, 4, ["sideways_up", "external_up"])


def test_gauge_curvature_at_internal_components():
    spec = M.hopf_instanton_spec()
    p = sample_kk_points(spec, 1, 0)[0]
    F, Fi = gauge_curvature_at(spec, p.x, p.y)
    f = KKFields(spec, p)
    assert np.allclose(F, f.F_alg.value, atol=1e-14)
    assert np.allclose(Fi, f.F_up.value, atol=1e-14)
    assert gauge_curvature_at(spec, p.x)[1] is None


def test_gbar_of_instanton_is_identity():
    spec = M.hopf_instanton_spec()
    for p in sample_kk_points(spec, 30, 4):
        assert np.abs(KKFields(spec, p).gbar.value - np.eye(3)).max() <= 1e-10
