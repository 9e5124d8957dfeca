import numpy as np
import pytest

from kkconformal import models as M
from kkconformal import reduce as R
from kkconformal.kk import KKFields
from kkconformal.specfile import spec_from_dict
from kkconformal.verify import sample_kk_points

PRINTED_DEFECTS = {"A.Cmunukappa", "A.Cmunuk", "A.Cinukappa", "B.Ricci", "B.6th"}


def first_point(spec, seed=0):
    return sample_kk_points(spec, 1, seed)[0]


def product_spec(internal):
    return spec_from_dict({"external": {"kind": "flat", "dim": 4}, "internal": internal})


def test_weyl_trace_of_flat_times_sphere_by_hand():
    # A = 0, R_ex = 0, R_in = -6: C = d(d-1) R_in / ((D-1)(D-2)) = -72/30
    spec = product_spec({"kind": "s3"})
    out = R.weyl_traces(spec, first_point(spec))
    assert out["C"] == pytest.approx(-2.4, rel=1e-12)
    f = KKFields(spec, first_point(spec))
    assert R.Direct(f).value("B.C") == pytest.approx(-2.4, rel=1e-12)
    assert np.abs(out["C^mu_j"]).max() == 0.0


def test_cotton_traces_vanish_for_constant_curvature_product():
    spec = product_spec({"kind": "s3"})
    out = R.cotton_traces(spec, first_point(spec), direct=True)
    for v in (out["C^mu"], out["C_i"], out["direct"]["C^mu"], out["direct"]["C_i"]):
        assert np.abs(v).max() <= 1e-12


def test_trivial_solution_all_components_vanish():
    spec = M.trivial_solution_spec(4, 3, -6.0)
    p = first_point(spec, 3)
    for group in (R.cotton_components(spec, p), R.weyl_components(spec, p)):
        for name, v in group.items():
            if isinstance(v, str):
                assert "not applicable" in v
                continue
            assert np.abs(v).max() <= 1e-8, name
    tr = R.weyl_traces(spec, p)
    assert abs(tr["C"]) <= 1e-12


def test_instanton_corrected_components_vanish():
    spec = M.hopf_instanton_spec()
    f = KKFields(spec, first_point(spec, 2))
    a = R.Assembled(f)
    for name in R.ALL_FORMULAS + R.CORRECTED_FORMULAS:
        if name in PRINTED_DEFECTS:
            continue
        try:
            val = R._assembled_value(a, name)
        except R.NotApplicable:
            continue
        assert np.abs(val).max() <= 1e-7, name


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("internal", M.RANDOM_INTERNALS)
def test_two_path_agreement(d, internal):
    spec = M.random_spec(10 * d + len(internal), d, internal)
    rep = R.compare(spec, n_points=2, seed=d)
    for t in rep.tags:
        if not t.applicable:
            assert t.note.startswith("not applicable")
            continue
        if t.tag in PRINTED_DEFECTS:
            continue
        assert t.passed, (t.tag, t.max_rel)
    for name in R.CORRECTED_FORMULAS:
        assert not rep.tag(name).in_verdict
    assert rep.scalars["trace_coherence_max_abs"] <= 1e-9


def test_printed_defects_disagree_and_corrections_agree():
    rep = R.compare(M.random_spec(3), n_points=3, seed=3)
    for name in PRINTED_DEFECTS:
        assert rep.tag(name).max_rel >= 0.1, name
        assert rep.tag(name + "'").max_rel <= 1e-10, name
    assert not rep.passed


def test_dimension_replacements_selected():
    rep2 = R.compare(M.random_spec(1, 2, "s2"), n_points=1, seed=0,
                     formulas=("B.GaussExt", "B.GaussExt-d2", "B.GaussInt", "B.GaussInt-c2"))
    assert not rep2.tag("B.GaussExt").applicable and rep2.tag("B.GaussExt-d2").passed
    assert not rep2.tag("B.GaussInt").applicable and rep2.tag("B.GaussInt-c2").passed


def test_cotton_weyl_consistency_under_reduction():
    for seed, internal in ((0, "s3"), (1, "berger"), (2, "s2")):
        spec = M.random_spec(seed, 4, internal)
        f = KKFields(spec, first_point(spec, seed))
        out = R.cotton_weyl_blocks(f)
        assert set(out) == {"A.Cmunukappa'", "A.Cijk", "A.Cmunuk'", "A.Cijkappa"}
        for name, c in out.items():
            assert c.scale > 1e-3 and c.rel <= 1e-6, name


def test_trace_coherence():
    spec = M.random_spec(8, 4, "berger")
    for p in sample_kk_points(spec, 3, 1):
        c = R.trace_coherence(KKFields(spec, p))
        assert c.scale > 1e-2 and c.max_abs <= 1e-9


def test_low_dimension_guards():
    spec = spec_from_dict({"external": {"kind": "flat", "dim": 1}, "internal": {"kind": "s2"}})
    p = first_point(spec)
    with pytest.raises(R.ReductionError):
        R.weyl_traces(spec, p)
    with pytest.raises(R.ReductionError):
        R.weyl_components(spec, p)
    out = R.compare_at(KKFields(spec, p), ("B.C", "A.Cmu"))
    assert isinstance(out["B.C"], str) and isinstance(out["A.Cmu"], R.Comparison)


def test_near_singular_chart_refused():
    spec = spec_from_dict({"external": {"kind": "flat", "dim": 4}, "internal": {"kind": "flat", "dim": 1},
                           "gauge": {"constant": [[1e4, 0.0, 0.0, 0.0]]}})
    with pytest.raises(R.ReductionError):
        R.compare_at(KKFields(spec, first_point(spec)))


def test_comparison_rel_uses_floor():
    assert R.Comparison(0.0, 0.0).rel == 0.0
    assert R.Comparison(1e-3, 2.0).rel == pytest.approx(5e-4)
