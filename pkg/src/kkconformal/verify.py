"""Pointwise residuals of the flatness system, its integrability conditions, the
curvature relations of the solution branch and the quaternionic Kähler structure.

Every equation is evaluated as a list of *terms* whose sum is the residual.
Per point the residual scale is the largest term magnitude (floor 1e-30), so
``max_rel = max|sum| / max(max_t |t|, 1e-30)``.  A tag passes when
``max_rel <= rtol`` or ``max_abs <= atol`` at every sampled point.

Sign handling.  Equations containing Ricci-type quantities (Ricci, scalar,
Schouten, Cotton) are evaluated twice:

* *adapted*: the quantities are converted to the literal Riemann-contraction
  convention before substitution; this value drives the verdict, so the
  verdict does not depend on the convention flag;
* *literal*: the flag's own signed quantities are substituted as printed;
  the report records whether the printed signs hold under that flag.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from . import jet as J
from .geom import PAPER, STANDARD, Geometry, convention_sign, covariant_derivative
from .kk import KKFields, KKPoint, KKSpec, gauge_curvature
from .models import QKStructure, levi_civita3
from .rng import Xorshift64Star

SCHEMA_VERSION = "kkconformal.report/1"
DEFAULT_RTOL = 1e-7
DEFAULT_ATOL = 1e-9
SCALE_FLOOR = 1e-30
THREADS_ENV = "KKCONFORMAL_THREADS"


class VerifyError(ValueError):
    pass


# ------------------------------------------------------------------------------------
# sampling


def unit_rows(seed: int, n: int, dim: int) -> np.ndarray:
    """``n`` rows of ``dim`` uniforms in [0, 1) from xorshift64* seeded with ``seed``."""
    rng = Xorshift64Star(seed)
    return np.array([[rng.random() for _ in range(dim)] for _ in range(n)]).reshape(n, dim)


def sample_kk_points(spec: KKSpec, n: int, seed: int) -> list[KKPoint]:
    if n < 1:
        raise VerifyError("at least one sample point is required")
    return spec.sample_points(unit_rows(seed, n, spec.D))


def sample_box(box, n: int, seed: int) -> list[np.ndarray]:
    if n < 1:
        raise VerifyError("at least one sample point is required")
    return [box.sample(u) for u in unit_rows(seed, n, box.dim)]


def _pmap(fn, items: Sequence) -> list:
    """Order-preserving map; threads only when the environment asks for them."""
    threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ------------------------------------------------------------------------------------
# equation registry


@dataclass(frozen=True)
class EquationId:
    tag: str
    family: str  # system, integrability, branch, gbar, qk, cross-check, diagnostic
    signed: bool
    branches: frozenset = frozenset()  # branches whose verdict includes a branch/gbar tag
    description: str = ""


_BOTH = frozenset({"trivial", "instanton"})
_INST = frozenset({"instanton"})
_TRIV = frozenset({"trivial"})

EQUATIONS: dict[str, EquationId] = {e.tag: e for e in [
    EquationId("W-8a", "system", False, description="external Weyl vs gauge-field terms"),
    EquationId("W-8b", "system", True, description="traceless external Ricci vs traceless F2_{mu nu}"),
    EquationId("W-8c", "system", False, description="hat-nabla_kappa F_{i mu nu} = 0"),
    EquationId("W-8d", "system", False, description="internal Weyl = 0"),
    EquationId("W-8e", "system", True, description="traceless internal Ricci vs traceless F2_ij"),
    EquationId("W-8f", "system", False, description="symmetric FF contraction"),
    EquationId("W-8g", "system", False, description="antisymmetric FF contraction = 2 nabla_i F_{j mu nu}"),
    EquationId("W-8h", "system", True, description="scalar relation among R_ex, R_in, F2"),
    EquationId("C-9a", "integrability", True, description="Cotton integrability, tensor part (as printed)"),
    EquationId("C-9b", "integrability", True, description="d_i (R_in - (3d+4c-4)/(4d) F2) = 0"),
    EquationId("REL-10", "branch", True, _TRIV, "c(c-1) R_ex + d(d-1) R_in = 0"),
    EquationId("REX-12", "branch", True, _BOTH, "value of R_ex"),
    EquationId("IN-13a", "branch", True, _BOTH, "maximally symmetric internal Riemann"),
    EquationId("IN-13b", "branch", True, _BOTH, "internal Einstein condition"),
    EquationId("EX-16a", "branch", True, _BOTH, "external Riemann reconstruction"),
    EquationId("EX-16b", "branch", True, _BOTH, "external Ricci reconstruction"),
    EquationId("EX-16a'", "branch", False, _INST, "external Riemann after F2_{mu nu} ~ g"),
    EquationId("EX-16b'", "branch", True, _INST, "external Ricci after F2_{mu nu} ~ g"),
    EquationId("FF-17", "branch", True, _BOTH, "F2 F2 = -4/(c-1) R_in F2 (mixed)"),
    EquationId("FF-18", "branch", True, _INST, "F2_{mu nu} = -4/(c-1) R_in g"),
    EquationId("F2-21", "branch", True, _INST, "F2 = -4d/(c-1) R_in"),
    EquationId("GBAR-22a", "gbar", False, _BOTH, "symmetric g-contracted FF relation"),
    EquationId("GBAR-22b", "gbar", False, _BOTH, "antisymmetric g-contracted FF relation"),
    EquationId("GBAR-k", "gbar", False, _INST, "sqrt(cd/F2) c^{ab}_c = eps^{ab}_c"),
    EquationId("QK-1a", "qk", False, description="Clifford relation of the triple"),
    EquationId("QK-1b", "qk", False, description="[J^a, J^b] = 2 eps_abc J^c (as printed)"),
    EquationId("QK-2a", "qk", False, description="J^a are isometries"),
    EquationId("QK-2b", "qk", False, description="nabla J^a = eps_bca theta^b J^c"),
    EquationId("QK-3a", "qk", False, description="space-form Riemann tensor"),
    EquationId("QK-3b", "qk", False, description="J_{mu nu} = (d theta - eps theta theta) / k"),
    EquationId("WEYL-D", "cross-check", False, description="Weyl tensor of the assembled metric"),
    EquationId("W-8g'", "diagnostic", False,
               description="antisymmetric FF contraction = -2 nabla_i F_{j mu nu} (sign matching B.Ricci')"),
    EquationId("C-9a'", "diagnostic", True,
               description="C-9a with the F^l_{mu nu} terms reversed (consistent with FF-17)"),
    EquationId("QK-1b'", "diagnostic", False,
               description="[J^a, J^b] = -2 eps_abc J^c (orientation produced by the reduction)"),
]}

SYSTEM8_TAGS = tuple(t for t, e in EQUATIONS.items() if e.family == "system")
INTEGRABILITY_TAGS = ("C-9a", "C-9b")
CURVATURE_TAGS = tuple(t for t, e in EQUATIONS.items() if e.family == "branch")
GBAR_TAGS = ("GBAR-22a", "GBAR-22b", "GBAR-k")
QK_TAGS = tuple(t for t, e in EQUATIONS.items() if e.family == "qk")


class NotApplicable(Exception):
    pass


# ------------------------------------------------------------------------------------
# lower-dimensional values at a point


class _Lower:
    """Numeric lower-dimensional data; Ricci-type values carry ``sign`` (1 = adapted)."""

    def __init__(self, f: KKFields, literal: bool):
        self.f = f
        self.s = f.ext.sign if literal else 1.0
        self.d, self.c = f.d, f.c

    @cached_property
    def g(self):
        return self.f.g.value

    @cached_property
    def gi(self):
        return self.f.gi.value

    @cached_property
    def kappa(self):
        return self.f.kappa.value

    @cached_property
    def ki(self):
        return self.f.ki.value

    @cached_property
    def Fu(self):  # F^i_{mu nu}
        return self.f.F_up.value

    @cached_property
    def Fl(self):  # F_{i mu nu}
        return self.f.F_low.value

    @cached_property
    def Fl_mixed(self):  # F_{i mu}^kappa
        return np.einsum("iml,lk->imk", self.Fl, self.gi)

    @cached_property
    def F2_ext(self):
        return self.f.F2_ext.value

    @cached_property
    def F2_int(self):
        return self.f.F2_int.value

    @cached_property
    def F2(self):
        return float(self.f.F2.value)

    @cached_property
    def T(self):
        return self.f.T_ext.value

    @cached_property
    def ric_ex(self):
        return self.f.ext.ricci_paper.value * self.s

    @cached_property
    def R_ex(self):
        return float(self.f.ext.scalar_paper.value) * self.s

    @cached_property
    def ric_in(self):
        return self.f.int.ricci_paper.value * self.s

    @cached_property
    def R_in(self):
        return float(self.f.int.scalar_paper.value) * self.s

    @cached_property
    def riem_ex(self):
        return self.f.ext.riemann_lowered.value

    @cached_property
    def riem_in(self):
        return self.f.int.riemann_lowered.value


def _gbracket(a: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``a_{mu[kappa} t_{lambda]nu}`` with axes (mu, nu, kappa, lambda)."""
    x = np.einsum("ma,bn->mnab", a, t)
    return 0.5 * (x - x.transpose(0, 1, 3, 2))


def _ff_terms(q: _Lower) -> tuple[np.ndarray, np.ndarray]:
    """``F_{k mu nu} F^k_{kappa lambda}`` and ``F_{k mu[kappa} F^k_{lambda]nu}``."""
    ff = np.einsum("kmn,kab->mnab", q.Fl, q.Fu)
    p = np.einsum("kma,kbn->mnab", q.Fl, q.Fu)
    return ff, 0.5 * (p - p.transpose(0, 1, 3, 2))


def _qmat(q: _Lower) -> np.ndarray:
    """``Q[i, j, mu, nu] = F_{i mu kappa} F_{j nu}^kappa``."""
    return np.einsum("ima,jna->ijmn", q.Fl, q.Fl_mixed)


# system (8) -------------------------------------------------------------------------


def _w8a(q: _Lower):
    d = q.d
    if d < 3:
        raise NotApplicable("needs d >= 3")
    ff, br = _ff_terms(q)
    gt = _gbracket(q.g, q.T)
    k = 3.0 / (2 * (d - 2))
    return [q.f.ext.weyl.value, 0.5 * ff, -0.5 * br, -k * gt, k * gt.transpose(1, 0, 2, 3)]


def _w8b(q: _Lower):
    d, c = q.d, q.c
    k = (d + 3 * c - 2) / (4 * c)
    return [q.ric_ex, -q.R_ex / d * q.g, k * q.F2_ext, -k * q.F2 / d * q.g]


def _w8c(q: _Lower):
    cov, lie = q.f.hat_nabla_parts(q.f.F_low, ("int_down", "ext_down", "ext_down"))
    return [cov.value, -lie.value]


def _w8d(q: _Lower):
    if q.c < 3:
        raise NotApplicable("needs c >= 3")
    w = q.f.int.weyl.value
    return [q.riem_in, w - q.riem_in]


def _w8e(q: _Lower):
    d, c = q.d, q.c
    k = (c - 2) / (4 * d)
    return [q.ric_in, -q.R_in / c * q.kappa, k * q.F2_int, -k * q.F2 / c * q.kappa]


def _w8f(q: _Lower):
    d, c = q.d, q.c
    Q = _qmat(q)
    sym = 0.5 * (Q + Q.transpose(1, 0, 2, 3))
    return [sym,
            -np.einsum("mn,ij->ijmn", q.F2_ext, q.kappa) / c,
            -np.einsum("mn,ij->ijmn", q.g, q.F2_int) / d,
            q.F2 / (c * d) * np.einsum("mn,ij->ijmn", q.g, q.kappa)]


def _w8g_terms(q: _Lower, sign: float):
    Q = _qmat(q)
    anti = 0.5 * (Q - Q.transpose(1, 0, 2, 3))
    nab = q.f.int_nabla(q.f.F_low, ("int_down", "ext_down", "ext_down")).value  # [i, j, mu, nu]
    return [anti, -2.0 * sign * nab]


def _w8g(q: _Lower):
    return _w8g_terms(q, 1.0)


def _w8g_rev(q: _Lower):
    return _w8g_terms(q, -1.0)


def _w8h(q: _Lower):
    d, c = q.d, q.c
    return [c * (c - 1) * q.R_ex, d * (d - 1) * q.R_in, (c - 1) * (2 * d + 3 * c - 2) / 4 * q.F2]


# integrability (9) --------------------------------------------------------------------


def _c9a_terms(q: _Lower, reversed_fl: bool):
    s = -1.0 if reversed_fl else 1.0
    Fm = q.Fl_mixed
    return [np.einsum("kma,an->kmn", Fm, q.ric_ex),
            s * np.einsum("lmn,lk->kmn", q.Fu, q.ric_in),
            0.5 * np.einsum("kma,an->kmn", Fm, q.F2_ext),
            -0.25 * s * np.einsum("lmn,lk->kmn", q.Fu, q.F2_int)]


def _c9a(q: _Lower):
    return _c9a_terms(q, False)


def _c9a_rev(q: _Lower):
    return _c9a_terms(q, True)


def _c9b(q: _Lower):
    f = q.f
    d, c = q.d, q.c
    dr = f.int.scalar_paper.grad(f.int_vars).value * q.s
    df = f.F2.grad(f.int_vars).value
    return [dr, -(3 * d + 4 * c - 4) / (4 * d) * df]


# solution-branch relations ----------------------------------------------------------


def _need_c(q: _Lower, minimum: int):
    if q.c < minimum:
        raise NotApplicable(f"needs c >= {minimum}")


def _rel10(q: _Lower):
    d, c = q.d, q.c
    return [c * (c - 1) * q.R_ex, d * (d - 1) * q.R_in]


def _rex12(q: _Lower):
    d, c = q.d, q.c
    _need_c(q, 2)
    return [q.R_ex, d * (d - 1) / (c * (c - 1)) * q.R_in, (2 * d + 3 * c - 2) / (4 * c) * q.F2]


def _in13a(q: _Lower):
    c = q.c
    _need_c(q, 2)
    k = q.kappa
    form = np.einsum("ik,lj->ijkl", k, k) - np.einsum("il,kj->ijkl", k, k)
    return [q.riem_in, -q.R_in / (c * (c - 1)) * form]


def _in13b(q: _Lower):
    return [q.ric_in, -q.R_in / q.c * q.kappa]


def _ex16a(q: _Lower):
    d, c = q.d, q.c
    _need_c(q, 2)
    g = q.g
    form = np.einsum("mk,ln->mnkl", g, g) - np.einsum("ml,kn->mnkl", g, g)
    gf = _gbracket(g, q.F2_ext)
    ff, br = _ff_terms(q)
    return [q.riem_ex, q.R_in / (c * (c - 1)) * form, (gf - gf.transpose(1, 0, 2, 3)) / (2 * c),
            0.5 * ff, -0.5 * br]


def _ex16b(q: _Lower):
    d, c = q.d, q.c
    _need_c(q, 2)
    return [q.ric_ex, (d - 1) / (c * (c - 1)) * q.R_in * q.g, (d + 3 * c - 2) / (4 * c) * q.F2_ext,
            q.F2 / (4 * c) * q.g]


def _ex16a_p(q: _Lower):
    d, c = q.d, q.c
    gg = _gbracket(q.g, q.g)
    ff, br = _ff_terms(q)
    return [q.riem_ex, q.F2 / (2 * c * d) * gg, 0.5 * ff, -0.5 * br]


def _ex16b_p(q: _Lower):
    d, c = q.d, q.c
    return [q.ric_ex, (d + 3 * c - 1) / (4 * c * d) * q.F2 * q.g]


def _ff17(q: _Lower):
    _need_c(q, 2)
    m = q.F2_ext @ q.gi  # F2_mu^nu
    return [m @ m, 4.0 / (q.c - 1) * q.R_in * m]


def _ff18(q: _Lower):
    _need_c(q, 2)
    return [q.F2_ext, 4.0 / (q.c - 1) * q.R_in * q.g]


def _f2_21(q: _Lower):
    _need_c(q, 2)
    return [np.array(q.F2), np.array(4.0 * q.d / (q.c - 1) * q.R_in)]


# g-contracted relations -------------------------------------------------------------


def _gbar_parts(q: _Lower):
    f = q.f
    gb = f.gbar.value
    F = f.F_alg.value
    Fm = np.einsum("amk,kn->amn", F, q.gi)  # F^a_mu^nu
    P = np.einsum("cmk,dkn->cdmn", Fm, Fm)
    return gb, F, Fm, P


def _gbar22a(q: _Lower):
    gb, F, Fm, P = _gbar_parts(q)
    lhs = np.einsum("ac,bd,cdmn->abmn", gb, gb, P + P.transpose(1, 0, 2, 3))
    Fuu = np.einsum("ckl,kx,ly->cxy", F, q.gi, q.gi)
    rhs = -2.0 / q.d * np.einsum("ac,bd,ckl,dkl->ab", gb, gb, F, Fuu)
    return [lhs, -np.einsum("ab,mn->abmn", rhs, np.eye(q.d))]


def _gbar22b(q: _Lower):
    gb, F, Fm, P = _gbar_parts(q)
    f = q.f
    lhs = np.einsum("ac,bd,cdmn->abmn", gb, gb, P - P.transpose(1, 0, 2, 3))
    dgb = f.gbar.grad(f.int_vars).value  # [i, b, c]
    K = f.K.value
    kdg = np.einsum("ai,ibc->abc", K, dgb)
    coef = kdg - kdg.transpose(1, 0, 2) - np.einsum("abe,ec->abc", f.sc, gb)
    return [lhs, -2.0 * np.einsum("abc,cmn->abmn", coef, Fm)]


def _gbar_k(q: _Lower):
    f = q.f
    if f.spec.n != 3:
        raise NotApplicable("needs a three-dimensional isometry algebra")
    if not q.F2 > 0:
        raise NotApplicable("needs F2 > 0")
    gbi = np.linalg.inv(f.gbar.value)
    kk = math.sqrt(q.c * q.d / q.F2) * np.einsum("ax,by,xyc->abc", gbi, gbi, f.sc)
    return [kk, -levi_civita3()]


def _weyl_d(q: _Lower):
    full = q.f.full
    r = full.riemann_lowered.value
    return [r, full.weyl.value - r]


_EVALUATORS: dict[str, Callable[[_Lower], list]] = {
    "W-8a": _w8a, "W-8b": _w8b, "W-8c": _w8c, "W-8d": _w8d, "W-8e": _w8e, "W-8f": _w8f,
    "W-8g": _w8g, "W-8g'": _w8g_rev, "W-8h": _w8h, "C-9a": _c9a, "C-9a'": _c9a_rev, "C-9b": _c9b,
    "REL-10": _rel10, "REX-12": _rex12, "IN-13a": _in13a, "IN-13b": _in13b, "EX-16a": _ex16a,
    "EX-16b": _ex16b, "EX-16a'": _ex16a_p, "EX-16b'": _ex16b_p, "FF-17": _ff17, "FF-18": _ff18,
    "F2-21": _f2_21, "GBAR-22a": _gbar22a, "GBAR-22b": _gbar22b, "GBAR-k": _gbar_k, "WEYL-D": _weyl_d,
}


# ------------------------------------------------------------------------------------
# per-point evaluation


@dataclass(frozen=True)
class PointResidual:
    max_abs: float
    scale: float
    literal_max_abs: float
    literal_scale: float

    @property
    def rel(self) -> float:
        return self.max_abs / max(self.scale, SCALE_FLOOR)

    @property
    def literal_rel(self) -> float:
        return self.literal_max_abs / max(self.literal_scale, SCALE_FLOOR)


def _measure(terms: list) -> tuple[float, float, np.ndarray]:
    arrs = [np.asarray(t, dtype=float) for t in terms]
    total = sum(arrs[1:], arrs[0].copy())
    scale = max(float(np.abs(a).max()) if a.size else 0.0 for a in arrs)
    return (float(np.abs(total).max()) if total.size else 0.0), scale, total


def residual_tensors(f: KKFields, tags: Iterable[str], literal: bool = False) -> dict[str, np.ndarray | str]:
    """LHS - RHS of each tag at the point held by ``f`` (or the not-applicable reason)."""
    q = _Lower(f, literal)
    out = {}
    for tag in tags:
        try:
            out[tag] = _measure(_EVALUATORS[tag](q))[2]
        except NotApplicable as exc:
            out[tag] = f"not applicable: {exc}"
    return out


def evaluate_point(f: KKFields, tags: Iterable[str]) -> dict[str, PointResidual | str]:
    adapted = _Lower(f, literal=False)
    literal = _Lower(f, literal=True) if f.ext.sign != 1.0 else adapted
    out: dict[str, PointResidual | str] = {}
    for tag in tags:
        try:
            a, sa, _ = _measure(_EVALUATORS[tag](adapted))
            if EQUATIONS[tag].signed and literal is not adapted:
                b, sb, _ = _measure(_EVALUATORS[tag](literal))
            else:
                b, sb = a, sa
            out[tag] = PointResidual(a, sa, b, sb)
        except NotApplicable as exc:
            out[tag] = f"not applicable: {exc}"
    return out


def eval_system8(spec: KKSpec, p: KKPoint, flag: str = PAPER) -> dict:
    return residual_tensors(KKFields(spec, p, flag), SYSTEM8_TAGS)


def eval_integrability9(spec: KKSpec, p: KKPoint, flag: str = PAPER) -> dict:
    return residual_tensors(KKFields(spec, p, flag), INTEGRABILITY_TAGS)


def eval_curvature_forms(spec: KKSpec, p: KKPoint, flag: str = PAPER) -> dict:
    return residual_tensors(KKFields(spec, p, flag), CURVATURE_TAGS)


def eval_gbar_relations(spec: KKSpec, p: KKPoint, flag: str = PAPER, spread_tol: float = 1e-8) -> dict:
    f = KKFields(spec, p, flag)
    gb = f.gbar
    spread = float(np.abs(gb.grad(f.int_vars).value).max())
    if spread > spread_tol:
        raise VerifyError(f"g_ab is not constant (max |d g_ab| = {spread:.3g}); the relations assume it is")
    return residual_tensors(f, GBAR_TAGS)


# ------------------------------------------------------------------------------------
# quaternionic structure


def qk_terms(qk: QKStructure, p) -> dict[str, list]:
    """Terms of the six quaternionic Kähler relations at an external point."""
    p = np.asarray(p, dtype=float)
    g_jet = qk.g.jet(p)
    geo = Geometry(g_jet)
    coords = J.seed_point(p)
    Jj = J.array(qk.J(coords), 4)
    th = J.array(qk.theta(coords), 4)
    Jm = Jj.value
    g = g_jet.value
    eps = levi_civita3()
    n = g.shape[0]
    prod = np.einsum("amk,bkn->abmn", Jm, Jm)
    delta = np.einsum("ab,mn->abmn", np.eye(3), np.eye(n))
    comm = [prod, -prod.transpose(1, 0, 2, 3)]
    nab = covariant_derivative(Jj, ("down", "down", "up"), geo.christoffel, range(n), slots=[1, 2]).value
    j_low = np.einsum("amk,kn->amn", Jm, g)
    form = (np.einsum("ml,kn->mnkl", g, g) - np.einsum("mk,ln->mnkl", g, g)
            + np.einsum("aml,ank->mnkl", j_low, j_low) - np.einsum("amk,anl->mnkl", j_low, j_low)
            - 2 * np.einsum("amn,akl->mnkl", j_low, j_low))
    curl = gauge_curvature(th, eps, range(n)).value
    return {
        "QK-1a": [prod, prod.transpose(1, 0, 2, 3), 2 * delta],
        "QK-1b": comm + [-2 * np.einsum("abc,cmn->abmn", eps, Jm)],
        "QK-1b'": comm + [2 * np.einsum("abc,cmn->abmn", eps, Jm)],
        "QK-2a": [np.einsum("amk,anl,kl->amn", Jm, Jm, g), -np.broadcast_to(g, (3, n, n))],
        "QK-2b": [nab, -np.einsum("bca,bk,cmn->kamn", eps, th.value, Jm)],
        "QK-3a": [geo.riemann_lowered.value, -qk.k / 4 * form],
        "QK-3b": [j_low, -curl / qk.k],
    }


def eval_qk(structure: QKStructure, p) -> dict[str, np.ndarray]:
    return {tag: _measure(terms)[2] for tag, terms in qk_terms(structure, p).items()}


def scaled_structure(qk: QKStructure, factor: float) -> QKStructure:
    """The same structure with the triple multiplied by ``factor`` (sensitivity witness)."""
    return QKStructure(qk.g, lambda coords: qk.J(coords) * factor, qk.theta, qk.k,
                       {**qk.calibration, "scaled_by": factor})


# ------------------------------------------------------------------------------------
# reports


@dataclass
class TagResult:
    tag: str
    applicable: bool
    in_verdict: bool
    max_abs: float = 0.0
    max_rel: float = 0.0
    argmax_index: int = -1
    argmax_point: tuple = ()
    passed: bool = True
    note: str = ""
    literal: dict | None = None

    def to_dict(self) -> dict:
        out = {"tag": self.tag, "applicable": self.applicable, "in_verdict": self.in_verdict,
               "description": EQUATIONS[self.tag].description if self.tag in EQUATIONS else ""}
        if self.applicable:
            out.update(max_abs=self.max_abs, max_rel=self.max_rel, argmax_index=self.argmax_index,
                       argmax_point=list(self.argmax_point), passed=self.passed)
            if self.literal is not None:
                out["literal"] = self.literal
        if self.note:
            out["note"] = self.note
        return out


def _aggregate(tag: str, per_point: list, points: list, rtol: float, atol: float,
               in_verdict: bool) -> TagResult:
    vals = [r for r in per_point if isinstance(r, PointResidual)]
    if not vals:
        reason = next((r for r in per_point if isinstance(r, str)), "not applicable")
        return TagResult(tag, False, False, note=reason)

    def ok(abs_, rel):
        return abs_ <= atol or rel <= rtol

    idx = max(range(len(per_point)),
              key=lambda i: per_point[i].rel if isinstance(per_point[i], PointResidual) else -1.0)
    worst_abs = max(r.max_abs for r in vals)
    worst_rel = max(r.rel for r in vals)
    passed = all(ok(r.max_abs, r.rel) for r in vals)
    lit = None
    if EQUATIONS.get(tag) is not None and EQUATIONS[tag].signed:
        lit_pass = all(ok(r.literal_max_abs, r.literal_rel) for r in vals)
        lit = {"max_abs": max(r.literal_max_abs for r in vals),
               "max_rel": max(r.literal_rel for r in vals), "passed": lit_pass}
    return TagResult(tag, True, in_verdict, worst_abs, worst_rel, idx, tuple(float(v) for v in points[idx]),
                     passed, literal=lit)


def _in_verdict(tag: str, spec_branch: str | None) -> bool:
    e = EQUATIONS[tag]
    if e.family in ("system", "integrability", "cross-check", "qk"):
        return True
    if e.family in ("branch", "gbar"):
        return spec_branch in e.branches
    return False


@dataclass
class ResidualReport:
    model: str
    seed: int
    points: int
    rtol: float
    atol: float
    convention: str
    suite: str
    tags: list[TagResult]
    constancy: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.tags if t.applicable and t.in_verdict)

    def tag(self, name: str) -> TagResult:
        for t in self.tags:
            if t.tag == name:
                return t
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "model": self.model, "seed": self.seed, "points": self.points, "suite": self.suite,
            "tolerance": {"rtol": self.rtol, "atol": self.atol, "scale": "largest term magnitude",
                          "scale_floor": SCALE_FLOOR},
            "convention": self.convention,
            "equations": [t.to_dict() for t in self.tags],
            "constancy": self.constancy,
            "scalars": self.scalars,
            "notes": list(self.notes),
            "verdict": "pass" if self.passed else "fail",
        }


def _spread(values: list[float]) -> dict:
    return {"min": min(values), "max": max(values), "spread": max(values) - min(values)}


def constancy_check(spec: KKSpec, points: Sequence[KKPoint], flag: str = PAPER,
                    fields: Sequence[KKFields] | None = None) -> dict:
    """Max-min spread of ``R_ex``, ``R_in`` and ``F2`` over the points (signed per ``flag``)."""
    if len(points) < 2:
        raise VerifyError("constancy needs at least two points")
    fields = fields or [KKFields(spec, p, flag) for p in points]
    return {
        "R_ex": _spread([float(f.ext.scalar.value) for f in fields]),
        "R_in": _spread([float(f.int.scalar.value) for f in fields]),
        "F2": _spread([float(f.F2.value) for f in fields]),
    }


def _scalars(spec: KKSpec, fields: Sequence[KKFields]) -> dict:
    f = fields[0]
    eig = np.linalg.eigvals(f.ext.ricci.value @ f.gi.value).real
    sc = np.asarray(spec.structure_constants, dtype=float)
    out = {
        "F2": float(f.F2.value), "R_ex": float(f.ext.scalar.value), "R_in": float(f.int.scalar.value),
        "external_ricci_eigenvalues": {"min": float(eig.min()), "max": float(eig.max())},
        "gbar_max_deviation_from_identity": max(float(np.abs(x.gbar.value - np.eye(spec.n)).max())
                                                 for x in fields),
    }
    if spec.n == 3:
        eps = levi_civita3()
        out["structure_constant_scale"] = float(np.sum(sc * eps) / 6.0)
        if out["F2"] > 0:
            out["normalized_structure_constant_scale"] = math.sqrt(spec.c * spec.d / out["F2"]) * out[
                "structure_constant_scale"]
    return out


def verify_spec(spec: KKSpec, tags: Sequence[str], n_points: int = 20, seed: int = 0,
                convention: str = PAPER, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                suite: str = "custom") -> ResidualReport:
    convention_sign(convention)
    pts = sample_kk_points(spec, n_points, seed)
    fields = _pmap(lambda p: KKFields(spec, p, convention), pts)
    per_point = _pmap(lambda f: evaluate_point(f, tags), fields)
    coords = [p.coords for p in pts]
    results = [_aggregate(t, [pp[t] for pp in per_point], coords, rtol, atol, _in_verdict(t, spec.branch))
               for t in tags]
    report = ResidualReport(spec.name, seed, n_points, rtol, atol, convention, suite, results)
    if n_points >= 2:
        report.constancy = constancy_check(spec, pts, convention, fields)
    report.scalars = _scalars(spec, fields)
    return report


def verify_qk(qk: QKStructure, n_points: int = 20, seed: int = 0, rtol: float = DEFAULT_RTOL,
              atol: float = DEFAULT_ATOL, name: str = "quaternionic-space-form",
              tags: Sequence[str] = QK_TAGS + ("QK-1b'",)) -> ResidualReport:
    pts = sample_box(qk.g.domain, n_points, seed)
    per_point = []
    for p in pts:
        terms = qk_terms(qk, p)
        row = {}
        for t in tags:
            a, s, _ = _measure(terms[t])
            row[t] = PointResidual(a, s, a, s)
        per_point.append(row)
    results = [_aggregate(t, [pp[t] for pp in per_point], pts, rtol, atol, _in_verdict(t, None)) for t in tags]
    report = ResidualReport(name, seed, n_points, rtol, atol, PAPER, "qk", results)
    report.scalars = {"k": qk.k, "calibration": {k: (float(v) if isinstance(v, (int, float, np.floating))
                                                     and not isinstance(v, bool) else v)
                                                 for k, v in qk.calibration.items()}}
    return report
