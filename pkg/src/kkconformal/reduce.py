"""Cotton and Weyl reduction formulas and the two-path comparator.

*Assembled* side: each formula is coded term by term from the lower-dimensional
data (external/internal curvatures, F, hatted derivatives) in the index order it
is written in.  *Direct* side: the assembled D-metric's Cotton and Weyl tensors,
rewritten in the adapted frame ``{E_mu = d_mu - A^i_mu d_i, d_i}``; contravariant
external and covariant internal frame components coincide with the coordinate
components obtained by raising with the full inverse metric and restricting to
the blocks, and in this frame the partial traces are proper lower-dimensional
tensors.

Trace conventions (frame components, ``g`` external, ``kappa`` internal):

* Cotton ``C_I = g^{nu a} C_{a nu I}``;
* Weyl ``C_{IJ} = g^{kappa a} C_{I kappa J a}``, ``C = g^{mu nu} C_{mu nu}``.

Array layouts follow the slot order written on the left-hand side of each
formula, e.g. ``C^{mu nu}_k`` is stored with axes (mu, nu, k).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import jet as J
from .geom import PAPER, convention_sign
from .kk import KKFields, KKPoint, KKSpec
from .verify import (DEFAULT_ATOL, DEFAULT_RTOL, SCALE_FLOOR, ResidualReport, TagResult, _pmap,
                     sample_kk_points)

COTTON_FORMULAS = ("A.Cmu", "A.Ci", "A.Cmunukappa", "A.Cijk", "A.Cmunuk", "A.Cijkappa", "A.Cmujk",
                   "A.Cinukappa")
WEYL_FORMULAS = ("B.C", "B.Cmunu", "B.Cij", "B.Cmuj", "B.GaussExt", "B.GaussInt", "B.CodazziExt",
                 "B.CodazziInt", "B.Ricci", "B.6th", "B.GaussExt-d2", "B.GaussInt-c2")
ALL_FORMULAS = COTTON_FORMULAS + WEYL_FORMULAS
# sign-corrected forms of the printed formulas that fail the two-path check; reported
# alongside, never part of the verdict
CORRECTED_FORMULAS = ("A.Cmunukappa'", "A.Cmunuk'", "A.Cinukappa'", "B.Ricci'", "B.6th'")
CORRECTIONS = {
    "A.Cmunukappa'": "g^{mu[nu} hat-nabla^{kappa]} F^2 term with coefficient -3/(4(d-1))",
    "A.Cmunuk'": "+1/2 hat-nabla^nu hat-nabla_kappa F_k^{mu kappa} and -1/2 F_k^{mu kappa} R_kappa^nu "
                 "(same as writing F_k^{kappa mu} in both, like the F2 term)",
    "A.Cinukappa'": "built from A.Cmunuk'",
    "B.Ricci'": "quadratic term -1/2 F_[k^{mu kappa} F_l]kappa^nu",
    "B.6th'": "first term 1/2 C^{mu kappa}_{jl} taken from B.Ricci' (the jl-antisymmetric part), "
              "symmetrised FF term +1/4",
}


class ReductionError(ValueError):
    pass


class NotApplicable(Exception):
    pass


def _anti(t: np.ndarray, i: int, j: int) -> np.ndarray:
    return 0.5 * (t - t.swapaxes(i, j))


def _sym(t: np.ndarray, i: int, j: int) -> np.ndarray:
    return 0.5 * (t + t.swapaxes(i, j))


def _gbracket(a: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``a^{mu[kappa} t^{lambda]nu}`` with axes (mu, nu, kappa, lambda)."""
    x = np.einsum("ma,bn->mnab", a, t)
    return _anti(x, 2, 3)


# ------------------------------------------------------------------------------------
# direct side


class Direct:
    """Adapted-frame components of the assembled metric's Cotton and Weyl tensors."""

    def __init__(self, f: KKFields, literal: bool = False):
        self.f = f
        self.s = f.full.sign if literal else 1.0
        self.d = f.d

    @cached_property
    def cotton(self) -> np.ndarray:
        return self.f.to_frame(self.f.full.cotton_paper.value) * self.s

    @cached_property
    def weyl(self) -> np.ndarray:
        return self.f.to_frame(self.f.full.weyl.value)

    def project(self, t: np.ndarray, pattern: str) -> np.ndarray:
        """``pattern``: one letter per slot, ``u`` = external up, ``d`` = internal down."""
        gi = self.f.gi.value
        d = self.d
        for s, kind in enumerate(pattern):
            idx = [slice(None)] * t.ndim
            if kind == "u":
                idx[s] = slice(0, d)
                t = np.moveaxis(np.tensordot(gi, t[tuple(idx)], axes=([1], [s])), 0, s)
            elif kind == "d":
                idx[s] = slice(d, None)
                t = t[tuple(idx)]
            else:
                raise ReductionError(f"bad pattern letter {kind!r}")
        return t

    @cached_property
    def cotton_trace(self) -> np.ndarray:
        """``C_I = g^{nu a} C_{a nu I}`` (frame, lower I)."""
        d = self.d
        return np.einsum("na,anI->I", self.f.gi.value, self.cotton[:d, :d, :])

    @cached_property
    def weyl_trace(self) -> np.ndarray:
        """``C_{IJ} = g^{kappa a} C_{I kappa J a}`` (frame, lower I J)."""
        d = self.d
        return np.einsum("ka,IkJa->IJ", self.f.gi.value, self.weyl[:, :d, :, :d])

    def value(self, formula: str) -> np.ndarray:
        d = self.d
        gi = self.f.gi.value
        C = self.cotton
        W = self.weyl
        if formula == "A.Cmu":
            return gi @ self.cotton_trace[:d]
        if formula == "A.Ci":
            return self.cotton_trace[d:]
        patterns = {"A.Cmunukappa": "uuu", "A.Cijk": "ddd", "A.Cmunuk": "uud", "A.Cijkappa": "ddu",
                    "A.Cmujk": "udd", "A.Cinukappa": "duu"}
        if formula in patterns:
            return self.project(C, patterns[formula])
        tr = self.weyl_trace
        if formula == "B.C":
            return np.array(np.einsum("mn,mn->", gi, tr[:d, :d]))
        if formula == "B.Cmunu":
            return self.project(tr, "uu")
        if formula == "B.Cij":
            return self.project(tr, "dd")
        if formula == "B.Cmuj":
            return self.project(tr, "ud")
        patterns = {"B.GaussExt": "uuuu", "B.GaussExt-d2": "uuuu", "B.GaussInt": "dddd",
                    "B.GaussInt-c2": "dddd", "B.CodazziExt": "duuu", "B.CodazziInt": "uddd",
                    "B.Ricci": "uudd", "B.6th": "udud"}
        if formula in patterns:
            return self.project(W, patterns[formula])
        if formula in CORRECTED_FORMULAS:
            return self.value(formula[:-1])
        raise ReductionError(f"unknown formula {formula!r}")

    def internal_trace_scalar(self) -> float:
        """``-C_i^i``; equals ``C`` by tracelessness."""
        d = self.d
        return -float(np.einsum("ij,ij->", self.f.ki.value, self.weyl_trace[d:, d:]))


# ------------------------------------------------------------------------------------
# assembled side


class Assembled:
    """Right-hand sides of the reduction formulas from lower-dimensional data."""

    def __init__(self, f: KKFields, literal: bool = False):
        self.f = f
        self.s = f.ext.sign if literal else 1.0
        self.d, self.c, self.D = f.d, f.c, f.D

    # lower-dimensional values ----------------------------------------------------------
    @cached_property
    def g(self):
        return self.f.g.value

    @cached_property
    def gi(self):
        return self.f.gi.value

    @cached_property
    def kap(self):
        return self.f.kappa.value

    @cached_property
    def ki(self):
        return self.f.ki.value

    @cached_property
    def Fl(self):  # F_{i mu nu}
        return self.f.F_low.value

    @cached_property
    def Fl_uu(self):  # F_i^{mu nu}
        return self.f.F_low_uu.value

    @cached_property
    def Fu_uu(self):  # F^{i mu nu}
        return self.f.F_up_uu.value

    @cached_property
    def Fl_mixed(self):  # F_{i mu}^nu
        return np.einsum("iml,ln->imn", self.Fl, self.gi)

    @cached_property
    def F2(self) -> float:
        return float(self.f.F2.value)

    @cached_property
    def F2_ext(self):
        return self.f.F2_ext.value

    @cached_property
    def F2_uu(self):
        return self.gi @ self.F2_ext @ self.gi

    @cached_property
    def F2_int(self):
        return self.f.F2_int.value

    @cached_property
    def R_ex(self) -> float:
        return float(self.f.ext.scalar_paper.value) * self.s

    @cached_property
    def R_in(self) -> float:
        return float(self.f.int.scalar_paper.value) * self.s

    @cached_property
    def ric_ex(self):
        return self.f.ext.ricci_paper.value * self.s

    @cached_property
    def ric_in(self):
        return self.f.int.ricci_paper.value * self.s

    @cached_property
    def cotton_ex_uuu(self):
        if self.d == 2:  # trace-free, antisymmetric in a pair: no components in 2D
            return np.zeros((2, 2, 2))
        c = self.f.ext.cotton_paper.value * self.s
        return np.einsum("ia,jb,kc,abc->ijk", self.gi, self.gi, self.gi, c)

    @cached_property
    def cotton_in(self):
        if self.c == 2:
            return np.zeros((2, 2, 2))
        return self.f.int.cotton_paper.value * self.s

    @cached_property
    def weyl_ex_uuuu(self):
        w = self.f.ext.weyl.value
        gi = self.gi
        return np.einsum("ia,jb,kc,ld,abcd->ijkl", gi, gi, gi, gi, w)

    @cached_property
    def weyl_in(self):
        return self.f.int.weyl.value

    # derivatives ---------------------------------------------------------------------
    @cached_property
    def hF(self):
        """``hat-nabla_rho F_{i mu nu}`` as (rho, i, mu, nu)."""
        return self.f.hat_nabla(self.f.F_low, ("int_down", "ext_down", "ext_down")).value

    @cached_property
    def H(self):
        """``hat-nabla_rho F_i^{mu lambda}`` as (rho, i, mu, lambda)."""
        return np.einsum("ma,lb,riab->riml", self.gi, self.gi, self.hF)

    @cached_property
    def _Y_jet(self):
        """``Y_k^mu = hat-nabla_kappa F_k^{mu kappa}`` as a jet (k, mu)."""
        h = self.f.hat_nabla(self.f.F_low_uu, ("int_down", "ext_up", "ext_up"))  # (r, k, mu, kappa)
        return J.einsum("rkmr->km", h)

    @cached_property
    def Y2(self):
        """``hat-nabla_nu F_j^{nu mu}`` as (j, mu)."""
        return np.einsum("rjrm->jm", self.H)

    def hat_grad_up(self, scalar_jet) -> np.ndarray:
        return self.gi @ self.f.hat_grad_scalar(scalar_jet).value

    @cached_property
    def dF2_int(self):
        return self.f.F2.grad(self.f.int_vars).value

    # traces ----------------------------------------------------------------------------
    def A_Cmu(self):
        d, c, D = self.d, self.c, self.D
        f = self.f
        scal = f.ext.scalar_paper * (c * self.s) + f.F2 * ((2 * d + 3 * c - 2) / 4)
        t1 = self.hat_grad_up(scal) / (2 * (D - 1))
        div = np.einsum("rk,ij,rjkn->in", self.gi, self.ki, self.hF)  # hat-nabla^kappa F^i_{kappa nu}
        t2 = 0.25 * np.einsum("imn,in->m", self.Fl_uu, div)
        return [t1, t2]

    def A_Ci(self):
        d, c, D = self.d, self.c, self.D
        f = self.f
        dr = f.int.scalar_paper.grad(f.int_vars).value * self.s
        return [-d * dr / (2 * (D - 1)), (3 * d + 4 * c - 4) / 4 * self.dF2_int / (2 * (D - 1))]

    @cached_property
    def Cmu(self):
        return sum(self.A_Cmu())

    @cached_property
    def Ci(self):
        return sum(self.A_Ci())

    # Cotton components -------------------------------------------------------------------
    def A_Cmunukappa(self, corrected: bool = False):
        d = self.d
        if d < 2:
            raise NotApplicable("needs d > 1")
        gi, f = self.gi, self.f
        Cmu = self.Cmu
        a1 = (np.einsum("k,nm->mnk", Cmu, gi) - np.einsum("n,km->mnk", Cmu, gi)) / (d - 1)
        a2 = self.cotton_ex_uuu
        P = J.einsum("ilm,ink->lmnk", f.F_low_uu, f.F_up_uu)
        hP = f.hat_nabla(P, ("ext_up",) * 4).value  # (r, l, m, n, k)
        a3 = -0.5 * np.einsum("llmnk->mnk", hP)
        Hu = np.einsum("ij,rjml->riml", self.ki, self.H)  # hat-nabla_rho F^{i mu lambda}
        G = np.einsum("nr,riml->niml", gi, Hu)
        X = np.einsum("ilk,niml->mnk", self.Fl_mixed, G)
        a4 = _anti(X, 1, 2)
        Y = np.einsum("rikr->ik", self.H)  # hat-nabla_lambda F_i^{kappa lambda}
        Z = np.einsum("imn,ik->mnk", self.Fu_uu, Y)
        a5 = -0.5 * _anti(Z, 1, 2)
        V = np.einsum("ar,ij,ajlr->il", gi, self.ki, self.hF)  # hat-nabla^rho F^i_{lambda rho}
        u = np.einsum("ilk,il->k", self.Fl_uu, V)
        a6 = -(np.einsum("k,nm->mnk", u, gi) - np.einsum("n,km->mnk", u, gi)) / (4 * (d - 1))
        w = self.hat_grad_up(f.F2)
        a7 = (-1.0 if corrected else 1.0) * 3.0 / (4 * (d - 1)) * (np.einsum("mn,k->mnk", gi, w) - np.einsum("mk,n->mnk", gi, w)) / 2
        return [a1, a2, a3, a4, a5, a6, a7]

    def A_Cijk(self):
        c = self.c
        if c < 2:
            raise NotApplicable("needs c > 1")
        kap = self.kap
        Ci = self.Ci
        b1 = -(np.einsum("k,ji->ijk", Ci, kap) - np.einsum("j,ki->ijk", Ci, kap)) / (c - 1)
        b2 = self.cotton_in
        dF = self.dF2_int
        b3 = 3.0 / (8 * (c - 1)) * (np.einsum("k,ji->ijk", dF, kap) - np.einsum("j,ki->ijk", dF, kap))
        N = self.f.int_nabla(self.f.F2_int, ("int_down", "int_down")).value  # (k, j, i)
        b4 = -0.25 * (np.einsum("kji->ijk", N) - np.einsum("jki->ijk", N))
        return [b1, b2, b3, b4]

    def A_Cmunuk(self, corrected: bool = False):
        d = self.d
        f, gi = self.f, self.gi
        c1 = np.einsum("mn,k->mnk", gi, self.Ci) / d
        hY = f.hat_nabla(self._Y_jet, ("int_down", "ext_up")).value  # (r, k, mu)
        flip = -1.0 if corrected else 1.0
        c2 = -0.5 * flip * np.einsum("nr,rkm->mnk", gi, hY)
        E = f.raise_ext(f.F2_ext, (0, 1)) - f.gi * (f.F2 * (1.0 / d))
        c3 = 0.5 * np.einsum("kmn->mnk", E.grad(f.int_vars).value)
        Rmix = self.ric_ex @ gi  # R_kappa^nu
        c4 = 0.5 * flip * np.einsum("kma,an->mnk", self.Fl_uu, Rmix)
        Rin_mix = self.ki @ self.ric_in  # R^l_k
        c5 = 0.5 * np.einsum("lmn,lk->mnk", self.Fl_uu, Rin_mix)
        F2mix = self.F2_ext @ gi  # F2_kappa^nu
        c6 = 0.25 * np.einsum("kam,an->mnk", self.Fl_uu, F2mix)
        c7 = -0.125 * np.einsum("lmn,lk->mnk", self.Fu_uu, self.F2_int)
        return [c1, c2, c3, c4, c5, c6, c7]

    def A_Cijkappa(self):
        c = self.c
        f, gi, kap = self.f, self.gi, self.kap
        d1 = -np.einsum("ij,k->ijk", kap, self.Cmu) / c
        nY = f.int_nabla(self._Y_jet, ("int_down", "ext_up")).value  # (j, i, kappa)
        d2 = 0.5 * np.einsum("jik->ijk", nY)
        Q = f.F2_int - f.kappa * (f.F2 * (1.0 / c))
        hQ = f.hat_nabla(Q, ("int_down", "int_down")).value  # (r, i, j)
        d3 = -0.25 * np.einsum("kr,rij->ijk", gi, hQ)
        d4 = -0.25 * np.einsum("ka,iam,jm->ijk", gi, self.Fl, self.Y2)
        v = np.einsum("xa,kam,kl,lm->x", gi, self.Fl, self.ki, self.Y2)
        d5 = np.einsum("ij,x->ijx", kap, v) / (4 * c)
        return [d1, d2, d3, d4, d5]

    def A_Cmujk(self):
        if self.c < 2:
            raise NotApplicable("needs c > 1")
        A = sum(self.A_Cijkappa())  # (i, j, kappa)
        return [np.einsum("kjm->mjk", A), -np.einsum("jkm->mjk", A)]

    def A_Cinukappa(self, corrected: bool = False):
        if self.d < 2:
            raise NotApplicable("needs d > 1")
        B = sum(self.A_Cmunuk(corrected))  # (mu, nu, k)
        return [np.einsum("kni->ink", B), -np.einsum("nki->ink", B)]

    # Weyl traces ---------------------------------------------------------------------------
    def B_C(self):
        d, c, D = self.d, self.c, self.D
        k = 1.0 / ((D - 1) * (D - 2))
        return [np.array(k * c * (c - 1) * self.R_ex), np.array(k * d * (d - 1) * self.R_in),
                np.array(k * (c - 1) * (2 * d + 3 * c - 2) / 4 * self.F2)]

    @cached_property
    def C(self) -> float:
        return float(sum(self.B_C()))

    def B_Cmunu(self):
        d, c, D = self.d, self.c, self.D
        gi = self.gi
        ric_uu = gi @ self.ric_ex @ gi
        return [self.C * gi / d, c / (D - 2) * (ric_uu - self.R_ex * gi / d),
                (d + 3 * c - 2) / (4 * (D - 2)) * (self.F2_uu - self.F2 * gi / d)]

    def B_Cij(self):
        d, c, D = self.d, self.c, self.D
        kap = self.kap
        return [-self.C * kap / c, -d / (D - 2) * (self.ric_in - self.R_in * kap / c),
                -(c - 2) / (4 * (D - 2)) * (self.F2_int - self.F2 * kap / c)]

    def B_Cmuj(self):
        c, D = self.c, self.D
        return [(c - 1) / (2 * (D - 2)) * self.Y2.T]

    @cached_property
    def Cmunu(self):
        return sum(self.B_Cmunu())

    @cached_property
    def Cij(self):
        return sum(self.B_Cij())

    @cached_property
    def Cmuj(self):
        return sum(self.B_Cmuj())

    # Weyl components ---------------------------------------------------------------------
    def B_GaussExt(self):
        d = self.d
        if d <= 2:
            raise NotApplicable("needs d > 2 (use B.GaussExt-d2)")
        gi = self.gi
        gc = _gbracket(gi, self.Cmunu)
        T = self.F2_uu - self.F2 * gi / (2 * (d - 1))
        gt = _gbracket(gi, T)
        ff = np.einsum("imn,ikl->mnkl", self.Fl_uu, self.Fu_uu)
        p = np.einsum("ima,ibn->mnab", self.Fl_uu, self.Fu_uu)
        return [2.0 / (d - 2) * gc, -2.0 / (d - 2) * gc.transpose(1, 0, 2, 3),
                -2.0 / ((d - 1) * (d - 2)) * self.C * _gbracket(gi, gi),
                self.weyl_ex_uuuu, 0.5 * ff, -0.5 * _anti(p, 2, 3),
                -1.5 / (d - 2) * gt, 1.5 / (d - 2) * gt.transpose(1, 0, 2, 3)]

    def B_GaussExt_d2(self):
        if self.d != 2:
            raise NotApplicable("replacement form for d = 2")
        return [self.C * _gbracket(self.gi, self.gi)]

    def B_GaussInt(self):
        c = self.c
        if c <= 2:
            raise NotApplicable("needs c > 2 (use B.GaussInt-c2)")
        kap = self.kap
        kc = np.einsum("ik,lj->ijkl", kap, self.Cij)
        kc = _anti(kc, 2, 3)
        return [-2.0 / (c - 2) * kc, 2.0 / (c - 2) * kc.transpose(1, 0, 2, 3),
                -2.0 / ((c - 1) * (c - 2)) * self.C * _gbracket(kap, kap), self.weyl_in]

    def B_GaussInt_c2(self):
        if self.c != 2:
            raise NotApplicable("replacement form for c = 2")
        return [self.C * _gbracket(self.kap, self.kap)]

    def B_CodazziExt(self):
        c = self.c
        if c < 2:
            raise NotApplicable("needs c > 1")
        gi = self.gi
        Cm = self.Cmuj  # (lambda, i)
        t = (np.einsum("nk,li->inkl", gi, Cm) - np.einsum("nl,ki->inkl", gi, Cm)) / (c - 1)
        hu = np.einsum("nr,rikl->inkl", gi, self.H)
        return [t, -0.5 * hu]

    def B_CodazziInt(self):
        c = self.c
        if c < 2:
            raise NotApplicable("needs c > 1")
        Cm = self.Cmuj  # (mu, k)
        kap = self.kap
        return [-(np.einsum("mk,lj->mjkl", Cm, kap) - np.einsum("ml,kj->mjkl", Cm, kap)) / (c - 1)]

    def _ricci_terms(self, corrected: bool = False):
        f = self.f
        nF = f.int_nabla(f.F_low_uu, ("int_down", "ext_up", "ext_up")).value  # (k, l, mu, nu)
        p = np.einsum("kma,lan->klmn", self.Fl_uu, self.Fl_mixed)
        half = -0.5 if corrected else 0.5
        return [np.einsum("klmn->mnkl", nF), half * np.einsum("klmn->mnkl", _anti(p, 0, 1))]

    def B_Ricci(self):
        return self._ricci_terms()

    def B_6th(self, corrected: bool = False):
        d, c = self.d, self.c
        gi, kap = self.gi, self.kap
        ric = sum(self._ricci_terms(corrected))  # (mu, kappa, j, l)
        p = np.einsum("jmn,lnk->jlmk", self.Fl_uu, self.Fl_mixed)
        ps = _sym(p, 0, 1)
        first, ff = (0.5, 0.25) if corrected else (1.0, -0.25)
        return [first * np.einsum("mkjl->mjkl", ric),
                -np.einsum("mk,jl->mjkl", self.Cmunu, kap) / c,
                np.einsum("mk,jl->mjkl", gi, self.Cij) / d,
                self.C * np.einsum("mk,jl->mjkl", gi, kap) / (c * d),
                ff * np.einsum("jlmk->mjkl", ps),
                np.einsum("mk,jl->mjkl", gi, self.F2_int) / (4 * d),
                np.einsum("mk,jl->mjkl", self.F2_uu, kap) / (4 * c),
                -self.F2 * np.einsum("mk,jl->mjkl", gi, kap) / (4 * c * d)]

    def terms(self, formula: str) -> list:
        if formula in CORRECTED_FORMULAS:
            base = formula[:-1]
            return (self._ricci_terms(True) if base == "B.Ricci" else _ASSEMBLED[base](self, True))
        fn = _ASSEMBLED.get(formula)
        if fn is None:
            raise ReductionError(f"unknown formula {formula!r}")
        return fn(self)


_ASSEMBLED: dict[str, Callable[[Assembled], list]] = {
    "A.Cmu": Assembled.A_Cmu, "A.Ci": Assembled.A_Ci, "A.Cmunukappa": Assembled.A_Cmunukappa,
    "A.Cijk": Assembled.A_Cijk, "A.Cmunuk": Assembled.A_Cmunuk, "A.Cijkappa": Assembled.A_Cijkappa,
    "A.Cmujk": Assembled.A_Cmujk, "A.Cinukappa": Assembled.A_Cinukappa,
    "B.C": Assembled.B_C, "B.Cmunu": Assembled.B_Cmunu, "B.Cij": Assembled.B_Cij, "B.Cmuj": Assembled.B_Cmuj,
    "B.GaussExt": Assembled.B_GaussExt, "B.GaussInt": Assembled.B_GaussInt,
    "B.CodazziExt": Assembled.B_CodazziExt, "B.CodazziInt": Assembled.B_CodazziInt,
    "B.Ricci": Assembled.B_Ricci, "B.6th": Assembled.B_6th,
    "B.GaussExt-d2": Assembled.B_GaussExt_d2, "B.GaussInt-c2": Assembled.B_GaussInt_c2,
}


# ------------------------------------------------------------------------------------
# public operations


def _assembled_value(a: Assembled, formula: str) -> np.ndarray:
    ts = [np.asarray(t, dtype=float) for t in a.terms(formula)]
    return sum(ts[1:], ts[0].copy())


def cotton_traces(spec: KKSpec, p: KKPoint, flag: str = PAPER, direct: bool = False) -> dict:
    f = KKFields(spec, p, flag)
    a = Assembled(f, literal=True)
    out = {"C^mu": a.Cmu, "C_i": a.Ci}
    if direct:
        dr = Direct(f, literal=True)
        out["direct"] = {"C^mu": dr.value("A.Cmu"), "C_i": dr.value("A.Ci")}
    return out


def cotton_components(spec: KKSpec, p: KKPoint, flag: str = PAPER) -> dict:
    a = Assembled(KKFields(spec, p, flag), literal=True)
    out = {}
    for name in COTTON_FORMULAS[2:]:
        try:
            out[name] = _assembled_value(a, name)
        except NotApplicable as exc:
            out[name] = f"not applicable: {exc}"
    return out


def weyl_traces(spec: KKSpec, p: KKPoint, flag: str = PAPER) -> dict:
    if spec.D < 4:
        raise ReductionError("Weyl reduction needs D >= 4")
    a = Assembled(KKFields(spec, p, flag), literal=True)
    return {"C": a.C, "C^munu": a.Cmunu, "C_ij": a.Cij, "C^mu_j": a.Cmuj}


def weyl_components(spec: KKSpec, p: KKPoint, flag: str = PAPER) -> dict:
    if spec.D < 4:
        raise ReductionError("Weyl reduction needs D >= 4")
    a = Assembled(KKFields(spec, p, flag), literal=True)
    out = {}
    for name in WEYL_FORMULAS[4:]:
        try:
            out[name] = _assembled_value(a, name)
        except NotApplicable as exc:
            out[name] = f"not applicable: {exc}"
    return out


@dataclass(frozen=True)
class Comparison:
    max_abs: float
    scale: float

    @property
    def rel(self) -> float:
        return self.max_abs / max(self.scale, SCALE_FLOOR)


def compare_at(f: KKFields, formulas: Sequence[str] = ALL_FORMULAS, literal: bool = False,
               near_singular: float = 1e-8) -> dict[str, Comparison | str]:
    """``max |assembled - direct|`` per formula; scale is the larger of the two magnitudes."""
    ev = np.linalg.eigvalsh(f.full_metric.value)
    if np.min(np.abs(ev)) < near_singular * np.max(np.abs(ev)):
        raise ReductionError("assembled metric is near-singular at this point")
    a = Assembled(f, literal=literal)
    dr = Direct(f, literal=literal)
    out: dict[str, Comparison | str] = {}
    for name in formulas:
        if name.startswith("B.") and f.D < 4:
            out[name] = "not applicable: Weyl reduction needs D >= 4"
            continue
        try:
            lhs = _assembled_value(a, name)
        except NotApplicable as exc:
            out[name] = f"not applicable: {exc}"
            continue
        rhs = dr.value(name)
        if lhs.shape != rhs.shape:
            raise ReductionError(f"{name}: assembled shape {lhs.shape} vs direct {rhs.shape}")
        out[name] = _compare_arrays(lhs, rhs)
    return out


def _compare_arrays(lhs, rhs) -> Comparison:
    lhs, rhs = np.asarray(lhs, dtype=float), np.asarray(rhs, dtype=float)
    diff = float(np.abs(lhs - rhs).max()) if lhs.size else 0.0
    scale = max(float(np.abs(lhs).max()) if lhs.size else 0.0, float(np.abs(rhs).max()) if rhs.size else 0.0)
    return Comparison(diff, scale)


def trace_coherence(f: KKFields) -> Comparison:
    """Assembled ``C_mu^mu`` against ``-C_i^i``."""
    a = Assembled(f)
    ext = float(np.einsum("mn,mn->", a.Cmunu, a.g))
    internal = -float(np.einsum("ij,ij->", a.Cij, a.ki))
    return _compare_arrays(np.array(ext), np.array(internal))


def cotton_weyl_blocks(f: KKFields) -> dict[str, Comparison]:
    """``(D-3)`` times the assembled Cotton blocks against ``(D-2)`` times the Weyl divergence
    of the D-metric, both in adapted-frame components."""
    D = f.D
    a = Assembled(f)
    dr = Direct(f)
    div = f.to_frame(np.einsum("JKI->IJK", f.full.weyl_divergence.value))
    out = {}
    for name, pattern in (("A.Cmunukappa'", "uuu"), ("A.Cijk", "ddd"), ("A.Cmunuk'", "uud"),
                          ("A.Cijkappa", "ddu")):
        try:
            lhs = (D - 3) * _assembled_value(a, name)
        except NotApplicable:
            continue
        out[name] = _compare_arrays(lhs, (D - 2) * dr.project(div, pattern))
    return out


def _ok(c: Comparison, rtol: float, atol: float) -> bool:
    return c.max_abs <= atol or c.rel <= rtol


def compare(spec: KKSpec, n_points: int = 10, seed: int = 0, convention: str = PAPER,
            rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
            formulas: Sequence[str] = ALL_FORMULAS + CORRECTED_FORMULAS) -> ResidualReport:
    """Two-path agreement report; the verdict uses convention-adapted signs and covers
    the printed formulas only."""
    sign = convention_sign(convention)
    pts = sample_kk_points(spec, n_points, seed)

    def one(p):
        f = KKFields(spec, p, convention)
        adapted = compare_at(f, formulas, False)
        literal = compare_at(f, formulas, True) if sign != 1.0 else adapted
        return adapted, literal, trace_coherence(f)

    rows = _pmap(one, pts)
    results = []
    for name in formulas:
        vals = [r[0][name] for r in rows]
        lits = [r[1][name] for r in rows]
        in_verdict = name not in CORRECTED_FORMULAS
        note = CORRECTIONS.get(name, "")
        if isinstance(vals[0], str):
            results.append(TagResult(name, False, in_verdict, note=vals[0]))
            continue
        idx = max(range(len(vals)), key=lambda i: vals[i].rel)
        results.append(TagResult(
            name, True, in_verdict, max(v.max_abs for v in vals), max(v.rel for v in vals), idx,
            tuple(float(x) for x in pts[idx].coords), all(_ok(v, rtol, atol) for v in vals), note,
            literal={"max_abs": max(v.max_abs for v in lits), "max_rel": max(v.rel for v in lits),
                     "passed": all(_ok(v, rtol, atol) for v in lits)}))
    report = ResidualReport(spec.name, seed, n_points, rtol, atol, convention, "reduction", results)
    tc = [r[2] for r in rows]
    report.scalars["trace_coherence_max_abs"] = max(c.max_abs for c in tc)
    report.notes.append("A.Cijk: the symbol eta_{j]i} is read as kappa_{j]i}")
    return report
