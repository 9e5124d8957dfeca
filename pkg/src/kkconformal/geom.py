"""Curvature of a metric given as a jet at a chart point.

Conventions (the "paper" convention):

* ``Gamma[J, K, L] = Gamma_{JK}^L = 1/2 g^{LM} (d_J g_{KM} + d_K g_{JM} - d_M g_{JK})``
* ``R[I, J, K, L] = R_{IJK}^L = d_I Gamma_{JK}^L - d_J Gamma_{IK}^L
  + Gamma_{IM}^L Gamma_{JK}^M - Gamma_{JM}^L Gamma_{IK}^M``
* ``R_{IJKL} = R_{IJK}^M g_{ML}``, ``Ric_{IJ} = R_{IKJ}^K``, ``R = g^{IJ} Ric_{IJ}``
* ``S_{IJ} = Ric_{IJ} - R g_{IJ} / (2(D-1))``, Cotton ``C_{IJK} = 2 nabla_[K S_J]I``
* Weyl ``C_{IJKL} = R_{IJKL} - 2/(D-2) (g_I[K S_L]J - g_J[K S_L]I)``

With this Ricci the round sphere has *negative* scalar curvature.  The
"standard" convention flips the sign of Ricci, scalar, Schouten and Cotton and
leaves the Riemann tensor and the Weyl tensor untouched.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import jet as J
from .jet import Jet3

PAPER, STANDARD = "paper", "standard"
CONVENTIONS = (PAPER, STANDARD)


class GeometryError(ValueError):
    pass


def convention_sign(convention: str) -> float:
    if convention == PAPER:
        return 1.0
    if convention == STANDARD:
        return -1.0
    raise GeometryError(f"unknown convention {convention!r}")


@dataclass(frozen=True)
class Box:
    """Axis-aligned chart domain."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    @classmethod
    def cube(cls, dim: int, half_width: float, center: Sequence[float] | None = None) -> Box:
        c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        return cls(tuple(c - half_width), tuple(c + half_width))

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= np.asarray(self.lo)) and np.all(p <= np.asarray(self.hi)))

    def shrink(self, fraction: float = 0.05) -> Box:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        pad = fraction * (hi - lo)
        return Box(tuple(lo + pad), tuple(hi - pad))

    def sample(self, uniforms) -> np.ndarray:
        """Map uniforms in [0, 1) to a point of the box shrunk by 5% per side."""
        inner = self.shrink(0.05)
        lo, hi = np.asarray(inner.lo), np.asarray(inner.hi)
        return lo + np.asarray(uniforms, dtype=float) * (hi - lo)


@dataclass(frozen=True)
class MetricField:
    """Metric components as a function of chart-coordinate jets.

    ``evaluate(coords)`` receives ``dim`` coordinate jets and returns a
    ``(dim, dim)`` :class:`Jet3` (or a nested list of jets/numbers).
    """

    dim: int
    evaluate: Callable[[list[Jet3]], object]
    domain: Box
    signature: tuple[int, ...] = ()
    name: str = "metric"

    def jet(self, point, jet_dim: int | None = None, offset: int = 0) -> Jet3:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            raise GeometryError(f"{self.name}: point has shape {point.shape}, expected ({self.dim},)")
        if not self.domain.contains(point):
            raise GeometryError(f"{self.name}: point {point.tolist()} outside the chart domain")
        jet_dim = self.dim if jet_dim is None else jet_dim
        coords = J.seed_point(point, jet_dim, offset)
        g = J.array(self.evaluate(coords), jet_dim)
        if g.shape != (self.dim, self.dim):
            raise GeometryError(f"{self.name}: metric evaluated to shape {g.shape}")
        return g

    def values(self, point) -> np.ndarray:
        return self.jet(point).value


def _letters(n: int, skip: str = "") -> list[str]:
    return [ch for ch in string.ascii_lowercase if ch not in skip][:n]


def covariant_derivative(
    t: Jet3,
    variances: Sequence[str],
    christoffel: Jet3,
    variables: Sequence[int],
    slots: Sequence[int] | None = None,
) -> Jet3:
    """Levi-Civita derivative with the derivative index placed first.

    ``christoffel[J, K, L] = Gamma_{JK}^L`` for the coordinates ``variables``
    (jet variable indices).  Only the slots listed in ``slots`` (default: all)
    receive connection terms; the rest are treated as scalars.
    """
    rank = t.ndim
    if len(variances) != rank:
        raise GeometryError("variance list does not match the tensor rank")
    out = t.grad(variables)
    slots = range(rank) if slots is None else slots
    idx = _letters(rank + 2)
    k, m = idx[rank], idx[rank + 1]
    base = idx[:rank]
    for s in slots:
        src = list(base)
        src[s] = m
        res = "".join([k] + base)
        if variances[s] == "up":
            term = J.einsum(f"{k}{m}{base[s]},{''.join(src)}->{res}", christoffel, t)
            out = out + term
        else:
            term = J.einsum(f"{k}{base[s]}{m},{''.join(src)}->{res}", christoffel, t)
            out = out - term
    return out


class Geometry:
    """Lazily evaluated curvature stack of a metric jet.

    ``variables`` lists the jet variables that are this metric's coordinates;
    a lower-dimensional metric can therefore live inside a larger jet space.
    """

    def __init__(self, g: Jet3, variables: Sequence[int] | None = None, convention: str = PAPER):
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise GeometryError(f"metric must be square, got {g.shape}")
        self.g = g
        self.n = g.shape[0]
        self.variables = tuple(range(self.n) if variables is None else variables)
        if len(self.variables) != self.n:
            raise GeometryError("one jet variable per coordinate is required")
        self.sign = convention_sign(convention)
        self.convention = convention

    @cached_property
    def ginv(self) -> Jet3:
        return J.inv(self.g)

    @cached_property
    def christoffel(self) -> Jet3:
        dg = self.g.grad(self.variables)  # dg[a, b, c] = d_a g_bc
        term = dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0)
        return J.einsum("jkm,lm->jkl", term, self.ginv) * 0.5

    @cached_property
    def riemann(self) -> Jet3:
        """``R_{IJK}^L``."""
        gam = self.christoffel
        dgam = gam.grad(self.variables)
        quad = J.einsum("iml,jkm->ijkl", gam, gam)
        lin = dgam - dgam.transpose(1, 0, 2, 3)
        return lin + quad - quad.transpose(1, 0, 2, 3)

    @cached_property
    def riemann_lowered(self) -> Jet3:
        return J.einsum("ijkm,ml->ijkl", self.riemann, self.g)

    @cached_property
    def ricci_paper(self) -> Jet3:
        return J.einsum("ikjk->ij", self.riemann)

    @cached_property
    def scalar_paper(self) -> Jet3:
        return J.einsum("ij,ij->", self.ricci_paper, self.ginv)

    @cached_property
    def schouten_paper(self) -> Jet3:
        return self.ricci_paper - self.g * self.scalar_paper * (1.0 / (2 * (self.n - 1)))

    @property
    def ricci(self) -> Jet3:
        return self.ricci_paper * self.sign

    @property
    def scalar(self) -> Jet3:
        return self.scalar_paper * self.sign

    @property
    def schouten(self) -> Jet3:
        return self.schouten_paper * self.sign

    def nabla(self, t: Jet3, variances: Sequence[str]) -> Jet3:
        return covariant_derivative(t, variances, self.christoffel, self.variables)

    @cached_property
    def cotton_paper(self) -> Jet3:
        if self.n < 3:
            raise GeometryError("Cotton tensor needs dimension >= 3")
        ds = self.nabla(self.schouten_paper, ("down", "down"))  # ds[K, J, I] = nabla_K S_JI
        return ds.transpose(2, 1, 0) - ds.transpose(2, 0, 1)

    @property
    def cotton(self) -> Jet3:
        return self.cotton_paper * self.sign

    @cached_property
    def weyl(self) -> Jet3:
        if self.n < 3:
            raise GeometryError("Weyl tensor needs dimension >= 3")
        g, s = self.g, self.schouten_paper
        gs = J.einsum("ik,lj->ijkl", g, s)  # g_IK S_LJ
        anti = (gs - gs.transpose(0, 1, 3, 2)) * 0.5  # g_I[K S_L]J
        return self.riemann_lowered - (anti - anti.transpose(1, 0, 2, 3)) * (2.0 / (self.n - 2))

    @cached_property
    def weyl_divergence(self) -> Jet3:
        """``nabla_L C_{IJK}^L``."""
        w_up = J.einsum("ijkm,ml->ijkl", self.weyl, self.ginv)
        dw = self.nabla(w_up, ("down", "down", "down", "up"))
        return J.einsum("lijkl->ijk", dw)


@dataclass(frozen=True)
class CurvatureBundle:
    point: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    riemann_lowered: np.ndarray
    ricci: np.ndarray
    scalar: float
    schouten: np.ndarray
    cotton: np.ndarray | None
    weyl: np.ndarray | None
    convention: str


def christoffel(m: MetricField, p) -> np.ndarray:
    """``Gamma[J, K, L] = Gamma_{JK}^L`` at ``p``."""
    return Geometry(m.jet(p)).christoffel.value


def curvature_bundle(m: MetricField, p, convention: str = PAPER) -> CurvatureBundle:
    geo = Geometry(m.jet(p), convention=convention)
    conformal = m.dim >= 3
    return CurvatureBundle(
        point=np.asarray(p, dtype=float),
        christoffel=geo.christoffel.value,
        riemann=geo.riemann.value,
        riemann_lowered=geo.riemann_lowered.value,
        ricci=geo.ricci.value,
        scalar=float(geo.scalar.value),
        schouten=geo.schouten.value,
        cotton=geo.cotton.value if conformal else None,
        weyl=geo.weyl.value if conformal else None,
        convention=convention,
    )


def cov_deriv(
    field: Callable[[list[Jet3]], Jet3],
    variances: Sequence[str],
    m: MetricField,
    p,
) -> np.ndarray:
    """Covariant derivative of a tensor field (given on chart coordinate jets) at ``p``.

    The derivative index is the first axis of the result.
    """
    coords = J.seed_point(p)
    t = J.array(field(coords), m.dim)
    return Geometry(m.jet(p)).nabla(t, variances).value
