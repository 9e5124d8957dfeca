"""Catalog of charts, Killing frames and gauge fields.

Shipped geometries:

* constant-curvature spaces (flat, sphere, hyperbolic) in stereographic /
  Poincare-ball or hyperspherical charts;
* the round 3-sphere with its left-invariant orthonormal Killing frame;
* the d = 4 quaternionic space form (a round 4-sphere in a stereographic chart)
  with a constant 't Hooft-symbol triple and the one-instanton connection;
* the trivial solution (A = 0, maximally symmetric factors);
* seeded random Kaluza-Klein data for two-path checks of the reduction formulas.

The quaternionic model is calibrated numerically at construction time: the
symbol family, the sign of the triple and the connection one-forms are picked
by least squares against the quaternionic algebra and the parallelism
condition, never transcribed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import jet as J
from .geom import PAPER, Box, Geometry, MetricField, convention_sign, covariant_derivative
from .jet import Jet3
from .kk import FrameField, GaugeField, KKSpec, gauge_curvature
from .rng import Xorshift64Star

FLAT, SPHERE, HYPERBOLIC = "flat", "sphere", "hyperbolic"
STEREOGRAPHIC, HYPERSPHERICAL = "stereographic", "hyperspherical"


class ModelError(ValueError):
    pass


def levi_civita3() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for (i, j, k) in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k] = 1.0
        eps[j, i, k] = -1.0
    return eps


def thooft_symbols(self_dual: bool = True) -> np.ndarray:
    """``eta[a, mu, nu]``: the (anti-)self-dual 't Hooft symbols, last coordinate as the 4th axis."""
    eps = levi_civita3()
    eta = np.zeros((3, 4, 4))
    s = 1.0 if self_dual else -1.0
    for a in range(3):
        eta[a, :3, :3] = eps[a]
        eta[a, a, 3] = s
        eta[a, 3, a] = -s
    return eta


@dataclass(frozen=True)
class ModelDescriptor:
    name: str
    params: dict = field(default_factory=dict)
    provides: frozenset = frozenset()


# ------------------------------------------------------------------------------------
# constant curvature


def _radius(dim: int, scalar_magnitude: float) -> float:
    return math.sqrt(dim * (dim - 1) / scalar_magnitude)


def _conformal_metric(dim, factor):
    def evaluate(coords):
        r2 = sum(x * x for x in coords)
        om = factor(r2)
        zero = om * 0.0
        return [[om if i == j else zero for j in range(dim)] for i in range(dim)]
    return evaluate


def constant_curvature_space(
    dim: int,
    scalar_magnitude: float,
    kind: str,
    chart: str = STEREOGRAPHIC,
) -> MetricField:
    """Flat space, sphere or hyperbolic space with ``|R| = scalar_magnitude``.

    Stereographic charts use unit-scaled coordinates in ``[-1, 1]^dim`` (the
    Poincare ball, of radius 0.9, for hyperbolic space).
    """
    if dim < 1:
        raise ModelError("dimension must be positive")
    if scalar_magnitude < 0 or not math.isfinite(scalar_magnitude):
        raise ModelError(f"scalar magnitude must be a finite number >= 0, got {scalar_magnitude}")
    if chart not in (STEREOGRAPHIC, HYPERSPHERICAL):
        raise ModelError(f"unknown chart {chart!r}")
    if kind == FLAT:
        if scalar_magnitude != 0:
            raise ModelError("flat space has zero scalar curvature")
        eye = np.eye(dim)
        return MetricField(dim, lambda coords: Jet3.constant(eye, coords[0].dim), Box.cube(dim, 1.0),
                           (1,) * dim, name=f"flat{dim}")
    if kind not in (SPHERE, HYPERBOLIC):
        raise ModelError(f"unknown kind {kind!r}")
    if dim < 2:
        raise ModelError("curved constant-curvature spaces need dim >= 2")
    if scalar_magnitude == 0:
        raise ModelError(f"{kind} needs a positive scalar magnitude")
    r = _radius(dim, scalar_magnitude)
    name = f"{kind}{dim}(r={r:.6g})"
    if chart == STEREOGRAPHIC:
        if kind == SPHERE:
            ev = _conformal_metric(dim, lambda r2: 4.0 * r * r / (1.0 + r2) ** 2)
            return MetricField(dim, ev, Box.cube(dim, 1.0), (1,) * dim, name=name)
        ev = _conformal_metric(dim, lambda r2: 4.0 * r * r / (1.0 - r2) ** 2)
        return MetricField(dim, ev, Box.cube(dim, 0.9 / math.sqrt(dim)), (1,) * dim, name=name)

    warp = J.sin if kind == SPHERE else _sinh

    def evaluate(coords):
        diag = [Jet3.constant(r * r, coords[0].dim)]
        w = r * r
        for k in range(1, dim):
            s = warp(coords[0]) if k == 1 else J.sin(coords[k - 1])
            w = w * s * s
            diag.append(w)
        zero = diag[0] * 0.0
        return [[diag[i] if i == j else zero for j in range(dim)] for i in range(dim)]

    hi = [math.pi if kind == SPHERE else 2.0] + [math.pi] * (dim - 2) + [2 * math.pi]
    lo = [0.0] * dim
    if dim == 2:
        hi = [hi[0], 2 * math.pi]
    return MetricField(dim, evaluate, Box(tuple(lo), tuple(hi[:dim])), (1,) * dim, name=name)


def _sinh(a: Jet3) -> Jet3:
    e = J.exp(a)
    return (e - J.reciprocal(e)) * 0.5


# ------------------------------------------------------------------------------------
# the round 3-sphere and its Killing parallelization


def _quat_mul(p, q):
    p0, p1, p2, p3 = p
    q0, q1, q2, q3 = q
    return (
        p0 * q0 - p1 * q1 - p2 * q2 - p3 * q3,
        p0 * q1 + p1 * q0 + p2 * q3 - p3 * q2,
        p0 * q2 - p1 * q3 + p2 * q0 + p3 * q1,
        p0 * q3 + p1 * q2 - p2 * q1 + p3 * q0,
    )


def s3_metric(radius: float = 1.0) -> MetricField:
    if radius <= 0:
        raise ModelError("radius must be positive")
    return constant_curvature_space(3, 6.0 / radius**2, SPHERE, STEREOGRAPHIC)


def _s3_frame_rows(coords, r: float, side: str):
    y2 = sum(y * y for y in coords)
    inv = J.reciprocal(1.0 + y2)
    q = [(1.0 - y2) * inv * r] + [y * inv * (2.0 * r) for y in coords]
    den = J.reciprocal(q[0] + r)
    rows = []
    for e in _QUAT_UNITS:
        v = _quat_mul(q, e) if side == "left" else _quat_mul(e, q)
        # y^i = q^i / (r + q^0) pushed forward
        rows.append([(v[i + 1] * den - q[i + 1] * v[0] * den * den) * (1.0 / r) for i in range(3)])
    return rows


_QUAT_UNITS = [(0.0, 1.0, 0.0, 0.0), (0.0, 0.0, 1.0, 0.0), (0.0, 0.0, 0.0, 1.0)]


def s3_killing_frame(radius: float = 1.0, side: str = "left") -> FrameField:
    """Orthonormal frame ``K_a(q) = q e_a / r`` (``side="left"``) or ``e_a q / r`` in the
    stereographic chart.

    Left-invariant fields close as ``[K_a, K_b] = (2/r) eps_abc K_c``; right-invariant
    ones with the opposite sign.  Both are Killing for the round metric; only the
    right-invariant ones stay Killing for the squashed metric of :func:`berger_s3_metric`.
    """
    if radius <= 0:
        raise ModelError("radius must be positive")
    if side not in ("left", "right"):
        raise ModelError(f"side must be 'left' or 'right', got {side!r}")
    r = float(radius)
    return FrameField(3, 3, lambda coords: _s3_frame_rows(coords, r, side), name=f"s3-frame(r={r:.6g},{side})")


def berger_s3_metric(squash: Sequence[float]) -> MetricField:
    """Left-invariant metric ``sum_a squash_a theta^a theta^a`` on the unit 3-sphere."""
    lam = np.asarray(squash, dtype=float)
    if lam.shape != (3,) or np.any(lam <= 0):
        raise ModelError("squash needs three positive factors")

    def evaluate(coords):
        L = J.array(_s3_frame_rows(coords, 1.0, "left"), coords[0].dim)  # (a, i)
        kinv = J.einsum("ai,aj->ij", L * (1.0 / lam)[:, None], L)
        return J.inv(kinv)

    return MetricField(3, evaluate, Box.cube(3, 1.0), (1, 1, 1), name=f"berger-s3{tuple(lam.tolist())}")


def s2_rotation_frame() -> FrameField:
    """The three rotation fields ``e_a x p`` of the unit 2-sphere, stereographic chart."""

    def evaluate(coords):
        y2 = coords[0] * coords[0] + coords[1] * coords[1]
        inv = J.reciprocal(1.0 + y2)
        p = [coords[0] * inv * 2.0, coords[1] * inv * 2.0, (1.0 - y2) * inv]
        den = J.reciprocal(1.0 + p[2])
        rows = []
        for a in range(3):
            e = [0.0, 0.0, 0.0]
            e[a] = 1.0
            v = [e[1] * p[2] - e[2] * p[1], e[2] * p[0] - e[0] * p[2], e[0] * p[1] - e[1] * p[0]]
            rows.append([v[i] * den - p[i] * v[2] * den * den for i in range(2)])
        return rows

    return FrameField(3, 2, evaluate, name="s2-rotations")


def s3_structure_constants(radius: float = 1.0) -> np.ndarray:
    return (2.0 / radius) * levi_civita3()


# ------------------------------------------------------------------------------------
# the quaternionic space form


@dataclass(frozen=True)
class QKStructure:
    """Metric, mixed triple ``J[a, mu, nu] = J^a_mu^nu``, one-forms ``theta[a, mu]`` and ``k``."""

    g: MetricField
    J: object  # callable coords -> Jet3 (3, 4, 4)
    theta: object  # callable coords -> Jet3 (3, 4)
    k: float
    calibration: dict


def _space_form_metric(k: float, scale: float) -> MetricField:
    s2 = scale * scale
    ev = _conformal_metric(4, lambda r2: (4.0 * s2 / k) / (1.0 + s2 * r2) ** 2)
    return MetricField(4, ev, Box.cube(4, 1.0), (1, 1, 1, 1), name=f"quaternionic-space-form(k={k:.6g})")


def _theta_profile(eta: np.ndarray, scale: float):
    """Unit-coefficient ansatz ``eta^a_{mu nu} x^nu s^2 / (1 + s^2 |x|^2)`` for the one-forms."""
    s2 = scale * scale

    def evaluate(coords):
        dim = coords[0].dim
        x = J.stack(coords)
        r2 = sum(c * c for c in coords)
        return J.einsum("amn,n->am", eta, x) * J.reciprocal(1.0 + s2 * r2) * s2 if dim else None
    return evaluate


_CALIBRATION_POINT = (0.31, -0.17, 0.23, 0.11)


TRIPLE_ORIENTATIONS = ("gauge", "algebra")


@lru_cache(maxsize=None)
def _calibrate_space_form(k: float, scale: float, triple: str = "gauge") -> tuple:
    """Pick the symbol family, triple sign and one-form coefficient.

    The one-form coefficient comes from least squares on the parallelism
    condition ``nabla J^a = eps_bca theta^b J^c`` at a probe point.  The overall
    sign of the triple is not fixed by parallelism; ``triple`` selects it:

    * ``gauge``: ``J_{mu nu} = (d theta - eps theta theta) / k``, the orientation
      of ``F / sqrt(F2 / cd)`` for the instanton; the commutator then closes
      with ``-2 eps``;
    * ``algebra``: ``[J^a, J^b] = +2 eps_abc J^c``; the reconstruction from the
      one-forms then carries ``-1/k``.
    """
    if triple not in TRIPLE_ORIENTATIONS:
        raise ModelError(f"unknown triple orientation {triple!r}")
    g = _space_form_metric(k, scale)
    p = np.array(_CALIBRATION_POINT)
    eps = levi_civita3()
    geo = Geometry(g.jet(p))
    best = None
    for self_dual in (True, False):
        eta = thooft_symbols(self_dual)
        for sign in (1.0, -1.0):
            Jm = sign * eta
            prod = np.einsum("amk,bkn->abmn", Jm, Jm)
            clifford = np.abs(prod + prod.transpose(1, 0, 2, 3)
                              + 2 * np.einsum("ab,mn->abmn", np.eye(3), np.eye(4))).max()
            alg = np.abs(prod - prod.transpose(1, 0, 2, 3) - 2 * np.einsum("abc,cmn->abmn", eps, Jm)).max()
            nab = covariant_derivative(Jet3.constant(Jm, 4), ("down", "down", "up"), geo.christoffel,
                                       range(4), slots=[1, 2]).value  # [kappa, a, mu, nu]
            basis = np.einsum("bca,cmn->bamn", eps, Jm).reshape(3, -1)
            profile = _theta_profile(eta, scale)(J.seed_point(p)).value  # [b, kappa]
            model = np.einsum("bk,bx->kx", profile, basis).ravel()
            target = nab.reshape(4, -1).ravel()
            gamma = float(model @ target / (model @ model))
            par = float(np.abs(gamma * model - target).max())
            th = J.array(_theta_profile(eta, scale)(J.seed_point(p)), 4) * gamma
            curl = gauge_curvature(th, eps, range(4)).value  # d theta - eps theta theta
            j_low = np.einsum("amk,kn->amn", Jm, g.values(p))
            recon = float(np.abs(curl / k - j_low).max())
            score = clifford + par + (recon if triple == "gauge" else alg)
            cand = (score, self_dual, sign, gamma,
                    {"clifford": clifford, "parallel": par, "reconstruction": recon, "commutator": alg})
            if best is None or cand[0] < best[0]:
                best = cand
    if best is None or best[0] > 1e-9:
        raise ModelError(f"quaternionic space form calibration failed: {best}")
    return best[1:]


def quaternionic_space_form(k: float, chart_scale: float = 1.0, d: int = 4,
                            triple: str = "gauge") -> QKStructure:
    """HP^1-type space form of quaternionic sectional curvature ``k`` (a round 4-sphere)."""
    if d != 4:
        raise ModelError("only the d = 4 quaternionic space form is shipped")
    if not k > 0:
        raise ModelError("k must be positive")
    if not chart_scale > 0:
        raise ModelError("chart scale must be positive")
    self_dual, sign, gamma, resid = _calibrate_space_form(float(k), float(chart_scale), triple)
    eta = thooft_symbols(self_dual)
    Jm = sign * eta
    profile = _theta_profile(eta, chart_scale)

    def J_field(coords):
        return Jet3.constant(Jm, coords[0].dim)

    def theta(coords):
        return J.array(profile(coords), coords[0].dim) * gamma

    calib = {"triple": triple, "self_dual": self_dual, "triple_sign": sign, "theta_coefficient": gamma, **resid}
    return QKStructure(_space_form_metric(k, chart_scale), J_field, theta, float(k), calib)


THETA_RADICALS = {
    "sqrt(2|R_in|/3)": lambda r: math.sqrt(2 * r / 3),
    "sqrt(2|R_in|/2)": lambda r: math.sqrt(2 * r / 2),
}


@lru_cache(maxsize=None)
def calibrate_theta_radical(k: float, R_in_magnitude: float, chart_scale: float = 1.0) -> dict:
    """Decide which radical relates the one-forms to the gauge potential.

    For each candidate ``beta`` the potential ``A = theta / beta`` is paired with
    structure constants ``sqrt(2|R_in|/3) eps`` and the field strength is
    tested for proportionality to the triple.
    """
    qk = quaternionic_space_form(k, chart_scale)
    p = np.array(_CALIBRATION_POINT)
    sc = math.sqrt(2 * R_in_magnitude / 3) * levi_civita3()
    Jm = qk.J(J.seed_point(p)).value
    j_low = np.einsum("amk,kn->amn", Jm, qk.g.values(p))
    out = {}
    for name, radical in THETA_RADICALS.items():
        beta = radical(R_in_magnitude)
        A = qk.theta(J.seed_point(p)) * (1.0 / beta)
        F = gauge_curvature(A, sc, range(4)).value
        ratio = float(np.sum(F * j_low) / np.sum(j_low * j_low))
        out[name] = float(np.abs(F - ratio * j_low).max())
    out["selected"] = min(THETA_RADICALS, key=lambda n: out[n])
    return out


def instanton_gauge_field(k: float, R_in_magnitude: float, chart_scale: float = 1.0,
                          rtol: float = 1e-12) -> GaugeField:
    """One-instanton potential on the quaternionic space-form chart, ``A = theta / beta``."""
    if abs(k - 2 * R_in_magnitude / 3) > rtol * max(1.0, abs(k)):
        raise ModelError(f"instanton needs k = 2|R_in|/3, got k={k}, |R_in|={R_in_magnitude}")
    qk = quaternionic_space_form(k, chart_scale)
    choice = calibrate_theta_radical(float(k), float(R_in_magnitude), float(chart_scale))
    beta = THETA_RADICALS[choice["selected"]](R_in_magnitude)

    def evaluate(coords):
        return qk.theta(coords) * (1.0 / beta)

    return GaugeField(3, 4, evaluate, name=f"instanton(k={k:.6g})")


def hopf_instanton_spec(k: float = 4.0, detune_internal_radius: float = 1.0,
                        chart_scale: float = 1.0) -> KKSpec:
    """Quaternionic space form + round S^3 frame + instanton (round S^7 for k = 4).

    ``detune_internal_radius`` rescales the internal sphere (and its frame) while
    keeping the external data and the gauge potential fixed.
    """
    R_in = 3.0 * k / 2.0
    radius = math.sqrt(6.0 / R_in) * detune_internal_radius
    qk = quaternionic_space_form(k, chart_scale)
    name = "hopf-instanton" if detune_internal_radius == 1.0 else f"hopf-instanton(detuned x{detune_internal_radius:g})"
    return KKSpec(qk.g, s3_metric(radius), s3_killing_frame(radius),
                  instanton_gauge_field(k, R_in, chart_scale), s3_structure_constants(radius), name=name,
                  branch="instanton")


# ------------------------------------------------------------------------------------
# trivial solution and generic data


def _zero_gauge(n: int, d: int) -> GaugeField:
    return GaugeField(n, d, lambda coords: Jet3.zeros((n, d), coords[0].dim), name="zero")


def flat_translations(c: int) -> FrameField:
    eye = np.eye(c)
    return FrameField(c, c, lambda coords: Jet3.constant(eye, coords[0].dim), name=f"translations{c}")


def trivial_solution_spec(d: int, c: int, R_in: float, convention: str = PAPER) -> KKSpec:
    """A = 0 with maximally symmetric factors obeying c(c-1) R_ex + d(d-1) R_in = 0.

    ``R_in`` is signed in ``convention``; for c = 3 it must describe a sphere.
    """
    if d < 2:
        raise ModelError("the external space needs d >= 2")
    sign = convention_sign(convention)
    if c == 1:
        if R_in != 0:
            raise ModelError("a one-dimensional internal space has R_in = 0")
        return KKSpec(constant_curvature_space(d, 0.0, FLAT), constant_curvature_space(1, 0.0, FLAT),
                      flat_translations(1), _zero_gauge(1, d), np.zeros((1, 1, 1)), name=f"trivial(d={d},c=1)",
                      branch="trivial")
    if c != 3:
        raise ModelError("shipped Killing frames cover c in {1, 3}")
    if R_in == 0 or R_in * sign > 0:
        raise ModelError("c = 3 trivial solutions use an internal sphere; R_in has the wrong sign")
    mag_in = abs(R_in)
    radius = math.sqrt(6.0 / mag_in)
    mag_ex = d * (d - 1) * mag_in / (c * (c - 1))
    external = constant_curvature_space(d, mag_ex, HYPERBOLIC)
    return KKSpec(external, s3_metric(radius), s3_killing_frame(radius), _zero_gauge(3, d),
                  s3_structure_constants(radius), name=f"trivial(d={d},c=3,|R_in|={mag_in:g})",
                  branch="trivial")


def _polynomial_symmetric(base, linear, quadratic, eps):
    """``base + eps * (L x + x Q x)`` symmetrized over the two matrix axes."""
    def evaluate(coords):
        dim = coords[0].dim
        x = J.stack(coords)
        h = J.einsum("abk,k->ab", linear, x) + J.einsum("abl,l->ab", J.einsum("abkl,k->abl", quadratic, x), x)
        return Jet3.constant(base, dim) + (h + h.T) * (0.5 * eps)
    return evaluate


RANDOM_INTERNALS = ("s3", "berger", "s2")


def random_spec(seed: int, d: int = 4, internal: str = "s3", eps: float = 0.05) -> KKSpec:
    """Generic KK data: ``g = delta + eps * (degree <= 2 symmetric perturbation)`` and a
    degree <= 2 polynomial potential over one of three internal spaces.

    * ``s3``: unit round 3-sphere with its left-invariant orthonormal frame;
    * ``berger``: seeded squashing of the unit 3-sphere with the right-invariant frame
      (so ``F^2`` and the internal traces vary over the fibre);
    * ``s2``: unit 2-sphere with its three rotation fields (``n = 3 > c = 2``).
    """
    if internal not in RANDOM_INTERNALS:
        raise ModelError(f"internal must be one of {RANDOM_INTERNALS}, got {internal!r}")
    if d < 2:
        raise ModelError("random specs need d >= 2")
    rng = Xorshift64Star(seed)
    lin = rng.uniform(-1, 1, (d, d, d))
    quad = rng.uniform(-1, 1, (d, d, d, d))
    a0 = rng.uniform(-1, 1, (3, d))
    a1 = rng.uniform(-1, 1, (3, d, d))
    a2 = rng.uniform(-1, 1, (3, d, d, d))
    external = MetricField(d, _polynomial_symmetric(np.eye(d), lin, quad, eps), Box.cube(d, 1.0),
                           (1,) * d, name=f"random-external(seed={seed})")
    if internal == "s3":
        metric, frame, sc = s3_metric(1.0), s3_killing_frame(1.0), s3_structure_constants(1.0)
    elif internal == "berger":
        squash = 0.6 + 0.8 * rng.uniform(0, 1, (3,))
        metric, frame, sc = berger_s3_metric(squash), s3_killing_frame(1.0, "right"), -2.0 * levi_civita3()
    else:
        metric = constant_curvature_space(2, 2.0, SPHERE, STEREOGRAPHIC)
        frame, sc = s2_rotation_frame(), -levi_civita3()

    def gauge(coords):
        dim = coords[0].dim
        x = J.stack(coords)
        quad_term = J.einsum("amn,n->am", J.einsum("amnl,l->amn", a2, x), x)
        return Jet3.constant(a0 * 0.5, dim) + J.einsum("amn,n->am", a1 * 0.5, x) + quad_term * 0.5

    return KKSpec(external, metric, frame, GaugeField(3, d, gauge, name="random-gauge"), sc,
                  name=f"random(seed={seed},d={d},internal={internal})")
