"""Non-Abelian Kaluza-Klein metrics and the lower-dimensional fields they carry.

Index layout used throughout:

* ``K[a, i] = K^i_a`` (Killing frame), ``A[a, mu] = A^a_mu`` (gauge potential)
* ``structure_constants[b, c, a] = c_{bc}^a`` with ``[K_b, K_c] = c_{bc}^a K_a``
* ``F[a, mu, nu] = d_mu A^a_nu - d_nu A^a_mu - c_{bc}^a A^b_mu A^c_nu``

All lower-dimensional quantities at a :class:`KKPoint` are jets in the full
``D = d + c`` chart variables (external first), so mixed derivatives such as
``d_mu d_i d_j`` of the assembled metric are available to every formula.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import jet as J
from .geom import PAPER, Box, Geometry, GeometryError, MetricField, covariant_derivative
from .jet import Jet3


class KKError(ValueError):
    pass


@dataclass(frozen=True)
class FrameField:
    """``n`` vector fields on a ``dim``-dimensional chart; ``evaluate`` returns ``(n, dim)``."""

    n: int
    dim: int
    evaluate: Callable[[list[Jet3]], object]
    name: str = "frame"


@dataclass(frozen=True)
class GaugeField:
    """Lie-algebra valued one-form; ``evaluate`` returns ``(n, dim)`` with ``[a, mu] = A^a_mu``."""

    n: int
    dim: int
    evaluate: Callable[[list[Jet3]], object]
    name: str = "gauge"


@dataclass(frozen=True)
class KKPoint:
    x: tuple[float, ...]
    y: tuple[float, ...]

    @property
    def coords(self) -> np.ndarray:
        return np.array(tuple(self.x) + tuple(self.y), dtype=float)


@dataclass(frozen=True)
class KKSpec:
    external: MetricField
    internal: MetricField
    killing: FrameField
    gauge: GaugeField
    structure_constants: np.ndarray
    name: str = "custom"
    branch: str | None = None  # "trivial" / "instanton" when the data claim to solve the flatness system

    @property
    def d(self) -> int:
        return self.external.dim

    @property
    def c(self) -> int:
        return self.internal.dim

    @property
    def n(self) -> int:
        return self.killing.n

    @property
    def D(self) -> int:
        return self.d + self.c

    @property
    def domain(self) -> Box:
        return Box(self.external.domain.lo + self.internal.domain.lo,
                   self.external.domain.hi + self.internal.domain.hi)

    def check_shapes(self) -> None:
        sc = np.asarray(self.structure_constants, dtype=float)
        if self.killing.dim != self.c:
            raise KKError(f"Killing frame lives in {self.killing.dim} dims, internal space has {self.c}")
        if self.gauge.dim != self.d:
            raise KKError(f"gauge field lives in {self.gauge.dim} dims, external space has {self.d}")
        if self.gauge.n != self.n:
            raise KKError(f"gauge field has {self.gauge.n} components, frame has {self.n} fields")
        if sc.shape != (self.n,) * 3:
            raise KKError(f"structure constants have shape {sc.shape}, expected {(self.n,) * 3}")

    def point(self, coords) -> KKPoint:
        coords = np.asarray(coords, dtype=float)
        return KKPoint(tuple(coords[: self.d]), tuple(coords[self.d:]))

    def sample_points(self, uniforms: np.ndarray) -> list[KKPoint]:
        """Points of the chart box (shrunk 5% per side) from rows of uniforms."""
        return [self.point(self.domain.sample(u)) for u in np.atleast_2d(uniforms)]


# ------------------------------------------------------------------------------------
# algebra checks


def jacobi_residual(sc: np.ndarray) -> float:
    """max |c_{ab}^e c_{ec}^f + cyclic|."""
    sc = np.asarray(sc, dtype=float)
    t = np.einsum("abe,ecf->abcf", sc, sc)
    cyc = t + t.transpose(1, 2, 0, 3) + t.transpose(2, 0, 1, 3)
    return float(np.abs(cyc).max()) if cyc.size else 0.0


def antisymmetry_residual(sc: np.ndarray) -> float:
    sc = np.asarray(sc, dtype=float)
    return float(np.abs(sc + sc.transpose(1, 0, 2)).max()) if sc.size else 0.0


def _block(rows) -> Jet3:
    dim = rows[0][0].dim
    order = min(b.order for row in rows for b in row)
    n = J.table(dim).size[order]
    return Jet3(np.concatenate([np.concatenate([b.coeffs[..., :n] for b in row], axis=1) for row in rows],
                               axis=0), dim, order)


def frame_jets(spec: KKSpec, y, jet_dim: int | None = None, offset: int = 0) -> Jet3:
    jet_dim = spec.c if jet_dim is None else jet_dim
    k = J.array(spec.killing.evaluate(J.seed_point(y, jet_dim, offset)), jet_dim)
    if k.shape != (spec.n, spec.c):
        raise KKError(f"Killing frame evaluated to shape {k.shape}")
    return k


def gauge_jets(spec: KKSpec, x, jet_dim: int | None = None, offset: int = 0) -> Jet3:
    jet_dim = spec.d if jet_dim is None else jet_dim
    a = J.array(spec.gauge.evaluate(J.seed_point(x, jet_dim, offset)), jet_dim)
    if a.shape != (spec.n, spec.d):
        raise KKError(f"gauge field evaluated to shape {a.shape}")
    return a


def killing_residual(kappa: Jet3, K: Jet3) -> np.ndarray:
    """``(L_{K_a} kappa)_{ij}`` at the base point, shape ``(n, c, c)``."""
    dk = kappa.grad()  # [m, i, j]
    dK = K.grad()  # [m, a, k]
    lie = (J.einsum("ak,kij->aij", K, dk)
           + J.einsum("iak,kj->aij", dK, kappa)
           + J.einsum("jak,ik->aij", dK, kappa))
    return lie.value


def commutator_residual(K: Jet3, sc: np.ndarray) -> np.ndarray:
    """``[K_a, K_b]^i - c_{ab}^e K^i_e`` at the base point, shape ``(n, n, c)``."""
    dK = K.grad()  # [j, b, i]
    t = J.einsum("aj,jbi->abi", K, dK)
    closure = J.einsum("abe,ei->abi", np.asarray(sc, dtype=float), K)
    return (t - t.transpose(1, 0, 2) - closure).value


@dataclass
class ValidationReport:
    killing: float
    commutator: float
    antisymmetry: float
    jacobi: float

    def ok(self, tol: float = 1e-10) -> bool:
        return max(self.killing, self.commutator, self.antisymmetry, self.jacobi) <= tol


def validate(spec: KKSpec, internal_points: Sequence, tol: float = 1e-10, raise_on_fail: bool = True) -> ValidationReport:
    """Killing property, commutator closure and Lie-algebra axioms at sampled internal points."""
    spec.check_shapes()
    kill = comm = 0.0
    for y in internal_points:
        kappa = spec.internal.jet(y)
        K = frame_jets(spec, y)
        kill = max(kill, float(np.abs(killing_residual(kappa, K)).max()))
        comm = max(comm, float(np.abs(commutator_residual(K, spec.structure_constants)).max()))
    report = ValidationReport(kill, comm, antisymmetry_residual(spec.structure_constants),
                              jacobi_residual(spec.structure_constants))
    if raise_on_fail and not report.ok(tol):
        raise KKError(f"{spec.name}: KK data fails validation: {report}")
    return report


# ------------------------------------------------------------------------------------
# assembly


def assemble_jets(g: Jet3, kappa: Jet3, K: Jet3, A: Jet3) -> Jet3:
    """The D x D Kaluza-Klein metric from lower-dimensional jets (common jet space)."""
    ai = J.einsum("am,ak->mk", A, K)  # A^k_mu
    off = J.einsum("mk,kj->mj", ai, kappa)  # A^k_mu kappa_kj
    top = g + J.einsum("mk,nk->mn", off, ai)
    return _block([[top, off], [off.T, kappa]])


def assemble_metric(spec: KKSpec) -> MetricField:
    spec.check_shapes()
    d, D = spec.d, spec.D

    def evaluate(coords):
        x, y = coords[:d], coords[d:]
        dim = coords[0].dim
        g = J.array(spec.external.evaluate(x), dim)
        kappa = J.array(spec.internal.evaluate(y), dim)
        K = J.array(spec.killing.evaluate(y), dim)
        A = J.array(spec.gauge.evaluate(x), dim)
        return assemble_jets(g, kappa, K, A)

    sig = tuple(spec.external.signature) + tuple(spec.internal.signature)
    return MetricField(D, evaluate, spec.domain, sig, name=f"{spec.name}:assembled")


def gauge_curvature(A: Jet3, sc: np.ndarray, variables: Sequence[int]) -> Jet3:
    """``F[a, mu, nu]`` from a gauge-potential jet whose external coordinates are ``variables``."""
    dA = A.grad(variables)  # [l, a, m] = d_l A^a_m
    curl = dA.transpose(1, 0, 2) - dA.transpose(1, 2, 0)
    ab = J.einsum("bm,cn->bcmn", A, A)
    return curl - J.einsum("bca,bcmn->amn", np.asarray(sc, dtype=float), ab)


def gauge_curvature_at(spec: KKSpec, x, y=None) -> tuple[np.ndarray, np.ndarray | None]:
    """``F^a_{mu nu}`` at x and, when ``y`` is given, ``F^i_{mu nu} = K^i_a F^a_{mu nu}``."""
    A = gauge_jets(spec, x)
    F = gauge_curvature(A, spec.structure_constants, range(spec.d)).value
    if y is None:
        return F, None
    K = frame_jets(spec, y).value
    return F, np.einsum("ai,amn->imn", K, F)


def project_components(t: np.ndarray, ginv: np.ndarray, d: int, pattern: Sequence[str]) -> np.ndarray:
    """Raise ``external_up`` slots with the full inverse metric and restrict every slot to its block.

    Pattern entries: ``external_up``, ``internal_down`` (also accepted:
    ``external_down``, ``internal_up``).
    """
    t = np.asarray(t, dtype=float)
    if len(pattern) != t.ndim:
        raise KKError("pattern must assign every slot")
    out = t
    for s, kind in enumerate(pattern):
        block, var = kind.split("_")
        if var == "up":
            out = np.moveaxis(np.tensordot(ginv, out, axes=([1], [s])), 0, s)
        elif var != "down":
            raise KKError(f"bad pattern entry {kind!r}")
        sl = slice(0, d) if block == "external" else slice(d, None)
        if block not in ("external", "internal"):
            raise KKError(f"bad pattern entry {kind!r}")
        idx = [slice(None)] * out.ndim
        idx[s] = sl
        out = out[tuple(idx)]
    return out


class KKFields:
    """Every lower-dimensional ingredient of the reduction formulas at one point.

    Jets live in the ``D`` chart variables (external first).  ``ext`` and
    ``int`` are the curvature stacks of ``g`` and ``kappa``.
    """

    def __init__(self, spec: KKSpec, point: KKPoint, convention: str = PAPER):
        spec.check_shapes()
        self.spec = spec
        self.point = point
        self.convention = convention
        d, c, D = spec.d, spec.c, spec.D
        self.d, self.c, self.D = d, c, D
        self.ext_vars = tuple(range(d))
        self.int_vars = tuple(range(d, D))
        coords = J.seed_point(point.coords, D)
        x, y = coords[:d], coords[d:]
        if not spec.external.domain.contains(point.x) or not spec.internal.domain.contains(point.y):
            raise GeometryError(f"{spec.name}: point outside the chart domain")
        self.g = J.array(spec.external.evaluate(x), D)
        self.kappa = J.array(spec.internal.evaluate(y), D)
        self.K = J.array(spec.killing.evaluate(y), D)
        self.A = J.array(spec.gauge.evaluate(x), D)
        self.sc = np.asarray(spec.structure_constants, dtype=float)
        self.ext = Geometry(self.g, self.ext_vars, convention)
        self.int = Geometry(self.kappa, self.int_vars, convention)

    # metrics -------------------------------------------------------------------------
    @property
    def gi(self) -> Jet3:
        return self.ext.ginv

    @property
    def ki(self) -> Jet3:
        return self.int.ginv

    @cached_property
    def full_metric(self) -> Jet3:
        return assemble_jets(self.g, self.kappa, self.K, self.A)

    @cached_property
    def full(self) -> Geometry:
        return Geometry(self.full_metric, range(self.D), self.convention)

    @cached_property
    def gbar(self) -> Jet3:
        """``g_ab = K^i_a K^j_b kappa_ij``."""
        return J.einsum("ai,bi->ab", self.K, J.einsum("bj,ij->bi", self.K, self.kappa))

    # gauge fields --------------------------------------------------------------------
    @cached_property
    def F_alg(self) -> Jet3:
        return gauge_curvature(self.A, self.sc, self.ext_vars)

    @cached_property
    def A_int(self) -> Jet3:
        """``A_int[mu, i] = A^i_mu``."""
        return J.einsum("am,ai->mi", self.A, self.K)

    @cached_property
    def F_up(self) -> Jet3:
        """``F^i_{mu nu}``, axes (i, mu, nu)."""
        return J.einsum("ai,amn->imn", self.K, self.F_alg)

    @cached_property
    def F_low(self) -> Jet3:
        """``F_{i mu nu} = kappa_ij F^j_{mu nu}``."""
        return J.einsum("ij,jmn->imn", self.kappa, self.F_up)

    def raise_ext(self, t: Jet3, slots: Sequence[int]) -> Jet3:
        """Raise the listed external slots with ``g^{mu nu}``."""
        for s in slots:
            t = J.einsum(_slot_sub(t.ndim, s, "mz", "z"), self.gi, t)
        return t

    def lower_ext(self, t: Jet3, slots: Sequence[int]) -> Jet3:
        for s in slots:
            t = J.einsum(_slot_sub(t.ndim, s, "mz", "z"), self.g, t)
        return t

    def raise_int(self, t: Jet3, slots: Sequence[int]) -> Jet3:
        for s in slots:
            t = J.einsum(_slot_sub(t.ndim, s, "mz", "z"), self.ki, t)
        return t

    def lower_int(self, t: Jet3, slots: Sequence[int]) -> Jet3:
        for s in slots:
            t = J.einsum(_slot_sub(t.ndim, s, "mz", "z"), self.kappa, t)
        return t

    @cached_property
    def F_low_uu(self) -> Jet3:
        """``F_i^{mu nu}``."""
        return self.raise_ext(self.F_low, (1, 2))

    @cached_property
    def F_up_uu(self) -> Jet3:
        """``F^{i mu nu}``."""
        return self.raise_ext(self.F_up, (1, 2))

    @cached_property
    def F2_ext(self) -> Jet3:
        """``F2_{mu nu} = F^k_{mu kappa} F_{k nu}^kappa``."""
        f_mixed = J.einsum("knl,lq->knq", self.F_low, self.gi)  # F_{k nu}^q
        return J.einsum("kmq,knq->mn", self.F_up, f_mixed)

    @cached_property
    def F2_int(self) -> Jet3:
        """``F2_{ij} = F_{i mu nu} F_j^{mu nu}``."""
        return J.einsum("imn,jmn->ij", self.F_low, self.F_low_uu)

    @cached_property
    def F2(self) -> Jet3:
        return J.einsum("imn,imn->", self.F_up, self.F_low_uu)

    @cached_property
    def T_ext(self) -> Jet3:
        return self.F2_ext - self.g * self.F2 * (1.0 / (2 * (self.d - 1)))

    # derivatives -----------------------------------------------------------------------
    @cached_property
    def _dA_int(self) -> Jet3:
        return self.A_int.grad(self.int_vars)  # [j, mu, i] = d_j A^i_mu

    def hat_nabla_parts(self, t: Jet3, kinds: Sequence[str]) -> tuple[Jet3, Jet3]:
        """``(nabla_kappa t, L_{A_kappa} t)``; ``hat-nabla = first - second``.

        ``kinds`` gives, per slot, one of ``ext_up``, ``ext_down``, ``int_up``,
        ``int_down``.  The derivative index is the new first axis.
        """
        variances = [k.split("_")[1] for k in kinds]
        ext_slots = [s for s, k in enumerate(kinds) if k.startswith("ext")]
        cov = covariant_derivative(t, variances, self.ext.christoffel, self.ext_vars, ext_slots)
        rank = t.ndim
        letters = "abcdefgh"[:rank]
        lie = J.einsum(f"zj,j{letters}->z{letters}", self.A_int, t.grad(self.int_vars))
        for s, k in enumerate(kinds):
            if not k.startswith("int"):
                continue
            src = letters[:s] + "y" + letters[s + 1:]
            if k.endswith("down"):
                # + (d_s A^y_z) t_{..y..}
                lie = lie + J.einsum(f"{letters[s]}zy,{src}->z{letters}", self._dA_int, t)
            else:
                # - (d_y A^s_z) t^{..y..}
                lie = lie - J.einsum(f"yz{letters[s]},{src}->z{letters}", self._dA_int, t)
        return cov, lie

    def hat_nabla(self, t: Jet3, kinds: Sequence[str]) -> Jet3:
        """``hat-nabla_kappa t = nabla_kappa t - L_{A_kappa} t`` (derivative index first)."""
        cov, lie = self.hat_nabla_parts(t, kinds)
        return cov - lie

    def int_nabla(self, t: Jet3, kinds: Sequence[str]) -> Jet3:
        """Internal Levi-Civita derivative; external slots are inert."""
        variances = [k.split("_")[1] for k in kinds]
        int_slots = [s for s, k in enumerate(kinds) if k.startswith("int")]
        return covariant_derivative(t, variances, self.int.christoffel, self.int_vars, int_slots)

    def hat_grad_scalar(self, f: Jet3) -> Jet3:
        """``hat-nabla_mu f = d_mu f - A^j_mu d_j f`` for an internal scalar."""
        return f.grad(self.ext_vars) - J.einsum("mj,j->m", self.A_int, f.grad(self.int_vars))

    def int_grad_scalar(self, f: Jet3) -> Jet3:
        return f.grad(self.int_vars)

    # adapted frame -------------------------------------------------------------------
    @cached_property
    def frame(self) -> np.ndarray:
        """Rows ``E_mu = d_mu - A^i_mu d_i`` followed by ``E_i = d_i`` (coordinate components)."""
        E = np.eye(self.D)
        E[: self.d, self.d:] = -self.A_int.value
        return E

    def to_frame(self, t: np.ndarray) -> np.ndarray:
        """All-lower coordinate components to all-lower adapted-frame components."""
        for s in range(t.ndim):
            t = np.moveaxis(np.tensordot(self.frame, t, axes=([1], [s])), 0, s)
        return t

    @cached_property
    def frame_inverse_metric(self) -> np.ndarray:
        """In the adapted frame the metric is ``diag(g, kappa)``."""
        out = np.zeros((self.D, self.D))
        out[: self.d, : self.d] = self.gi.value
        out[self.d:, self.d:] = self.ki.value
        return out


def _slot_sub(rank: int, slot: int, mat: str, contracted: str) -> str:
    """Subscripts applying a matrix ``mat`` (new index first) to one slot of a rank-``rank`` jet."""
    letters = "abcdefgh"[:rank]
    new = mat[0]
    src = letters[:slot] + contracted + letters[slot + 1:]
    dst = letters[:slot] + new + letters[slot + 1:]
    return f"{new}{contracted},{src}->{dst}"
