"""Truncated multivariate Taylor arithmetic through third order.

A :class:`Jet3` holds, for every entry of a (possibly empty) array shape, the
Taylor coefficients of a smooth function of ``dim`` chart variables around a
base point, up to total degree 3.  Coefficients are stored in "Taylor" form,
``f(x0 + h) = sum_a c_a h^a``, so products are plain truncated convolutions and
the partial derivative with multi-index ``a`` is ``a! * c_a``.

Monomials are ordered by total degree first, so the coefficients valid up to a
lower order always form a prefix of the coefficient axis.  Each jet carries the
``order`` up to which its coefficients are exact; differentiating lowers it by
one and every binary operation takes the minimum of its operands.
"""

from __future__ import annotations

import itertools
import math
import string
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

MAX_ORDER = 3
MAX_DIM = 16
PIVOT_THRESHOLD = 1e-12


class JetError(ValueError):
    """Invalid jet operation (dimension mismatch, bad index)."""


class JetDomainError(JetError):
    """Elementary function evaluated outside its domain."""


class SingularMatrixError(JetError):
    """A pivot fell below the singularity threshold during factorization."""


@dataclass(frozen=True)
class _Table:
    dim: int
    monomials: tuple[tuple[int, ...], ...]
    degree: np.ndarray
    factorial: np.ndarray
    size: tuple[int, ...]  # number of monomials of degree <= o, o = 0..3
    pair_i: tuple[np.ndarray, ...]
    pair_j: tuple[np.ndarray, ...]
    starts: tuple[np.ndarray, ...]
    shift: np.ndarray  # shift[v, m] = index of monomial m + e_v (or -1)
    shift_factor: np.ndarray  # exponent of v in m + e_v
    dense_index: tuple[np.ndarray, ...]  # per derivative order k: (dim,)*k -> monomial


@lru_cache(maxsize=None)
def table(dim: int) -> _Table:
    """Return the shared read-only multiplication/derivative table for ``dim``."""
    if not 1 <= dim <= MAX_DIM:
        raise JetError(f"jet dimension must be in 1..{MAX_DIM}, got {dim}")
    monos: list[tuple[int, ...]] = []
    for deg in range(MAX_ORDER + 1):
        block = []
        for combo in itertools.combinations_with_replacement(range(dim), deg):
            e = [0] * dim
            for v in combo:
                e[v] += 1
            block.append(tuple(e))
        block.sort(reverse=True)
        monos.extend(block)
    index = {m: k for k, m in enumerate(monos)}
    degree = np.array([sum(m) for m in monos])
    factorial = np.array([math.prod(math.factorial(a) for a in m) for m in monos], dtype=float)
    size = tuple(int(np.sum(degree <= o)) for o in range(MAX_ORDER + 1))

    pairs = []
    for ka, ma in enumerate(monos):
        for kb, mb in enumerate(monos):
            if degree[ka] + degree[kb] > MAX_ORDER:
                continue
            k = index[tuple(x + y for x, y in zip(ma, mb))]
            pairs.append((k, ka, kb))
    pairs.sort()
    pk = np.array([p[0] for p in pairs])
    pi = np.array([p[1] for p in pairs])
    pj = np.array([p[2] for p in pairs])
    pair_i, pair_j, starts = [], [], []
    for o in range(MAX_ORDER + 1):
        n = int(np.sum(pk < size[o]))
        pair_i.append(pi[:n])
        pair_j.append(pj[:n])
        starts.append(np.searchsorted(pk[:n], np.arange(size[o])))

    shift = -np.ones((dim, len(monos)), dtype=int)
    shift_factor = np.zeros((dim, len(monos)))
    for v in range(dim):
        for k, m in enumerate(monos):
            if degree[k] < MAX_ORDER:
                up = list(m)
                up[v] += 1
                shift[v, k] = index[tuple(up)]
                shift_factor[v, k] = up[v]

    dense = []
    for k in range(MAX_ORDER + 1):
        idx = np.zeros((dim,) * k, dtype=int)
        for combo in itertools.product(range(dim), repeat=k):
            e = [0] * dim
            for v in combo:
                e[v] += 1
            idx[combo] = index[tuple(e)]
        dense.append(idx)
    return _Table(
        dim, tuple(monos), degree, factorial, size,
        tuple(pair_i), tuple(pair_j), tuple(starts), shift, shift_factor, tuple(dense),
    )


def n_coeffs(dim: int, order: int = MAX_ORDER) -> int:
    """Number of monomials of total degree <= order, i.e. C(dim + order, order)."""
    return math.comb(dim + order, order)


def _mul_coeffs(tab: _Table, a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    prod = a[..., tab.pair_i[order]] * b[..., tab.pair_j[order]]
    return np.add.reduceat(prod, tab.starts[order], axis=-1)


class Jet3:
    """Array of order-3 jets in ``dim`` variables.

    ``coeffs`` has shape ``(*shape, C(dim + order, order))``.  Instances are
    treated as immutable.
    """

    __slots__ = ("coeffs", "dim", "order")
    __array_priority__ = 1000

    def __init__(self, coeffs, dim: int, order: int = MAX_ORDER):
        coeffs = np.asarray(coeffs, dtype=float)
        if not 0 <= order <= MAX_ORDER:
            raise JetError(f"order must be in 0..{MAX_ORDER}")
        tab = table(dim)
        if coeffs.shape[-1:] != (tab.size[order],):
            raise JetError(
                f"coefficient axis has length {coeffs.shape[-1:]}, expected {tab.size[order]}"
            )
        self.coeffs = coeffs
        self.dim = dim
        self.order = order

    # construction -----------------------------------------------------------------
    @classmethod
    def constant(cls, value, dim: int, order: int = MAX_ORDER) -> Jet3:
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (table(dim).size[order],))
        c[..., 0] = value
        return cls(c, dim, order)

    @classmethod
    def zeros(cls, shape, dim: int, order: int = MAX_ORDER) -> Jet3:
        return cls(np.zeros(tuple(shape) + (table(dim).size[order],)), dim, order)

    # inspection ---------------------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.coeffs.ndim - 1

    @property
    def value(self) -> np.ndarray | float:
        v = self.coeffs[..., 0]
        return float(v) if v.ndim == 0 else v.copy()

    def partial(self, *variables: int):
        """Partial derivative d^k f / dx_{v1}...dx_{vk} at the base point."""
        if len(variables) > self.order:
            raise JetError(f"derivative of order {len(variables)} exceeds jet order {self.order}")
        tab = table(self.dim)
        e = [0] * self.dim
        for v in variables:
            if not 0 <= v < self.dim:
                raise JetError(f"variable index {v} out of range for dim {self.dim}")
            e[v] += 1
        k = tab.monomials.index(tuple(e))
        out = self.coeffs[..., k] * tab.factorial[k]
        return float(out) if out.ndim == 0 else out

    def derivatives(self, k: int) -> np.ndarray:
        """All k-th partial derivatives, shape ``(*shape, dim, ..., dim)``."""
        if k > self.order:
            raise JetError(f"derivative of order {k} exceeds jet order {self.order}")
        tab = table(self.dim)
        idx = tab.dense_index[k]
        return self.coeffs[..., idx] * tab.factorial[idx]

    def __repr__(self) -> str:
        return f"Jet3(shape={self.shape}, dim={self.dim}, order={self.order})"

    # structural -----------------------------------------------------------------------
    def truncate(self, order: int) -> Jet3:
        if order > self.order:
            raise JetError("cannot raise the order of a jet")
        return Jet3(self.coeffs[..., : table(self.dim).size[order]], self.dim, order)

    def __getitem__(self, idx) -> Jet3:
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet3(self.coeffs[idx + (slice(None),)], self.dim, self.order)

    def __len__(self) -> int:
        return self.shape[0]

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    def transpose(self, *axes) -> Jet3:
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return Jet3(self.coeffs.transpose(tuple(axes) + (self.ndim,)), self.dim, self.order)

    @property
    def T(self) -> Jet3:
        return self.transpose()

    def reshape(self, *shape) -> Jet3:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Jet3(self.coeffs.reshape(tuple(shape) + (self.coeffs.shape[-1],)), self.dim, self.order)

    def sum(self, axis=None) -> Jet3:
        if axis is None:
            axis = tuple(range(self.ndim))
        axes = (axis,) if isinstance(axis, (int, np.integer)) else tuple(axis)
        axes = tuple(int(a) % self.ndim for a in axes)
        return Jet3(self.coeffs.sum(axis=axes), self.dim, self.order)

    # calculus ------------------------------------------------------------------------
    def d(self, variable: int) -> Jet3:
        """Partial derivative along one chart variable; order drops by one."""
        if self.order == 0:
            raise JetError("cannot differentiate an order-0 jet")
        if not 0 <= variable < self.dim:
            raise JetError(f"variable index {variable} out of range for dim {self.dim}")
        tab = table(self.dim)
        n = tab.size[self.order - 1]
        src = tab.shift[variable, :n]
        return Jet3(self.coeffs[..., src] * tab.shift_factor[variable, :n], self.dim, self.order - 1)

    def grad(self, variables=None) -> Jet3:
        """Stack of partials along ``variables``; the derivative index is placed first."""
        if variables is None:
            variables = range(self.dim)
        parts = [self.d(v).coeffs for v in variables]
        return Jet3(np.stack(parts, axis=0), self.dim, self.order - 1)

    # arithmetic ------------------------------------------------------------------------
    def _coerce(self, other) -> Jet3:
        if isinstance(other, Jet3):
            if other.dim != self.dim:
                raise JetError(f"dimension mismatch: {self.dim} vs {other.dim}")
            return other
        return Jet3.constant(other, self.dim, MAX_ORDER)

    def _aligned(self, other: Jet3) -> tuple[np.ndarray, np.ndarray, int]:
        order = min(self.order, other.order)
        n = table(self.dim).size[order]
        return self.coeffs[..., :n], other.coeffs[..., :n], order

    def __add__(self, other) -> Jet3:
        if not isinstance(other, Jet3):
            c = self.coeffs.copy() if np.ndim(other) == 0 else np.broadcast_to(
                self.coeffs, np.broadcast_shapes(self.shape, np.shape(other)) + self.coeffs.shape[-1:]
            ).copy()
            c[..., 0] += other
            return Jet3(c, self.dim, self.order)
        a, b, order = self._aligned(self._coerce(other))
        return Jet3(a + b, self.dim, order)

    __radd__ = __add__

    def __neg__(self) -> Jet3:
        return Jet3(-self.coeffs, self.dim, self.order)

    def __pos__(self) -> Jet3:
        return self

    def __sub__(self, other) -> Jet3:
        return self + (-other)

    def __rsub__(self, other) -> Jet3:
        return (-self) + other

    def __mul__(self, other) -> Jet3:
        if not isinstance(other, Jet3):
            return Jet3(self.coeffs * np.asarray(other, dtype=float)[..., None], self.dim, self.order)
        a, b, order = self._aligned(self._coerce(other))
        return Jet3(_mul_coeffs(table(self.dim), a, b, order), self.dim, order)

    __rmul__ = __mul__

    def __truediv__(self, other) -> Jet3:
        if not isinstance(other, Jet3):
            return Jet3(self.coeffs / np.asarray(other, dtype=float)[..., None], self.dim, self.order)
        return self * reciprocal(other)

    def __rtruediv__(self, other) -> Jet3:
        return reciprocal(self) * other

    def __pow__(self, n) -> Jet3:
        if isinstance(n, (int, np.integer)):
            return pow_int(self, int(n))
        raise JetError("only integer powers are supported; use exp/log for real exponents")


# ----------------------------------------------------------------------------------------
# construction helpers


def seed_variable(i: int, x0: float, dim: int) -> Jet3:
    """Coordinate jet: value ``x0``, unit first derivative along variable ``i``."""
    if not 0 <= i < dim:
        raise JetError(f"variable index {i} out of range for dim {dim}")
    c = np.zeros(table(dim).size[MAX_ORDER])
    c[0] = x0
    c[1 + i] = 1.0
    return Jet3(c, dim)


def seed_point(point, dim: int | None = None, offset: int = 0) -> list[Jet3]:
    """Coordinate jets for ``point`` using variables ``offset .. offset+len(point)-1``."""
    point = [float(v) for v in point]
    dim = len(point) if dim is None else dim
    if offset + len(point) > dim:
        raise JetError("seeded variables exceed the jet dimension")
    return [seed_variable(offset + k, v, dim) for k, v in enumerate(point)]


def stack(jets, axis: int = 0) -> Jet3:
    jets = list(jets)
    if not jets:
        raise JetError("cannot stack an empty sequence")
    dim = jets[0].dim
    order = min(j.order for j in jets)
    n = table(dim).size[order]
    for j in jets:
        if j.dim != dim:
            raise JetError("dimension mismatch in stack")
    ndim = jets[0].ndim
    axis = axis if axis >= 0 else axis + ndim + 1
    return Jet3(np.stack([j.coeffs[..., :n] for j in jets], axis=axis), dim, order)


def array(nested, dim: int) -> Jet3:
    """Build a jet array from a nested list of jets and plain numbers."""
    if isinstance(nested, Jet3):
        return nested
    if isinstance(nested, (list, tuple)):
        return stack([array(x, dim) for x in nested], axis=0)
    return Jet3.constant(nested, dim)


def as_jet(x, dim: int) -> Jet3:
    return x if isinstance(x, Jet3) else Jet3.constant(x, dim)


def arith(a: Jet3, b: Jet3, kind: str) -> Jet3:
    """Binary operation by name: add, sub, mul or div."""
    if isinstance(a, Jet3) and isinstance(b, Jet3) and a.dim != b.dim:
        raise JetError(f"dimension mismatch: {a.dim} vs {b.dim}")
    ops = {"add": a.__add__, "sub": a.__sub__, "mul": a.__mul__, "div": a.__truediv__}
    try:
        return ops[kind](b)
    except KeyError:
        raise JetError(f"unknown arithmetic kind {kind!r}") from None


# ----------------------------------------------------------------------------------------
# contractions


def einsum(subscripts: str, *operands) -> Jet3 | np.ndarray:
    """Einstein summation over the array axes of one or two jet operands.

    Plain numpy operands are treated as exact constants.
    """
    inputs, output = subscripts.replace(" ", "").split("->")
    terms = inputs.split(",")
    if len(terms) != len(operands) or len(terms) not in (1, 2):
        raise JetError("einsum supports one or two operands")
    used = set(subscripts)
    z = next(ch for ch in string.ascii_letters if ch not in used)
    jets = [op for op in operands if isinstance(op, Jet3)]
    if not jets:
        return np.einsum(subscripts, *operands)
    dim = jets[0].dim
    if any(j.dim != dim for j in jets):
        raise JetError("dimension mismatch in einsum")
    if len(operands) == 1:
        a = operands[0]
        return Jet3(np.einsum(f"{terms[0]}{z}->{output}{z}", a.coeffs), dim, a.order)
    a, b = operands
    if not isinstance(a, Jet3) or not isinstance(b, Jet3):
        jet, const = (a, b) if isinstance(a, Jet3) else (b, a)
        tj, tc = (terms[0], terms[1]) if isinstance(a, Jet3) else (terms[1], terms[0])
        c = np.einsum(f"{tj}{z},{tc}->{output}{z}", jet.coeffs, np.asarray(const, dtype=float))
        return Jet3(c, dim, jet.order)
    order = min(a.order, b.order)
    tab = table(dim)
    ca = a.coeffs[..., tab.pair_i[order]]
    cb = b.coeffs[..., tab.pair_j[order]]
    prod = np.einsum(f"{terms[0]}{z},{terms[1]}{z}->{output}{z}", ca, cb)
    return Jet3(np.add.reduceat(prod, tab.starts[order], axis=-1), dim, order)


def lu_solve_checked(matrix: np.ndarray, rhs: np.ndarray, threshold: float = PIVOT_THRESHOLD) -> np.ndarray:
    """Solve ``matrix @ X = rhs`` by partially pivoted elimination with a pivot floor."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)  # singularity is reported below
        lu, piv = scipy.linalg.lu_factor(matrix, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < threshold:
        raise SingularMatrixError(f"pivot {pivots.min():.3e} below threshold {threshold:.1e}")
    return scipy.linalg.lu_solve((lu, piv), rhs)


def inv(m: Jet3, threshold: float = PIVOT_THRESHOLD) -> Jet3:
    """Inverse of a square jet matrix (last two axes), by Newton iteration."""
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise JetError(f"inv needs a square matrix, got shape {m.shape}")
    n = m.shape[0]
    v = lu_solve_checked(m.value, np.eye(n), threshold)
    x = Jet3.constant(v, m.dim, m.order)
    two = 2.0 * np.eye(n)
    # each step doubles the lowest degree of the residual: 1 -> 2 -> 4 > 3
    for _ in range(2):
        x = einsum("ij,jk->ik", x, two - einsum("ij,jk->ik", m, x))
    return x


# ----------------------------------------------------------------------------------------
# elementary functions


def _compose(a: Jet3, derivs) -> Jet3:
    """f(a) from f and its first three derivatives at a.value (Faa di Bruno)."""
    f0, f1, f2, f3 = (np.asarray(f, dtype=float) for f in derivs)
    h = Jet3(a.coeffs.copy(), a.dim, a.order)
    h.coeffs[..., 0] = 0.0
    out = Jet3.constant(f0, a.dim, a.order)
    if a.order == 0:
        return out
    out = out + h * f1
    if a.order >= 2:
        h2 = h * h
        out = out + h2 * (f2 / 2.0)
        if a.order >= 3:
            out = out + (h2 * h) * (f3 / 6.0)
    return out


def sqrt(a: Jet3) -> Jet3:
    v = np.asarray(a.value)
    if np.any(v <= 0):
        raise JetDomainError("sqrt requires a strictly positive value")
    s = np.sqrt(v)
    return _compose(a, (s, 0.5 / s, -0.25 / (v * s), 0.375 / (v * v * s)))


def exp(a: Jet3) -> Jet3:
    e = np.exp(a.value)
    return _compose(a, (e, e, e, e))


def log(a: Jet3) -> Jet3:
    v = np.asarray(a.value)
    if np.any(v <= 0):
        raise JetDomainError("log requires a strictly positive value")
    return _compose(a, (np.log(v), 1 / v, -1 / v**2, 2 / v**3))


def sin(a: Jet3) -> Jet3:
    s, c = np.sin(a.value), np.cos(a.value)
    return _compose(a, (s, c, -s, -c))


def cos(a: Jet3) -> Jet3:
    s, c = np.sin(a.value), np.cos(a.value)
    return _compose(a, (c, -s, -c, s))


def atan(a: Jet3) -> Jet3:
    v = np.asarray(a.value)
    q = 1.0 + v * v
    return _compose(a, (np.arctan(v), 1 / q, -2 * v / q**2, (6 * v * v - 2) / q**3))


def reciprocal(a: Jet3) -> Jet3:
    v = np.asarray(a.value)
    if np.any(v == 0):
        raise JetDomainError("division by a jet with zero value")
    return _compose(a, (1 / v, -1 / v**2, 2 / v**3, -6 / v**4))


def pow_int(a: Jet3, n: int) -> Jet3:
    v = np.asarray(a.value)
    if n < 0 and np.any(v == 0):
        raise JetDomainError("negative power of a jet with zero value")
    derivs = []
    falling = 1.0
    for k in range(4):
        derivs.append(falling * v ** (n - k) if falling != 0 else np.zeros_like(v))
        falling *= n - k
    return _compose(a, derivs)


_ELEMENTARY = {
    "sqrt": sqrt, "exp": exp, "log": log, "sin": sin, "cos": cos,
    "atan": atan, "reciprocal": reciprocal,
}


def elementary(a: Jet3, f: str, n: int | None = None) -> Jet3:
    """Apply an elementary function by name; ``pow_int`` takes the exponent ``n``."""
    if f == "pow_int":
        if n is None:
            raise JetError("pow_int needs an integer exponent")
        return pow_int(a, n)
    try:
        return _ELEMENTARY[f](a)
    except KeyError:
        raise JetError(f"unknown elementary function {f!r}") from None
