"""Dense component tensors at a point.

Slot order is kept literally as written in the formulas (``C_{IJKL}`` is stored
with axes I, J, K, L).  Brackets use the pairwise 1/2 normalization:
``t_[IJ] = (t_IJ - t_JI)/2`` and ``t_(IJ) = (t_IJ + t_JI)/2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .jet import PIVOT_THRESHOLD, lu_solve_checked

UP, DOWN = "up", "down"
BLOCKS = ("total", "external", "internal", "algebra")


class TensorError(ValueError):
    pass


@dataclass(frozen=True)
class DenseTensor:
    comps: np.ndarray
    variance: tuple[str, ...]
    block: tuple[str, ...] = field(default=())

    def __post_init__(self):
        comps = np.asarray(self.comps, dtype=float)
        object.__setattr__(self, "comps", comps)
        object.__setattr__(self, "variance", tuple(self.variance))
        block = tuple(self.block) or ("total",) * comps.ndim
        object.__setattr__(self, "block", block)
        if len(self.variance) != comps.ndim or len(block) != comps.ndim:
            raise TensorError("variance/block labels must match the tensor rank")
        if any(v not in (UP, DOWN) for v in self.variance):
            raise TensorError(f"bad variance labels {self.variance}")
        if any(b not in BLOCKS for b in block):
            raise TensorError(f"bad block labels {block}")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.comps.shape

    @property
    def rank(self) -> int:
        return self.comps.ndim


def _blocks_compatible(a: str, b: str) -> bool:
    return a == b or "total" in (a, b)


def contract(t: DenseTensor, slot_up: int, slot_down: int) -> DenseTensor | float:
    """Trace over one up slot and one down slot."""
    if slot_up == slot_down:
        raise TensorError("cannot contract a slot with itself")
    if t.variance[slot_up] != UP or t.variance[slot_down] != DOWN:
        raise TensorError("contraction needs one up slot and one down slot")
    if t.dims[slot_up] != t.dims[slot_down]:
        raise TensorError("contracted slots have different dimensions")
    if not _blocks_compatible(t.block[slot_up], t.block[slot_down]):
        raise TensorError(f"cannot contract {t.block[slot_up]} with {t.block[slot_down]} slot")
    comps = np.trace(t.comps, axis1=slot_up, axis2=slot_down)
    keep = [k for k in range(t.rank) if k not in (slot_up, slot_down)]
    if not keep:
        return float(comps)
    return DenseTensor(comps, [t.variance[k] for k in keep], [t.block[k] for k in keep])


def raise_lower(
    t: DenseTensor,
    slot: int,
    metric,
    inverse_metric=None,
    threshold: float = PIVOT_THRESHOLD,
) -> DenseTensor:
    """Flip the variance of ``slot`` using the metric (lowering) or its inverse (raising)."""
    g = metric.comps if isinstance(metric, DenseTensor) else np.asarray(metric, dtype=float)
    n = t.dims[slot]
    if g.shape != (n, n):
        raise TensorError(f"metric shape {g.shape} does not match slot dimension {n}")
    if np.max(np.abs(g - g.T)) > 1e-14 * max(1.0, np.max(np.abs(g))):
        raise TensorError("metric is not symmetric")
    if t.variance[slot] == DOWN:
        if inverse_metric is None:
            gi = lu_solve_checked(g, np.eye(n), threshold)
        else:
            gi = inverse_metric.comps if isinstance(inverse_metric, DenseTensor) else np.asarray(inverse_metric)
        m, new = gi, UP
    else:
        lu_solve_checked(g, np.eye(n), threshold)
        m, new = g, DOWN
    comps = np.moveaxis(np.tensordot(m, t.comps, axes=([1], [slot])), 0, slot)
    variance = list(t.variance)
    variance[slot] = new
    return DenseTensor(comps, variance, t.block)


def brackets(t: DenseTensor, slots: tuple[int, int], kind: str) -> DenseTensor:
    """Antisymmetrize (``antisym``) or symmetrize (``sym``) over a pair of slots."""
    i, j = slots
    if i == j or t.dims[i] != t.dims[j] or t.variance[i] != t.variance[j]:
        raise TensorError("bracketed slots must be distinct with equal dims and variance")
    if kind == "antisym":
        comps = antisym(t.comps, i, j)
    elif kind == "sym":
        comps = sym(t.comps, i, j)
    else:
        raise TensorError(f"unknown bracket kind {kind!r}")
    return DenseTensor(comps, t.variance, t.block)


def antisym(a, i: int, j: int):
    """``(a - swap(a, i, j)) / 2`` on a numpy array or jet array."""
    return (a - a.swapaxes(i, j)) * 0.5 if isinstance(a, np.ndarray) else (a - _swap(a, i, j)) * 0.5


def sym(a, i: int, j: int):
    return (a + a.swapaxes(i, j)) * 0.5 if isinstance(a, np.ndarray) else (a + _swap(a, i, j)) * 0.5


def _swap(a, i, j):
    axes = list(range(a.ndim))
    axes[i], axes[j] = axes[j], axes[i]
    return a.transpose(axes)
