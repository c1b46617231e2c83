"""Block vectors over a primal space and weighted dual blocks.

The solver state lives in H x G_1 x ... x G_m, where H and the G_i are
real coordinate spaces.  Each dual block G_i carries a weight
w_i in ]0, 1] (the weights sum to one).  The weights enter the inner
product of the product space, not the stored data: user-facing per-block
reporting uses plain Euclidean norms, while solver-internal metrics use
the weighted ones defined here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ShapeMismatchError",
    "SpaceLayout",
    "BlockVector",
    "inner_weighted",
    "norm_weighted",
    "axpy_blocks",
    "zeros",
]

WEIGHT_SUM_TOL = 1e-12


class ShapeMismatchError(ValueError):
    """Block shapes disagree.  ``block`` names the offending component."""

    def __init__(self, block, expected, got):
        self.block = block
        self.expected = tuple(expected)
        self.got = tuple(got)
        super().__init__(
            f"shape mismatch in block '{block}': expected shape "
            f"{self.expected}, got {self.got}"
        )


@dataclass(frozen=True)
class SpaceLayout:
    """Dimensions of H and the G_i, plus the dual-block weights."""

    dim_primal: int
    dual_dims: tuple[int, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "dual_dims", tuple(int(d) for d in self.dual_dims))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.dim_primal < 1:
            raise ValueError("dim_primal must be a positive integer")
        if len(self.dual_dims) < 1:
            raise ValueError("at least one dual block is required")
        if len(self.weights) != len(self.dual_dims):
            raise ValueError("weights and dual_dims must have equal length")
        if any(d < 1 for d in self.dual_dims):
            raise ValueError("every dual dimension must be a positive integer")
        if any(not 0.0 < w <= 1.0 for w in self.weights):
            raise ValueError("every weight must lie in ]0, 1]")
        if abs(math.fsum(self.weights) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(
                f"weights must sum to 1 within {WEIGHT_SUM_TOL:g} "
                f"(got {math.fsum(self.weights)!r})"
            )

    @property
    def num_blocks(self) -> int:
        return len(self.dual_dims)


@dataclass(frozen=True)
class BlockVector:
    """One primal vector plus m dual block vectors.

    Instances are treated as immutable: operations return fresh vectors
    and never write into the stored arrays.
    """

    primal: np.ndarray
    duals: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "primal", np.asarray(self.primal, dtype=float))
        object.__setattr__(
            self, "duals", tuple(np.asarray(d, dtype=float) for d in self.duals)
        )

    def all_finite(self) -> bool:
        if not np.isfinite(self.primal).all():
            return False
        return all(np.isfinite(d).all() for d in self.duals)


def zeros(layout: SpaceLayout) -> BlockVector:
    """Zero element of the product space described by ``layout``."""
    return BlockVector(
        np.zeros(layout.dim_primal), tuple(np.zeros(d) for d in layout.dual_dims)
    )


def _require_layout(vec: BlockVector, layout: SpaceLayout, name: str) -> None:
    if vec.primal.shape != (layout.dim_primal,):
        raise ShapeMismatchError(
            f"{name}.primal", (layout.dim_primal,), vec.primal.shape
        )
    if len(vec.duals) != layout.num_blocks:
        raise ShapeMismatchError(
            f"{name}.duals", (layout.num_blocks,), (len(vec.duals),)
        )
    for i, (d, n) in enumerate(zip(vec.duals, layout.dual_dims)):
        if d.shape != (n,):
            raise ShapeMismatchError(f"{name}.dual[{i}]", (n,), d.shape)


def inner_weighted(a: BlockVector, b: BlockVector, layout: SpaceLayout) -> float:
    """Weighted inner product <a.primal, b.primal> + sum_i w_i <a_i, b_i>."""
    _require_layout(a, layout, "a")
    _require_layout(b, layout, "b")
    s = float(np.dot(a.primal, b.primal))
    for w, da, db in zip(layout.weights, a.duals, b.duals):
        s += w * float(np.dot(da, db))
    return s


def norm_weighted(a: BlockVector, layout: SpaceLayout) -> float:
    """Norm induced by :func:`inner_weighted`."""
    return math.sqrt(max(inner_weighted(a, a, layout), 0.0))


def axpy_blocks(alpha: float, a: BlockVector, b: BlockVector) -> BlockVector:
    """Return ``b + alpha * a`` blockwise."""
    if a.primal.shape != b.primal.shape:
        raise ShapeMismatchError("a.primal", b.primal.shape, a.primal.shape)
    if len(a.duals) != len(b.duals):
        raise ShapeMismatchError("a.duals", (len(b.duals),), (len(a.duals),))
    duals = []
    for i, (da, db) in enumerate(zip(a.duals, b.duals)):
        if da.shape != db.shape:
            raise ShapeMismatchError(f"a.dual[{i}]", db.shape, da.shape)
        duals.append(db + alpha * da)
    return BlockVector(b.primal + alpha * a.primal, tuple(duals))
