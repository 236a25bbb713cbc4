"""Alternative spaces: where the objects of choice live.

Points are plain ``numpy`` arrays.  A single point has shape ``(d,)``; a batch
has shape ``(m, d)``.  Real-line points are stored with ``d = 1``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ContractViolation

SIMPLEX_TOL = 1e-12
_MAX_LEVEL = 30


class SpaceKind(str, enum.Enum):
    SIMPLEX = "simplex"
    INTERIOR_SIMPLEX = "interior_simplex"
    POSITIVE_ORTHANT = "positive_orthant"
    DATED_REWARD = "dated_reward"
    REAL_LINE = "real_line"


_BOX_KINDS = (SpaceKind.POSITIVE_ORTHANT, SpaceKind.DATED_REWARD, SpaceKind.REAL_LINE)


def compositions(total: int, parts: int, minimum: int = 0) -> np.ndarray:
    """All integer vectors of length ``parts`` with entries >= minimum summing to ``total``.

    Rows come out in lexicographic order.
    """
    free = total - minimum * parts
    if free < 0:
        return np.zeros((0, parts), dtype=np.int64)
    rows = []
    # stars and bars over the free mass
    for bars in itertools.combinations(range(free + parts - 1), parts - 1):
        prev = -1
        row = []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(free + parts - 1 - prev - 1)
        rows.append(row)
    out = np.array(rows, dtype=np.int64) + minimum
    # combinations() yields reverse-lex order on the first part
    order = np.lexsort(out.T[::-1])
    return out[order]


@dataclass(frozen=True)
class AlternativeSpace:
    """A set of alternatives together with a compact sampling support.

    Simplex kinds sample uniformly on the (interior) simplex.  Box kinds
    (positive orthant, dated rewards, real line) sample uniformly on the box
    ``[lo, hi]^d`` given by ``support``.
    """

    kind: SpaceKind
    dim: int
    support: tuple[tuple[float, ...], tuple[float, ...]] | None = field(default=None)

    def __post_init__(self) -> None:
        kind = SpaceKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (SpaceKind.SIMPLEX, SpaceKind.INTERIOR_SIMPLEX, SpaceKind.POSITIVE_ORTHANT):
            if self.dim < 2:
                raise ContractViolation(f"{kind.value} needs dim >= 2, got {self.dim}")
        elif kind is SpaceKind.DATED_REWARD and self.dim != 2:
            raise ContractViolation("dated_reward space is two dimensional")
        elif kind is SpaceKind.REAL_LINE and self.dim != 1:
            raise ContractViolation("real_line space is one dimensional")
        if kind in _BOX_KINDS:
            if self.support is None:
                raise ContractViolation(f"{kind.value} needs a compact support box")
            lo = tuple(float(v) for v in np.broadcast_to(self.support[0], (self.dim,)))
            hi = tuple(float(v) for v in np.broadcast_to(self.support[1], (self.dim,)))
            if any(h <= l for l, h in zip(lo, hi)):
                raise ContractViolation("degenerate support box")
            if kind is not SpaceKind.REAL_LINE and min(lo) <= 0:
                raise ContractViolation(f"{kind.value} support must lie in the open orthant")
            object.__setattr__(self, "support", (lo, hi))
        elif self.support is not None:
            raise ContractViolation("simplex spaces take no support box")

    # -- constructors -------------------------------------------------------
    @classmethod
    def simplex(cls, d: int) -> AlternativeSpace:
        return cls(SpaceKind.SIMPLEX, d)

    @classmethod
    def interior_simplex(cls, d: int) -> AlternativeSpace:
        return cls(SpaceKind.INTERIOR_SIMPLEX, d)

    @classmethod
    def positive_orthant(cls, d: int, lo: float = 0.25, hi: float = 2.0) -> AlternativeSpace:
        return cls(SpaceKind.POSITIVE_ORTHANT, d, ((lo,) * d, (hi,) * d))

    @classmethod
    def dated_reward(cls, lo: float = 0.25, hi: float = 2.0) -> AlternativeSpace:
        return cls(SpaceKind.DATED_REWARD, 2, ((lo, lo), (hi, hi)))

    @classmethod
    def real_line(cls, lo: float = -1.0, hi: float = 1.0) -> AlternativeSpace:
        return cls(SpaceKind.REAL_LINE, 1, ((lo,), (hi,)))

    # -- geometry -----------------------------------------------------------
    @property
    def is_simplex(self) -> bool:
        return self.kind in (SpaceKind.SIMPLEX, SpaceKind.INTERIOR_SIMPLEX)

    @property
    def box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.is_simplex:
            return np.zeros(self.dim), np.ones(self.dim)
        return np.asarray(self.support[0]), np.asarray(self.support[1])

    @property
    def diameter(self) -> float:
        if self.is_simplex:
            return float(np.sqrt(2.0))
        lo, hi = self.box
        return float(np.linalg.norm(hi - lo))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of rows that are valid points of this space."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            return np.zeros(pts.shape[0], dtype=bool)
        finite = np.all(np.isfinite(pts), axis=1)
        if self.kind is SpaceKind.SIMPLEX:
            ok = np.all(pts >= 0.0, axis=1) & (np.abs(pts.sum(axis=1) - 1.0) <= SIMPLEX_TOL)
        elif self.kind is SpaceKind.INTERIOR_SIMPLEX:
            ok = np.all(pts > 0.0, axis=1) & (np.abs(pts.sum(axis=1) - 1.0) <= SIMPLEX_TOL)
        elif self.kind is SpaceKind.REAL_LINE:
            ok = np.ones(pts.shape[0], dtype=bool)
        else:
            ok = np.all(pts > 0.0, axis=1)
        return finite & ok

    def in_support(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ok = self.contains(pts)
        if not self.is_simplex:
            lo, hi = self.box
            ok &= np.all((pts >= lo) & (pts <= hi), axis=1)
        return ok

    def validate(self, points: np.ndarray, what: str = "points") -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        batch = np.atleast_2d(pts)
        if batch.ndim != 2 or batch.shape[1] != self.dim:
            raise ContractViolation(
                f"{what}: expected dimension {self.dim} for {self.kind.value}, got shape {pts.shape}"
            )
        bad = ~self.contains(batch)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise ContractViolation(f"{what}: row {row} is not a point of {self.kind.value}: {batch[row]}")
        return pts

    def tangent_directions(self) -> np.ndarray:
        """Unit directions along which points can move while staying in the affine hull.

        One direction per coordinate; ``2 * dim`` probe offsets come from +/- each row.
        """
        eye = np.eye(self.dim)
        if not self.is_simplex:
            return eye
        dirs = eye - 1.0 / self.dim
        return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)

    # -- sampling -----------------------------------------------------------
    @property
    def uniforms_per_point(self) -> int:
        return self.dim

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        """Map an ``(m, dim)`` block of uniforms on [0, 1) to uniform points of the support."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if self.is_simplex:
            # normalized exponential spacings give the flat Dirichlet(1, ..., 1)
            e = -np.log1p(-u)
            e = np.maximum(e, np.finfo(float).tiny)
            pts = e / e.sum(axis=1, keepdims=True)
            # renormalize once more so the row sum is 1 to the last ulp where possible
            return pts / pts.sum(axis=1, keepdims=True)
        lo, hi = self.box
        return lo + (hi - lo) * u

    # -- dense enumeration --------------------------------------------------
    def dyadic_level(self, level: int) -> np.ndarray:
        """Dyadic lattice of resolution ``2**-level`` (nested in ``level``)."""
        return _dyadic_level(self, level)

    def dyadic_new_points(self, level: int) -> np.ndarray:
        """Points first appearing at ``level``, in lexicographic order."""
        return _dyadic_new(self, level)


def _lattice_ints(space: AlternativeSpace, level: int) -> np.ndarray:
    n = 2 ** level
    if space.kind is SpaceKind.SIMPLEX:
        return compositions(n, space.dim)
    if space.kind is SpaceKind.INTERIOR_SIMPLEX:
        return compositions(n, space.dim, minimum=1)
    axes = [np.arange(n + 1)] * space.dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1).astype(np.int64)


def _ints_to_points(space: AlternativeSpace, ints: np.ndarray, level: int) -> np.ndarray:
    n = float(2 ** level)
    if space.is_simplex:
        return ints.astype(float) / n
    lo, hi = space.box
    return lo + (hi - lo) * (ints.astype(float) / n)


@lru_cache(maxsize=256)
def _dyadic_level(space: AlternativeSpace, level: int) -> np.ndarray:
    if level < 0 or level > _MAX_LEVEL:
        raise ContractViolation(f"dyadic level must be in [0, {_MAX_LEVEL}]")
    pts = _ints_to_points(space, _lattice_ints(space, level), level)
    pts.setflags(write=False)
    return pts


@lru_cache(maxsize=256)
def _dyadic_new(space: AlternativeSpace, level: int) -> np.ndarray:
    ints = _lattice_ints(space, level)
    if level == 0:
        fresh = ints
    else:
        # a lattice point is old iff all numerators are even (it sits on the coarser lattice);
        # for the interior simplex the coarser lattice also needs positive parts, which halving keeps
        fresh = ints[np.any(ints % 2 == 1, axis=1)]
    pts = _ints_to_points(space, fresh, level)
    pts.setflags(write=False)
    return pts


@lru_cache(maxsize=64)
def _helmert(d: int) -> np.ndarray:
    cols = []
    for k in range(1, d):
        c = np.zeros(d)
        c[:k] = 1.0
        c[k] = -float(k)
        cols.append(c / np.sqrt(k * (k + 1.0)))
    basis = np.stack(cols, axis=1)
    basis.setflags(write=False)
    return basis


def sum_zero_basis(d: int) -> np.ndarray:
    """Orthonormal ``(d, d-1)`` basis of the hyperplane ``{u : sum(u) = 0}`` (Helmert columns)."""
    if d < 2:
        raise ContractViolation("sum-zero subspace needs d >= 2")
    return _helmert(d)
