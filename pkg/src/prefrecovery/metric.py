"""Grid approximations of the closed-convergence (Hausdorff) metric between preferences.

A preference is represented on a finite grid by its relation graph, the set of
index pairs ``(i, j)`` with ``points[i] >= points[j]``.  Each pair embeds in
``R^{2d}`` as the concatenation ``(points[i], points[j])``; distances between
graphs are Hausdorff distances between these embedded sets.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray
from scipy.spatial import cKDTree

from . import rng
from .errors import ContractViolation
from .preferences import PreferenceSpec
from .spaces import AlternativeSpace, SpaceKind, compositions

DEFAULT_M = {2: 15, 3: 8}


@dataclass(frozen=True)
class EvaluationGrid:
    space: AlternativeSpace
    points: tuple[tuple[float, ...], ...]
    analytic_covering_radius: float | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", tuple(tuple(r) for r in pts))
        if pts.shape[0] < 2:
            raise ContractViolation("evaluation grid needs at least two points")
        self.space.validate(pts, "grid points")
        if len(set(self.points)) != len(self.points):
            raise ContractViolation("grid points must be distinct")

    @cached_property
    def array(self) -> NDArray[np.float64]:
        a = np.asarray(self.points, dtype=float)
        a.setflags(write=False)
        return a

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def fingerprint(self) -> str:
        """sha256 of the little-endian float64 coordinates."""
        return hashlib.sha256(np.ascontiguousarray(self.array, dtype="<f8").tobytes()).hexdigest()

    @classmethod
    def lattice(cls, space: AlternativeSpace, m: int | None = None) -> EvaluationGrid:
        """Uniform lattice with ``m`` points per dimension.

        Simplex: compositions of ``m - 1`` (step ``h = 1/(m-1)``).  Interior
        simplex: the same compositions shifted by one unit in every part, so all
        coordinates are positive.  Box spaces: ``linspace(lo, hi, m)`` per axis.
        """
        if m is None:
            m = DEFAULT_M.get(space.dim, 6)
        if m < 2:
            raise ContractViolation("need m >= 2 points per dimension")
        d = space.dim
        radius = None
        if space.kind is SpaceKind.SIMPLEX:
            h = 1.0 / (m - 1)
            pts = compositions(m - 1, d) * h
            if d == 2:
                radius = np.sqrt(2.0) * h / 2.0
            elif d == 3:
                # circumradius of the equilateral cell of side sqrt(2) h
                radius = np.sqrt(2.0) * h / np.sqrt(3.0)
        elif space.kind is SpaceKind.INTERIOR_SIMPLEX:
            pts = (compositions(m - 1, d) + 1.0) / (m - 1 + d)
        else:
            lo, hi = space.box
            axes = [np.linspace(lo[k], hi[k], m) for k in range(d)]
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([g.ravel() for g in mesh], axis=1)
            radius = float(np.linalg.norm((hi - lo) / (m - 1)) / 2.0)
        return cls(space, tuple(map(tuple, pts)), radius)

    def covering_radius(self, samples: int = 20000, seed: int = 0) -> float:
        """Max distance from a support point to its nearest grid point.

        Closed form for simplex lattices with d <= 3 and for box lattices;
        otherwise a sampled estimate (a lower bound of the true radius).
        """
        if self.analytic_covering_radius is not None:
            return float(self.analytic_covering_radius)
        u = rng.uniforms(seed, "covering-radius", samples * self.space.dim)
        probes = self.space.from_uniforms(u.reshape(samples, self.space.dim))
        dist, _ = cKDTree(self.array).query(probes)
        return float(dist.max())


@dataclass(frozen=True, eq=False)
class RelationGraph:
    """Boolean matrix ``matrix[i, j] = points[i] >= points[j]`` over a fixed grid."""

    grid: EvaluationGrid
    matrix: NDArray[np.bool_]

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=bool)
        n = len(self.grid)
        if m.shape != (n, n):
            raise ContractViolation("relation matrix does not match the grid size")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def members(self) -> NDArray[np.int64]:
        """``(k, 2)`` array of member index pairs in row-major order."""
        return np.argwhere(self.matrix)

    def member_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.members}

    def is_complete(self) -> bool:
        return bool(np.all(self.matrix | self.matrix.T))

    def same_as(self, other: RelationGraph) -> bool:
        return self.grid == other.grid and bool(np.array_equal(self.matrix, other.matrix))

    def to_csv(self) -> str:
        lines = [f"# grid_fingerprint={self.grid.fingerprint}", f"# grid_size={len(self.grid)}", "i,j"]
        lines.extend(f"{i},{j}" for i, j in self.members)
        return "\n".join(lines) + "\n"


def relation_graph(p: PreferenceSpec, grid: EvaluationGrid) -> RelationGraph:
    if p.space != grid.space:
        raise ContractViolation("preference and grid live on different spaces")
    return RelationGraph(grid, p.weak_matrix(grid.array, grid.array))


def _embed(grid: EvaluationGrid, mask: NDArray[np.bool_]) -> NDArray[np.float64]:
    idx = np.argwhere(mask)
    pts = grid.array
    return np.concatenate([pts[idx[:, 0]], pts[idx[:, 1]]], axis=1)


def _directed(src: NDArray[np.float64], dst: NDArray[np.float64]) -> float:
    if src.shape[0] == 0:
        return 0.0
    if dst.shape[0] == 0:
        return float("inf")
    dist, _ = cKDTree(dst).query(src)
    return float(dist.max())


def _check_pair(gA: RelationGraph, gB: RelationGraph, grid: EvaluationGrid) -> None:
    if gA.grid != grid or gB.grid != grid:
        raise ContractViolation("relation graphs were built on a different grid")
    if not gA.matrix.any() or not gB.matrix.any():
        raise ContractViolation("empty relation graph")


def hausdorff_distance(gA: RelationGraph, gB: RelationGraph, grid: EvaluationGrid) -> float:
    _check_pair(gA, gB, grid)
    # shared members are at distance 0 from the other set; only the differences matter
    only_a = gA.matrix & ~gB.matrix
    only_b = gB.matrix & ~gA.matrix
    return max(
        _directed(_embed(grid, only_a), _embed(grid, gB.matrix)),
        _directed(_embed(grid, only_b), _embed(grid, gA.matrix)),
    )


def preference_distance(pA: PreferenceSpec, pB: PreferenceSpec, grid: EvaluationGrid) -> float:
    return hausdorff_distance(relation_graph(pA, grid), relation_graph(pB, grid), grid)


def fudged_distance(
    gA: RelationGraph,
    gB: RelationGraph,
    grid: EvaluationGrid,
    K: tuple[NDArray[np.float64], NDArray[np.float64]],
    theta: float,
) -> float:
    """Hausdorff-type distance of each relation restricted to ``K x K`` from the other
    relation restricted to the ``theta``-neighbourhood of ``K x K``; symmetrized by max.
    """
    _check_pair(gA, gB, grid)
    if theta < 0:
        raise ContractViolation("theta must be nonnegative")
    lo = np.broadcast_to(np.asarray(K[0], dtype=float), (grid.space.dim,))
    hi = np.broadcast_to(np.asarray(K[1], dtype=float), (grid.space.dim,))
    pts = grid.array
    off = np.linalg.norm(pts - np.clip(pts, lo, hi), axis=1)
    in_k = off == 0.0
    if not in_k.any():
        raise ContractViolation("no grid point lies in K")
    in_kk = in_k[:, None] & in_k[None, :]
    near = np.sqrt(off[:, None] ** 2 + off[None, :] ** 2) <= theta
    return max(
        _directed(_embed(grid, gA.matrix & in_kk), _embed(grid, gB.matrix & near)),
        _directed(_embed(grid, gB.matrix & in_kk), _embed(grid, gA.matrix & near)),
    )
