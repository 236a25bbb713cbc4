"""Dominance relations and menu dominance via support functions."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray
from scipy.special import ndtri
from scipy.stats import qmc

from .errors import ContractViolation
from .spaces import sum_zero_basis

DEFAULT_U_SAMPLES = 512
_SOBOL_SEED = 20240611


class DominanceKind(str, enum.Enum):
    GG = "gg"
    GG_ALPHA = "gg_alpha"
    GGG = "ggg"
    SYM_GT = "sym_gt"
    FSD = "fsd"
    TAU = "tau"
    MENU_SUPPORT = "menu_support"


@dataclass(frozen=True)
class DominanceRelation:
    kind: DominanceKind
    alpha: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", DominanceKind(self.kind))
        if self.kind is DominanceKind.GG_ALPHA and not 0.0 <= self.alpha < 1.0:
            raise ContractViolation("alpha must lie in [0, 1)")


def dominates(rel: DominanceRelation, x, y) -> bool:
    """Evaluate the relation's defining strict inequalities exactly (no tolerance)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ContractViolation(f"points of shapes {x.shape} and {y.shape} are not comparable")
    kind = rel.kind
    if kind is DominanceKind.MENU_SUPPORT:
        raise ContractViolation("menu dominance compares menus; use menu_dominates")
    if kind is DominanceKind.GG:
        return bool(np.all(x > y))
    if kind is DominanceKind.GG_ALPHA:
        d = x.shape[0]
        diff = x - y
        others = diff.sum() - diff
        return bool(np.all(diff > rel.alpha / (d - 1) * others))
    if kind is DominanceKind.GGG:
        return bool(np.all(np.cumsum(x) > np.cumsum(y)))
    if kind is DominanceKind.SYM_GT:
        # some permutation of x beats y coordinatewise iff the sorted vectors do
        return bool(np.all(np.sort(x)[::-1] > np.sort(y)[::-1]))
    if kind is DominanceKind.FSD:
        # less mass on every lower tail; outcomes are indexed worst first
        return bool(np.all(np.cumsum(x)[:-1] < np.cumsum(y)[:-1]))
    if kind is DominanceKind.TAU:
        if x.shape[0] != 2:
            raise ContractViolation("dated rewards are (date, amount) pairs")
        return bool(x[0] < y[0] and x[1] > y[1])
    raise ContractViolation(f"unknown dominance kind {kind}")


# -- menus ---------------------------------------------------------------------

@dataclass(frozen=True)
class Menu:
    """Convex polytope inside the open simplex, stored by its vertex list."""

    vertices: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "vertices", tuple(tuple(r) for r in v))
        d = v.shape[1]
        if d < 2:
            raise ContractViolation("menus live in a simplex of dim >= 2")
        if np.any(v <= 0) or np.any(np.abs(v.sum(axis=1) - 1.0) > 1e-12):
            raise ContractViolation("menu vertices must lie strictly inside the simplex")
        if v.shape[0] < d or np.linalg.matrix_rank(v[1:] - v[0], tol=1e-12) < d - 1:
            raise ContractViolation("menu needs d affinely independent vertices")

    @property
    def array(self) -> NDArray[np.float64]:
        return np.asarray(self.vertices)

    @property
    def dim(self) -> int:
        return len(self.vertices[0])

    def support(self, directions: NDArray[np.float64]) -> NDArray[np.float64]:
        """``h(u) = max_p u . p`` over the vertices, one value per row of ``directions``."""
        return (np.atleast_2d(directions) @ self.array.T).max(axis=1)


@lru_cache(maxsize=32)
def _directions(d: int, count: int) -> NDArray[np.float64]:
    if d == 2:
        # the normalized index set is just two points
        u = np.array([[1.0, -1.0], [-1.0, 1.0]]) / np.sqrt(2.0)
    else:
        basis = sum_zero_basis(d)
        if d == 3:
            t = 2.0 * np.pi * (np.arange(count) + 0.5) / count
            w = np.stack([np.cos(t), np.sin(t)], axis=1)
        else:
            sob = qmc.Sobol(d - 1, scramble=True, seed=_SOBOL_SEED).random(count)
            w = ndtri(np.clip(sob, 1e-12, 1 - 1e-12))
            w /= np.linalg.norm(w, axis=1, keepdims=True)
        u = w @ basis.T
    u.setflags(write=False)
    return u


def index_directions(d: int, count: int = DEFAULT_U_SAMPLES) -> NDArray[np.float64]:
    """Deterministic low-discrepancy points on ``{u : sum(u) = 0, |u| = 1}``."""
    if count < 1:
        raise ContractViolation("need at least one direction")
    return _directions(d, count)


def menu_dominates(mA: Menu, mB: Menu, u_samples: int = DEFAULT_U_SAMPLES) -> bool:
    """Sampled check that ``h_A(u) > h_B(u)`` on every probed index direction.

    Exact for the sampled directions; a pass is necessary but not sufficient
    for dominance over the whole continuum of directions.
    """
    if mA.dim != mB.dim:
        raise ContractViolation("menus of different dimension")
    u = index_directions(mA.dim, u_samples)
    return bool(np.all(mA.support(u) > mB.support(u)))


def blend_with_simplex(menu: Menu, alpha: float) -> Menu:
    """``alpha * menu + (1 - alpha) * simplex`` clipped to the interior; dominates ``menu`` for alpha < 1.

    The simplex corners are pulled in slightly so vertices stay interior.
    """
    v = menu.array
    d = v.shape[1]
    corners = 0.999 * np.eye(d) + 0.001 / d
    out = np.concatenate([alpha * v + (1 - alpha) * c for c in corners])
    return Menu(tuple(map(tuple, out)))


def shrink_toward(menu: Menu, center, alpha: float) -> Menu:
    """``alpha * center + (1 - alpha) * menu``; dominated by ``menu`` when center is interior."""
    c = np.asarray(center, dtype=float)
    return Menu(tuple(map(tuple, alpha * c + (1 - alpha) * menu.array)))
