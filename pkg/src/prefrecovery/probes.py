"""Sampled probes for structural properties of preferences and dominance relations.

A probe that passes is evidence, not proof: it inspects finitely many points.
A probe that fails carries a concrete witness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from . import rng as rngmod
from .dominance import DominanceKind, DominanceRelation, dominates
from .errors import ContractViolation
from .metric import EvaluationGrid
from .preferences import PreferenceSpec, TabulatedRelation
from .spaces import AlternativeSpace, SpaceKind

GRODAL_MAX_POINTS = 1500
OPEN_RADIUS = 1e-6


@dataclass(frozen=True)
class ProbeResult:
    name: str
    passed: bool
    checked: int
    witnesses: tuple = ()
    note: str = ""

    def __bool__(self) -> bool:
        return self.passed

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.note})" if self.note else ""
        return f"{status}  {self.name}: {self.checked} checked{extra}"


def _feasible_step(space: AlternativeSpace, x: NDArray, direction: NDArray, step: float) -> float:
    """Largest ``a <= step`` keeping ``x + a * direction`` inside the space."""
    if space.kind is SpaceKind.REAL_LINE:
        return step
    neg = direction < 0
    if not neg.any():
        return step
    limit = float(np.min(x[neg] / -direction[neg]))
    if space.kind is not SpaceKind.SIMPLEX:
        # open constraints: stay strictly inside
        limit *= 0.5
    return min(step, limit)


def probe_cloud(space: AlternativeSpace, points: NDArray, radius: float) -> NDArray:
    """Centre plus +/- one step along each tangent direction: ``(m, 2d+1, d)`` array.

    The step is ``radius / sqrt(2)`` so a joint move of both members of a pair
    stays within ``radius`` in the product norm; steps that would leave the
    space are shortened.
    """
    step = radius / np.sqrt(2.0)
    dirs = space.tangent_directions()
    pts = np.atleast_2d(points)
    cloud = np.empty((pts.shape[0], 2 * len(dirs) + 1, space.dim))
    cloud[:, 0] = pts
    for m, x in enumerate(pts):
        col = 1
        for t in dirs:
            for sign in (1.0, -1.0):
                a = _feasible_step(space, x, sign * t, step)
                q = x + a * sign * t
                if space.is_simplex:
                    q = np.maximum(q, 0.0)
                    q = q / q.sum()
                cloud[m, col] = q
                col += 1
    return cloud


def is_locally_strict_probe(p: PreferenceSpec, grid: EvaluationGrid, radius: float) -> ProbeResult:
    if radius <= 0:
        raise ContractViolation("radius must be positive")
    if isinstance(p, TabulatedRelation):
        raise ContractViolation("a tabulated relation cannot be evaluated off its table")
    pts = grid.array
    cloud = probe_cloud(grid.space, pts, radius)
    u = p.utility(cloud.reshape(-1, grid.space.dim)).reshape(cloud.shape[:2])
    best, worst = u.max(axis=1), u.min(axis=1)
    weak = p.weak_matrix(pts, pts)
    # some probed (x', y') is strict iff max over x-probes beats min over y-probes
    strict_nearby = best[:, None] > worst[None, :]
    bad = np.argwhere(weak & ~strict_nearby)
    return ProbeResult(
        "local strictness",
        bad.shape[0] == 0,
        int(weak.sum()),
        tuple(map(tuple, bad[:5].tolist())),
        f"radius={radius:g}",
    )


def is_grodal_transitive_probe(
    p: PreferenceSpec, grid: EvaluationGrid, max_points: int = GRODAL_MAX_POINTS, seed: int = 0
) -> ProbeResult:
    """Exhaustive check of ``x >= y > z >= w  =>  x >= w`` over grid 4-tuples.

    Above ``max_points`` a seeded random subset of grid points is checked instead.
    """
    pts = grid.array
    note = "exhaustive"
    if len(pts) > max_points:
        keep = np.sort(rngmod.stream(seed, "grodal").choice(len(pts), max_points, replace=False))
        pts = pts[keep]
        note = f"subsample of {max_points} of {len(grid)} points"
    w = p.weak_matrix(pts, pts)
    s = w & ~w.T
    wf = w.astype(np.float64)
    chain = (wf @ s.astype(np.float64) @ wf) > 0
    bad = np.argwhere(chain & ~w)
    n = len(pts)
    return ProbeResult("Grodal transitivity", bad.shape[0] == 0, n ** 4, tuple(map(tuple, bad[:5].tolist())), note)


# -- dominance sampling --------------------------------------------------------

def native_space(rel: DominanceRelation, d: int) -> AlternativeSpace:
    if rel.kind is DominanceKind.FSD:
        return AlternativeSpace.interior_simplex(d)
    if rel.kind is DominanceKind.TAU:
        return AlternativeSpace.dated_reward()
    if rel.kind is DominanceKind.MENU_SUPPORT:
        raise ContractViolation("menu dominance has no point space")
    return AlternativeSpace.positive_orthant(d)


def sample_points(space: AlternativeSpace, count: int, seed: int, purpose: str = "points") -> NDArray:
    u = rngmod.uniforms(seed, purpose, count * space.dim)
    return space.from_uniforms(u.reshape(count, space.dim))


def sample_dominating_pairs(
    rel: DominanceRelation, space: AlternativeSpace, count: int, seed: int
) -> tuple[NDArray, NDArray]:
    """Constructive draws of pairs ``(x, y)`` with ``x`` dominating ``y``; filtered exactly."""
    g = rngmod.stream(seed, "dominating-pairs")
    d = space.dim
    xs, ys = [], []
    attempts = 0
    while len(xs) < count:
        attempts += 1
        if attempts > 50 * count:
            raise ContractViolation(f"could not construct dominating pairs for {rel.kind.value}")
        k = rel.kind
        if k is DominanceKind.FSD:
            # shift a random amount across every boundary k -> k+1; each partial sum drops
            y = space.from_uniforms(g.random((1, d)))[0]
            t = g.uniform(0.05, 0.8, d - 1) * y[:-1]
            x = y.copy()
            x[:-1] -= t
            x[1:] += t
        elif k is DominanceKind.TAU:
            y = space.from_uniforms(g.random((1, 2)))[0]
            x = y + np.array([-1.0, 1.0]) * g.uniform(0.01, 0.3, 2)
        else:
            y = space.from_uniforms(g.random((1, d)))[0]
            inc = g.uniform(0.01, 0.3, d)
            if k is DominanceKind.GG_ALPHA:
                inc = inc.mean() * (1.0 + 0.05 * (g.random(d) - 0.5))
            elif k is DominanceKind.GGG:
                inc[1:] = g.uniform(-0.1, 0.1, d - 1) * inc[0]
            x = y + inc
            if k is DominanceKind.SYM_GT:
                x = g.permutation(x)
        if space.contains(x)[0] and dominates(rel, x, y):
            xs.append(x)
            ys.append(y)
    return np.array(xs), np.array(ys)


def _perturb(space: AlternativeSpace, pts: NDArray, radius: float, g: np.random.Generator) -> NDArray:
    noise = g.uniform(-1.0, 1.0, pts.shape)
    if space.is_simplex:
        noise -= noise.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(noise, axis=1, keepdims=True)
    return pts + radius * noise / np.maximum(norms, 1e-300) * g.random((pts.shape[0], 1))


def irreflexivity_probe(rel: DominanceRelation, d: int = 3, samples: int = 1000, seed: int = 0) -> ProbeResult:
    space = native_space(rel, d)
    pts = sample_points(space, samples, seed, "irreflexive")
    bad = [i for i, x in enumerate(pts) if dominates(rel, x, x)]
    return ProbeResult(f"irreflexive[{rel.kind.value}]", not bad, samples, tuple(bad[:5]))


def openness_probe(
    rel: DominanceRelation, d: int = 3, samples: int = 200, radius: float = OPEN_RADIUS, seed: int = 0
) -> ProbeResult:
    space = native_space(rel, d)
    xs, ys = sample_dominating_pairs(rel, space, samples, seed)
    g = rngmod.stream(seed, "openness")
    xp, yp = _perturb(space, xs, radius, g), _perturb(space, ys, radius, g)
    bad = [i for i in range(samples) if not dominates(rel, xp[i], yp[i])]
    return ProbeResult(f"open[{rel.kind.value}]", not bad, samples, tuple(bad[:5]), f"radius={radius:g}")


def monotonicity_probe(
    p: PreferenceSpec, rel: DominanceRelation, samples: int = 500, seed: int = 0
) -> ProbeResult:
    """Strict preference for the dominating point on sampled dominating pairs."""
    xs, ys = sample_dominating_pairs(rel, p.space, samples, seed)
    ok = p.utility(xs) > p.utility(ys)
    bad = np.flatnonzero(~ok)
    return ProbeResult(
        f"strictly monotone w.r.t. {rel.kind.value}", bad.size == 0, samples, tuple(bad[:5].tolist())
    )
