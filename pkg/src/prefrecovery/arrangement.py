"""Open cells of a central hyperplane arrangement.

For unit normals ``H`` (``K x m``) the sphere ``|w| = 1`` is cut into open cells
on which every sign ``sign(H @ w)`` is constant and nonzero.  Linear-threshold
0-1 losses are constant on each cell, so minimizing over one representative
per cell is exact.

Representatives come from extreme rays: once the normals span ``R^m`` every
cell is a pointed cone, and each cell touches one of its extreme rays ``n``.
Near ``n`` the arrangement looks like the hyperplanes through ``n``
restricted to ``n``'s orthogonal complement, a smaller central arrangement;
its representatives, pushed off ``n`` by a tilt small enough to keep every
other sign, land in every cell adjacent to ``n``.  Degenerate vertices (more
than ``m - 1`` hyperplanes through one ray) go through the same recursion.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import null_space
from scipy.optimize import linprog

from .errors import EstimationError

# |h . n| at or below this counts as "h passes through n"
THROUGH_TOL = 1e-12
ROUND_DECIMALS = 12
# a candidate counts as inside an open cell only if every |h . w| exceeds this
STRICT_TOL = 1e-12


def canonical_sign(rows: NDArray[np.float64]) -> NDArray[np.float64]:
    """Sign flip per row so the first entry of magnitude > 1e-12 is positive."""
    rows = np.atleast_2d(rows)
    big = np.abs(rows) > THROUGH_TOL
    first = np.argmax(big, axis=1)
    s = np.sign(rows[np.arange(rows.shape[0]), first])
    s[s == 0] = 1.0
    return s


@dataclass(frozen=True, eq=False)
class Hyperplanes:
    """Distinct unit normals plus, for every record, which normal it uses and with what orientation.

    ``record_plane[k] = -1`` marks a zero difference vector (always a tie).
    """

    normals: NDArray[np.float64]
    record_plane: NDArray[np.int64]
    record_sign: NDArray[np.float64]

    @property
    def count(self) -> int:
        return self.normals.shape[0]


def hyperplanes_from_differences(Y: NDArray[np.float64]) -> Hyperplanes:
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n, m = Y.shape
    norms = np.linalg.norm(Y, axis=1)
    plane = np.full(n, -1, dtype=np.int64)
    sign = np.zeros(n)
    keys: dict[tuple, int] = {}
    normals = []
    for k in range(n):
        if norms[k] == 0.0:
            continue
        u = Y[k] / norms[k]
        s = canonical_sign(u)[0]
        h = s * u
        key = tuple(np.round(h, ROUND_DECIMALS) + 0.0)
        idx = keys.get(key)
        if idx is None:
            idx = len(normals)
            keys[key] = idx
            normals.append(h)
        plane[k] = idx
        sign[k] = s
    H = np.array(normals) if normals else np.zeros((0, m))
    return Hyperplanes(H, plane, sign)


def _orth_complement(A: NDArray[np.float64], m: int) -> NDArray[np.float64]:
    """Orthonormal basis (columns) of the complement of the row space of ``A``."""
    if A.shape[0] == 0:
        return np.eye(m)
    return null_space(A, rcond=1e-10)


def _dedupe_rows(rows: list[NDArray[np.float64]]) -> list[NDArray[np.float64]]:
    seen, out = set(), []
    for r in rows:
        key = tuple(np.round(r, ROUND_DECIMALS) + 0.0)
        if key not in seen:
            seen.add(key)
            out.append(r)
    return out


def _tilt(n, Q, c, H, through):
    """Push ``n`` into the open cell picked out by ``c`` among the hyperplanes through ``n``.

    The tilt is half the largest step that keeps every other hyperplane's sign,
    so new margins are as large as the geometry allows.
    """
    direction = Q @ c
    along = H[through] @ direction
    if np.any(np.abs(along) <= STRICT_TOL):
        return None
    base = H[~through] @ n
    slope = np.abs(H[~through] @ direction)
    with np.errstate(divide="ignore"):
        room = np.where(slope > 0, np.abs(base) / slope, np.inf)
    eps = min(0.5, 0.5 * float(room.min())) if room.size else 0.5
    w = n + eps * direction
    w = w / np.linalg.norm(w)
    if not (np.array_equal(np.sign(H[through] @ w), np.sign(along))
            and np.array_equal(np.sign(H[~through] @ w), np.sign(base))):
        raise EstimationError("tilted ray left its intended cell")
    return w


def cell_points(H: NDArray[np.float64]) -> NDArray[np.float64]:
    """At least one unit vector inside every open cell of the arrangement with normals ``H``."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    m = H.shape[1]
    if m == 1:
        return np.array([[1.0], [-1.0]])
    work = H
    rank = np.linalg.matrix_rank(H, tol=1e-10) if H.shape[0] else 0
    if rank < m:
        # virtual hyperplanes only subdivide cells; every real cell keeps a representative
        work = np.concatenate([H, _orth_complement(H, m).T])
    rays = []
    for S in itertools.combinations(range(work.shape[0]), m - 1):
        A = work[list(S)]
        basis = null_space(A, rcond=1e-10)
        if basis.shape[1] != 1:
            continue
        r = basis[:, 0]
        rays.append(r * canonical_sign(r)[0])
    out: list[NDArray[np.float64]] = []
    for r in _dedupe_rows(rays):
        for n in (r, -r):
            through = np.abs(work @ n) <= THROUGH_TOL
            Q = _orth_complement(n[None, :], m)
            sub = work[through] @ Q
            sub = sub / np.linalg.norm(sub, axis=1, keepdims=True)
            sub = sub * canonical_sign(sub)[:, None]
            sub = np.array(_dedupe_rows(list(sub)))
            for c in cell_points(sub):
                w = _tilt(n, Q, c, work, through)
                if w is not None:
                    out.append(w)
    if H.shape[0]:
        out.extend(H)
        out.extend(-H)
    return np.array(out)


def open_cell_patterns(H: NDArray[np.float64]) -> tuple[NDArray[np.bool_], NDArray[np.float64], int]:
    """Distinct sign patterns ``H @ w > 0`` over open cells, one witness each.

    Returns ``(patterns, witnesses, evaluated)`` where ``evaluated`` counts the
    candidate directions examined before deduplication.
    """
    W = cell_points(H)
    if H.shape[0] == 0:
        return np.zeros((1, 0), dtype=bool), W[:1], W.shape[0]
    S = W @ H.T
    strict = np.all(np.abs(S) > STRICT_TOL, axis=1)
    pats = S[strict] > 0
    wit = W[strict]
    _, first = np.unique(pats, axis=0, return_index=True)
    first = np.sort(first)
    return pats[first], wit[first], W.shape[0]


def chebyshev_direction(H: NDArray[np.float64], positive: NDArray[np.bool_]) -> tuple[NDArray[np.float64], float] | None:
    """Deepest unit direction of the open cell with the given sign pattern.

    Solves ``max t  s.t.  s_k h_k . w >= t,  -1 <= w <= 1``; returns the
    normalized ``w`` and its angular margin ``min_k s_k h_k . w``, or ``None`` if
    the cell is empty to working precision.
    """
    m = H.shape[1]
    s = np.where(positive, 1.0, -1.0)
    A = np.concatenate([-(s[:, None] * H), np.ones((H.shape[0], 1))], axis=1)
    c = np.zeros(m + 1)
    c[-1] = -1.0
    bounds = [(-1.0, 1.0)] * m + [(None, 1.0)]
    res = linprog(c, A_ub=A, b_ub=np.zeros(H.shape[0]), bounds=bounds, method="highs")
    if res.status != 0 or res.x[-1] <= 1e-12:
        return None
    w = res.x[:m]
    w = w / np.linalg.norm(w)
    margin = float(np.min(s * (H @ w)))
    if margin <= 0:
        return None
    return w, margin
