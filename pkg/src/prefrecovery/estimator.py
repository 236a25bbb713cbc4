"""Kemeny-loss estimation.

``kemeny_loss`` is the fraction of observed choices a preference strictly
reverses.  Expected-utility fits are exact: the loss of an index ``v`` depends
only on the signs of ``v . (chosen - rejected)``, so it is constant on the open
cells of a hyperplane arrangement and one representative per cell suffices.
Other families use a seeded multi-start coordinate search.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from . import rng as rngmod
from .arrangement import chebyshev_direction, hyperplanes_from_differences, open_cell_patterns
from .errors import ContractViolation, EstimationError
from .experiment import RevealedRelation, TieRule, exhaustive_plan, simulate_noiseless
from .metric import EvaluationGrid, preference_distance
from .preferences import ExpectedUtility, FamilyTemplate, PreferenceSpec, dumps_preference
from .spaces import AlternativeSpace, sum_zero_basis

PARAM_DECIMALS = 12
MAX_CENTERED_CELLS = 256


class Method(str, enum.Enum):
    EXACT = "exact_enumeration"
    SEARCH = "multi_start_search"


class TieBreak(str, enum.Enum):
    MAX_MARGIN = "max_margin"
    LEXICOGRAPHIC = "lexicographic"


@dataclass(frozen=True)
class EstimatorConfig:
    method: Method = Method.EXACT
    tie_break: TieBreak = TieBreak.MAX_MARGIN
    seed: int = 0
    starts: int = 32
    iterations: int = 500
    step_decay: float = 0.9

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "tie_break", TieBreak(self.tie_break))
        if self.starts < 1 or self.iterations < 1:
            raise ContractViolation("search needs starts >= 1 and iterations >= 1")
        if not 0.0 < self.step_decay < 1.0:
            raise ContractViolation("step decay must lie in (0, 1)")


@dataclass(frozen=True)
class EstimateResult:
    estimate: PreferenceSpec
    loss: float
    candidates_evaluated: int
    exact: bool
    margin: float | None = None
    optimal_cells: int | None = None
    audit: tuple[float, ...] = field(default=(), repr=False)

    def to_record(self) -> dict:
        """Flat record for the run log; the estimate is embedded as key = value text."""
        rec = {
            "family": self.estimate.family.value,
            "parameters": {k: list(v) for k, v in self.estimate.params().items()},
            "loss": self.loss,
            "exact": self.exact,
            "candidates_evaluated": self.candidates_evaluated,
            "estimate_text": dumps_preference(self.estimate),
        }
        if self.margin is not None:
            rec["margin"] = self.margin
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


# -- loss ----------------------------------------------------------------------

def kemeny_loss(p: PreferenceSpec, R: RevealedRelation) -> float:
    if R.n < 1:
        raise ContractViolation("empty revealed relation")
    if R.dim != p.space.dim:
        raise ContractViolation(f"records have dim {R.dim}, preference expects {p.space.dim}")
    return float(np.count_nonzero(~p.weak_rows(R.chosen, R.rejected))) / R.n


def rationalizes(p: PreferenceSpec, R: RevealedRelation) -> bool:
    return kemeny_loss(p, R) == 0.0


# -- exact expected-utility fit ------------------------------------------------------

def _canonical_order(R: RevealedRelation) -> NDArray[np.int64]:
    keys = np.concatenate([R.chosen, R.rejected], axis=1)
    return np.lexsort(keys.T[::-1])


def _param_key(v: NDArray[np.float64]) -> tuple[float, ...]:
    return tuple(np.round(v, PARAM_DECIMALS) + 0.0)


def kemeny_minimize_eu(
    R: RevealedRelation, d: int, cfg: EstimatorConfig | None = None, space: AlternativeSpace | None = None
) -> EstimateResult:
    """Exact minimizer of the Kemeny loss over expected-utility indexes that are strict on every record.

    Each optimal open cell is represented by its deepest direction (a small LP);
    among them the tie-break picks the largest angular margin, then the
    lexicographically smallest rounded index.
    """
    cfg = cfg or EstimatorConfig()
    if cfg.method is not Method.EXACT:
        raise ContractViolation("kemeny_minimize_eu needs the exact enumeration method")
    if R.dim != d:
        raise ContractViolation(f"records have dim {R.dim}, expected {d}")
    space = space or AlternativeSpace.simplex(d)
    if space.dim != d or not space.is_simplex:
        raise ContractViolation("expected utility needs a simplex space of matching dimension")
    order = _canonical_order(R)
    C, Rj = R.chosen[order], R.rejected[order]
    B = sum_zero_basis(d)
    planes = hyperplanes_from_differences((C - Rj) @ B)
    if planes.count == 0:
        raise EstimationError("every record compares a point with itself; nothing to fit")
    H = planes.normals
    patterns, _, evaluated = open_cell_patterns(H)

    # record k agrees with cell pattern s iff s[plane_k] matches its orientation
    live = planes.record_plane >= 0
    rec_pos = planes.record_sign[live] > 0
    misses = (patterns[:, planes.record_plane[live]] != rec_pos[None, :]).sum(axis=1)
    best = misses.min()
    optimal = patterns[misses == best]
    if optimal.shape[0] > MAX_CENTERED_CELLS:
        optimal = optimal[:MAX_CENTERED_CELLS]

    chosen_v, chosen_key = None, None
    for pat in optimal:
        centred = chebyshev_direction(H, pat)
        if centred is None:
            continue
        w, margin = centred
        p = ExpectedUtility.from_index(space, B @ w)
        v = p.index
        if cfg.tie_break is TieBreak.MAX_MARGIN:
            key = (-round(margin, PARAM_DECIMALS), _param_key(v))
        else:
            key = (_param_key(v),)
        if chosen_key is None or key < chosen_key:
            chosen_v, chosen_key, chosen_margin = p, key, margin
    if chosen_v is None:
        raise EstimationError("no optimal cell survived centring")
    loss = kemeny_loss(chosen_v, R)
    if loss != best / R.n:
        raise EstimationError(f"floating-point loss {loss} disagrees with cell loss {best / R.n}")
    return EstimateResult(chosen_v, loss, int(evaluated), True, chosen_margin, int(optimal.shape[0]))


def achievable_patterns(xs: NDArray[np.float64], ys: NDArray[np.float64]) -> NDArray[np.bool_]:
    """Distinct strict patterns ``(v . x_i > v . y_i)_i`` over expected-utility indexes."""
    xs, ys = np.atleast_2d(xs), np.atleast_2d(ys)
    B = sum_zero_basis(xs.shape[1])
    planes = hyperplanes_from_differences((xs - ys) @ B)
    if np.any(planes.record_plane < 0):
        raise ContractViolation("problems must compare distinct points")
    patterns, _, _ = open_cell_patterns(planes.normals)
    rec = patterns[:, planes.record_plane] == (planes.record_sign > 0)[None, :]
    return np.unique(rec, axis=0)


# -- multi-start search ---------------------------------------------------------------

def kemeny_minimize_search(
    template: FamilyTemplate,
    R: RevealedRelation,
    cfg: EstimatorConfig | None = None,
    initial: list[NDArray[np.float64]] | None = None,
) -> EstimateResult:
    """Seeded multi-start coordinate search; heuristic, never claims optimality.

    Each start moves one coordinate at a time by +/- step and keeps a move when
    the loss does not increase; after a sweep with no strict improvement every
    step shrinks by ``step_decay``.  ``audit`` lists the loss after every
    accepted move, which is nonincreasing within each start.
    """
    cfg = cfg or EstimatorConfig(method=Method.SEARCH)
    if getattr(template, "n_params", 0) < 1:
        raise ContractViolation("family has no finite parameterization")
    g = rngmod.stream(cfg.seed, "search")
    starts = [np.asarray(t, dtype=float) for t in (initial or [])]
    while len(starts) < cfg.starts:
        starts.append(template.random_params(g))
    starts = starts[: max(cfg.starts, len(initial or []))]

    def loss_of(theta):
        try:
            return kemeny_loss(template.from_params(theta), R)
        except ContractViolation:
            return np.inf

    best_theta, best_loss, evaluated = None, np.inf, 0
    audit: list[float] = []
    for theta0 in starts:
        theta = template.clip(theta0.copy())
        cur = loss_of(theta)
        evaluated += 1
        step = template.scale().copy()
        for _ in range(cfg.iterations):
            if cur == 0.0:
                break
            improved = False
            for i in range(theta.size):
                for sgn in (1.0, -1.0):
                    trial = theta.copy()
                    trial[i] += sgn * step[i]
                    trial = template.clip(trial)
                    val = loss_of(trial)
                    evaluated += 1
                    if val <= cur:
                        improved |= val < cur
                        theta, cur = trial, val
                        audit.append(cur)
            if not improved:
                step *= cfg.step_decay
        if best_theta is None or cur < best_loss or (cur == best_loss and tuple(theta) < tuple(best_theta)):
            best_theta, best_loss = theta, cur
        if best_loss == 0.0:
            break
    est = template.from_params(best_theta)
    return EstimateResult(est, kemeny_loss(est, R), evaluated, False, audit=tuple(audit))


# -- deterministic convergence -----------------------------------------------------------

def rationalizing_sequence(
    p_true: ExpectedUtility,
    schedule: list[int],
    grid: EvaluationGrid,
    cfg: EstimatorConfig | None = None,
    tie_rule: TieRule = TieRule.LEXICOGRAPHIC,
) -> list[tuple[int, float]]:
    """Grid distance between the truth and a zero-loss fit on each exhaustive prefix."""
    cfg = cfg or EstimatorConfig()
    full = exhaustive_plan(p_true.space, max(schedule))
    R_full = simulate_noiseless(p_true, full, tie_rule)
    out = []
    for n in schedule:
        R = R_full.subset(np.flatnonzero(R_full.problem_index < n))
        res = kemeny_minimize_eu(R, p_true.space.dim, cfg, p_true.space)
        if res.loss != 0.0:
            raise EstimationError(f"no rationalizing estimate at n={n} (loss {res.loss})")
        out.append((n, preference_distance(res.estimate, p_true, grid)))
    return out
