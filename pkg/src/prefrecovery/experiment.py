"""Experiment plans and simulated subjects.

Exhaustive plans walk a dyadic enumeration ``a_0, a_1, ...`` of the space
(coarse lattice first, new points of each finer level in lexicographic order)
and list unordered pairs in the order ``(a_0,a_1), (a_0,a_2), (a_1,a_2),
(a_0,a_3), ...``.  Every plan is a prefix of every longer plan with the same
parameters.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from . import rng as rngmod
from .errors import ConfigError, ContractViolation
from .preferences import PreferenceSpec
from .spaces import AlternativeSpace

FINITE_DIFF_H = 1e-6


# -- plans -------------------------------------------------------------------

class Design(str, enum.Enum):
    EXHAUSTIVE = "exhaustive"
    RANDOM = "random"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class ExperimentPlan:
    """Ordered problems ``{xs[k], ys[k]}``; arrays of shape ``(n, d)``."""

    space: AlternativeSpace
    xs: NDArray[np.float64]
    ys: NDArray[np.float64]
    design: Design = Design.CUSTOM
    seed: int | None = None

    def __post_init__(self) -> None:
        xs = np.atleast_2d(np.asarray(self.xs, dtype=float)).copy()
        ys = np.atleast_2d(np.asarray(self.ys, dtype=float)).copy()
        if xs.shape != ys.shape:
            raise ContractViolation("plan sides have different shapes")
        self.space.validate(xs, "plan x")
        self.space.validate(ys, "plan y")
        if np.any(np.all(xs == ys, axis=1)):
            raise ContractViolation("degenerate choice problem with x = y")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "design", Design(self.design))

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    def __len__(self) -> int:
        return self.n

    def prefix(self, n: int) -> ExperimentPlan:
        if not 1 <= n <= self.n:
            raise ContractViolation(f"prefix length {n} outside 1..{self.n}")
        return ExperimentPlan(self.space, self.xs[:n], self.ys[:n], self.design, self.seed)

    def same_as(self, other: ExperimentPlan) -> bool:
        return (
            self.space == other.space
            and np.array_equal(self.xs, other.xs)
            and np.array_equal(self.ys, other.ys)
        )


def enumerate_alternatives(space: AlternativeSpace, count: int) -> NDArray[np.float64]:
    """First ``count`` points of the nested dyadic enumeration."""
    chunks, have, level = [], 0, 0
    while have < count:
        new = space.dyadic_new_points(level)
        chunks.append(new)
        have += new.shape[0]
        level += 1
    return np.concatenate(chunks)[:count]


def pair_index(k: int) -> tuple[int, int]:
    """Indices ``(i, j)``, ``i < j``, of the ``k``-th pair in diagonal order (0-based)."""
    j = int((1 + np.sqrt(1 + 8 * k)) // 2)
    while j * (j - 1) // 2 > k:
        j -= 1
    while (j + 1) * j // 2 <= k:
        j += 1
    return k - j * (j - 1) // 2, j


def exhaustive_plan(space: AlternativeSpace, n: int) -> ExperimentPlan:
    if n < 1:
        raise ContractViolation("plan size must be >= 1")
    _, last_j = pair_index(n - 1)
    alts = enumerate_alternatives(space, last_j + 1)
    idx = np.array([pair_index(k) for k in range(n)])
    return ExperimentPlan(space, alts[idx[:, 0]], alts[idx[:, 1]], Design.EXHAUSTIVE)


def random_plan(space: AlternativeSpace, n: int, seed: int) -> ExperimentPlan:
    """``2n`` i.i.d. uniform draws on the space's support, paired consecutively.

    Uniforms come from one counter-based stream, so a shorter plan with the same
    seed is a prefix of a longer one.
    """
    if n < 1:
        raise ContractViolation("plan size must be >= 1")
    d = space.dim
    u = rngmod.uniforms(seed, "random-plan", 2 * n * d).reshape(n, 2, d)
    xs = space.from_uniforms(u[:, 0, :])
    ys = space.from_uniforms(u[:, 1, :])
    return ExperimentPlan(space, xs, ys, Design.RANDOM, seed)


# -- error models --------------------------------------------------------------

class ErrorKind(str, enum.Enum):
    EXPONENTIAL = "exponential"
    LINEAR_CLAMP = "linear_clamp"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ErrorModel:
    """Mistake profile ``f`` with ``f(0) = 1``, strictly decreasing, ``f'(0) < 0``.

    A strict pair at distance ``t`` is answered correctly with probability
    ``1 - f(t)/2``.  Custom models are tabulated ``(t, f)`` pairs interpolated
    linearly and held at the last value beyond the table.
    """

    kind: ErrorKind = ErrorKind.EXPONENTIAL
    kappa: float = 2.0
    slope: float = 1.0
    table_t: tuple[float, ...] = ()
    table_f: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ErrorKind(self.kind))
        if self.kind is ErrorKind.EXPONENTIAL and not self.kappa > 0:
            raise ContractViolation("exponential error model needs kappa > 0")
        if self.kind is ErrorKind.LINEAR_CLAMP and not self.slope > 0:
            raise ContractViolation("linear error model needs slope > 0")
        if self.kind is ErrorKind.CUSTOM:
            t = np.asarray(self.table_t, dtype=float)
            fv = np.asarray(self.table_f, dtype=float)
            object.__setattr__(self, "table_t", tuple(t))
            object.__setattr__(self, "table_f", tuple(fv))
            if t.size < 2 or t.shape != fv.shape or t[0] != 0.0 or np.any(np.diff(t) <= 0):
                raise ContractViolation("custom table needs increasing t starting at 0")
            if fv[0] != 1.0:
                raise ContractViolation("custom error model needs f(0) = 1")
            if np.any(np.diff(fv) >= 0) or fv[-1] < 0:
                raise ContractViolation("custom error model must be strictly decreasing and nonnegative")
            if not (self.f(FINITE_DIFF_H) - 1.0) / FINITE_DIFF_H < 0:
                raise ContractViolation("custom error model needs f'(0) < 0")

    @classmethod
    def exponential(cls, kappa: float = 2.0) -> ErrorModel:
        return cls(ErrorKind.EXPONENTIAL, kappa=kappa)

    @classmethod
    def linear_clamp(cls, slope: float) -> ErrorModel:
        return cls(ErrorKind.LINEAR_CLAMP, slope=slope)

    @classmethod
    def custom(cls, t, f) -> ErrorModel:
        return cls(ErrorKind.CUSTOM, table_t=tuple(t), table_f=tuple(f))

    def f(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind is ErrorKind.EXPONENTIAL:
            return np.exp(-self.kappa * t)
        if self.kind is ErrorKind.LINEAR_CLAMP:
            return np.maximum(0.0, 1.0 - self.slope * t)
        return np.interp(t, self.table_t, self.table_f)

    def p_correct(self, t):
        """Probability of choosing the strictly better alternative at distance ``t``."""
        return 1.0 - 0.5 * self.f(t)

    def q(self, p: PreferenceSpec, chosen: NDArray, rejected: NDArray) -> NDArray[np.float64]:
        """Row-wise probability that ``chosen`` is picked from ``{chosen, rejected}`` under ``p``."""
        fwd = p.weak_rows(chosen, rejected)
        bwd = p.weak_rows(rejected, chosen)
        pc = self.p_correct(np.linalg.norm(np.atleast_2d(chosen) - np.atleast_2d(rejected), axis=1))
        return np.where(fwd & bwd, 0.5, np.where(fwd, pc, 1.0 - pc))


# -- revealed relations and simulation ---------------------------------------------

class TieRule(str, enum.Enum):
    LEXICOGRAPHIC = "lexicographic"
    FLAG_AND_SKIP = "flag_and_skip"


@dataclass(frozen=True, eq=False)
class RevealedRelation:
    """Observed choices: row ``k`` records ``chosen[k]`` picked over ``rejected[k]``.

    ``problem_index`` maps rows back to plan positions (skipped ties leave gaps);
    ``tie_flags`` marks problems answered under exact indifference.
    """

    chosen: NDArray[np.float64]
    rejected: NDArray[np.float64]
    problem_index: NDArray[np.int64] = field(default=None)
    tie_flags: NDArray[np.bool_] = field(default=None)
    picked_second: NDArray[np.bool_] = field(default=None)

    def __post_init__(self) -> None:
        c = np.atleast_2d(np.asarray(self.chosen, dtype=float)).copy()
        r = np.atleast_2d(np.asarray(self.rejected, dtype=float)).copy()
        if c.shape != r.shape:
            raise ContractViolation("chosen and rejected have different shapes")
        n = c.shape[0]
        pi = np.arange(n) if self.problem_index is None else np.asarray(self.problem_index, dtype=np.int64)
        tf = np.zeros(n, bool) if self.tie_flags is None else np.asarray(self.tie_flags, dtype=bool)
        ps = np.zeros(n, bool) if self.picked_second is None else np.asarray(self.picked_second, dtype=bool)
        if pi.shape != (n,) or tf.shape != (n,) or ps.shape != (n,):
            raise ContractViolation("metadata arrays must have one entry per record")
        for name, arr in (("chosen", c), ("rejected", r), ("problem_index", pi), ("tie_flags", tf),
                          ("picked_second", ps)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.chosen.shape[0]

    def __len__(self) -> int:
        return self.n

    @property
    def dim(self) -> int:
        return self.chosen.shape[1]

    def same_as(self, other: RevealedRelation) -> bool:
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("chosen", "rejected", "problem_index", "tie_flags", "picked_second")
        )

    def subset(self, rows) -> RevealedRelation:
        rows = np.asarray(rows)
        return RevealedRelation(self.chosen[rows], self.rejected[rows], self.problem_index[rows],
                                self.tie_flags[rows], self.picked_second[rows])


def _lex_first(xs: NDArray, ys: NDArray) -> NDArray[np.bool_]:
    """Row-wise: is ``xs[k]`` lexicographically smaller than ``ys[k]``."""
    out = np.zeros(xs.shape[0], dtype=bool)
    decided = np.zeros(xs.shape[0], dtype=bool)
    for c in range(xs.shape[1]):
        lt = (xs[:, c] < ys[:, c]) & ~decided
        gt = (xs[:, c] > ys[:, c]) & ~decided
        out |= lt
        decided |= lt | gt
    return out


def _assemble(plan: ExperimentPlan, second: NDArray[np.bool_], ties: NDArray[np.bool_],
              keep: NDArray[np.bool_]) -> RevealedRelation:
    chosen = np.where(second[:, None], plan.ys, plan.xs)
    rejected = np.where(second[:, None], plan.xs, plan.ys)
    idx = np.flatnonzero(keep)
    return RevealedRelation(chosen[idx], rejected[idx], idx, ties[idx], second[idx])


def _check_space(p: PreferenceSpec, plan: ExperimentPlan) -> None:
    if p.space != plan.space:
        raise ContractViolation("preference and plan live on different spaces")


def simulate_noiseless(
    p: PreferenceSpec, plan: ExperimentPlan, tie_rule: TieRule = TieRule.LEXICOGRAPHIC
) -> RevealedRelation:
    _check_space(p, plan)
    tie_rule = TieRule(tie_rule)
    fwd = p.weak_rows(plan.xs, plan.ys)
    bwd = p.weak_rows(plan.ys, plan.xs)
    ties = fwd & bwd
    second = ~fwd
    if tie_rule is TieRule.LEXICOGRAPHIC:
        second = np.where(ties, ~_lex_first(plan.xs, plan.ys), second)
        keep = np.ones(plan.n, dtype=bool)
    else:
        keep = ~ties
    return _assemble(plan, second, ties, keep)


def simulate_noisy(p: PreferenceSpec, plan: ExperimentPlan, em: ErrorModel, seed: int) -> RevealedRelation:
    """Problem ``k`` uses the ``k``-th uniform of the seed's choice stream, so prefixes agree."""
    _check_space(p, plan)
    fwd = p.weak_rows(plan.xs, plan.ys)
    bwd = p.weak_rows(plan.ys, plan.xs)
    ties = fwd & bwd
    p_x = np.where(ties, 0.5, np.where(fwd, 1.0, 0.0))
    strict = ~ties
    pc = em.p_correct(np.linalg.norm(plan.xs - plan.ys, axis=1))
    p_x = np.where(strict & fwd, pc, np.where(strict, 1.0 - pc, p_x))
    u = rngmod.uniforms(seed, "choices", plan.n)
    second = u >= p_x
    return _assemble(plan, second, ties, np.ones(plan.n, dtype=bool))


# -- choice-data CSV -------------------------------------------------------------

def choices_to_csv(R: RevealedRelation, header: dict[str, object] | None = None) -> str:
    """Columns: problem_index, x_1..x_d, y_1..y_d, chosen (0 = x, 1 = y), tie_flag.

    ``x``/``y`` are the plan's presentation order.  Floats use 17 significant digits.
    """
    buf = io.StringIO()
    for key, value in (header or {}).items():
        buf.write(f"# {key}={value}\n")
    d = R.dim
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["problem_index", *[f"x_{i + 1}" for i in range(d)], *[f"y_{i + 1}" for i in range(d)],
                "chosen", "tie_flag"])
    xs = np.where(R.picked_second[:, None], R.rejected, R.chosen)
    ys = np.where(R.picked_second[:, None], R.chosen, R.rejected)
    for k in range(R.n):
        w.writerow([int(R.problem_index[k]), *[format(v, ".17g") for v in xs[k]],
                    *[format(v, ".17g") for v in ys[k]], int(R.picked_second[k]), int(R.tie_flags[k])])
    return buf.getvalue()


class ChoiceDataError(ConfigError):
    """Malformed choice-data file."""


def choices_from_csv(text: str) -> tuple[RevealedRelation, dict[str, str]]:
    header: dict[str, str] = {}
    body = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            header[key.strip()] = value.strip()
        elif line.strip():
            body.append((lineno, line))
    if not body:
        raise ChoiceDataError("choice data has no column header")
    cols = next(csv.reader([body[0][1]]))
    if (len(cols) - 3) % 2 or len(cols) < 5 or cols[0] != "problem_index" or cols[-2:] != ["chosen", "tie_flag"]:
        raise ChoiceDataError(f"line {body[0][0]}: unexpected columns {cols}")
    d = (len(cols) - 3) // 2
    pi, xs, ys, second, ties = [], [], [], [], []
    for lineno, line in body[1:]:
        row = next(csv.reader([line]))
        try:
            if len(row) != len(cols):
                raise ValueError(f"expected {len(cols)} fields, got {len(row)}")
            vals = [float(v) for v in row[1:1 + 2 * d]]
            if not np.all(np.isfinite(vals)):
                raise ValueError("non-finite coordinate")
            c, t = int(row[-2]), int(row[-1])
            if c not in (0, 1) or t not in (0, 1):
                raise ValueError("chosen and tie_flag must be 0 or 1")
            pi.append(int(row[0]))
        except ValueError as exc:
            raise ChoiceDataError(f"line {lineno}: {exc}") from exc
        xs.append(vals[:d])
        ys.append(vals[d:])
        second.append(bool(c))
        ties.append(bool(t))
    if not pi:
        raise ChoiceDataError("choice data has no records")
    xs_a, ys_a, sec = np.array(xs), np.array(ys), np.array(second)
    chosen = np.where(sec[:, None], ys_a, xs_a)
    rejected = np.where(sec[:, None], xs_a, ys_a)
    return RevealedRelation(chosen, rejected, np.array(pi), np.array(ties), sec), header

