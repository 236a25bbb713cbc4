"""Parametric preference families.

Every family is utility based except :class:`TabulatedRelation`, so
``weak_prefers(x, y)`` is the comparison ``u(x) >= u(y)`` evaluated in plain
floating point with no tolerance band.  Exact ties are therefore possible on
lattices; callers report them rather than break them silently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
from numpy.typing import NDArray

from .errors import ContractViolation
from .spaces import AlternativeSpace, SpaceKind

NORM_TOL = 1e-12
DEFAULT_EPS = 0.05
DEFAULT_SLOPE_LO = 0.5
DEFAULT_SLOPE_HI = 2.0


class Family(str, enum.Enum):
    EXPECTED_UTILITY = "expected_utility"
    DISCOUNTED_UTILITY = "discounted_utility"
    TOTAL_INDIFFERENCE = "total_indifference"
    ERRATIC_PWL = "erratic_pwl"
    TABULATED_UTILITY = "tabulated_utility"
    TABULATED_RELATION = "tabulated_relation"
    NATURAL_ORDER = "natural_order"


def _floats(values) -> tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(values, dtype=float).ravel())


@dataclass(frozen=True)
class PreferenceSpec:
    """Base class.  Subclasses provide a vectorized ``utility``."""

    family: ClassVar[Family]
    space: AlternativeSpace

    def utility(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        raise NotImplementedError

    def weak_matrix(self, xs: NDArray[np.float64], ys: NDArray[np.float64]) -> NDArray[np.bool_]:
        """``out[i, j] = xs[i] weakly preferred to ys[j]``."""
        ux = self.utility(np.atleast_2d(xs))
        uy = self.utility(np.atleast_2d(ys))
        return ux[:, None] >= uy[None, :]

    def weak_rows(self, xs: NDArray[np.float64], ys: NDArray[np.float64]) -> NDArray[np.bool_]:
        """Row-wise comparison: ``out[k] = xs[k] weakly preferred to ys[k]``."""
        return self.utility(np.atleast_2d(xs)) >= self.utility(np.atleast_2d(ys))

    def params(self) -> dict[str, tuple[float, ...]]:
        return {}


@dataclass(frozen=True)
class ExpectedUtility(PreferenceSpec):
    """Linear index ``v`` on the simplex, normalized to the sum-zero unit sphere."""

    family: ClassVar[Family] = Family.EXPECTED_UTILITY
    v: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        v = _floats(self.v)
        object.__setattr__(self, "v", v)
        if not self.space.is_simplex:
            raise ContractViolation("expected utility lives on a simplex space")
        if len(v) != self.space.dim:
            raise ContractViolation(f"index has length {len(v)}, space has dim {self.space.dim}")
        arr = np.asarray(v)
        if abs(np.linalg.norm(arr) - 1.0) > NORM_TOL or abs(arr.sum()) > NORM_TOL:
            raise ContractViolation("index must satisfy |v| = 1 and sum(v) = 0; use from_index")

    @classmethod
    def from_index(cls, space: AlternativeSpace, v) -> ExpectedUtility:
        """Normalize any nonconstant index; preference order is unchanged."""
        arr = np.asarray(v, dtype=float).ravel()
        centered = arr - arr.mean()
        norm = np.linalg.norm(centered)
        if not np.isfinite(norm) or norm <= 1e-300:
            raise ContractViolation("constant index has no expected-utility normalization")
        unit = centered / norm
        # one cleanup pass keeps both constraints inside NORM_TOL after rounding
        unit = unit - unit.mean()
        unit = unit / np.linalg.norm(unit)
        return cls(space, tuple(unit))

    @property
    def index(self) -> NDArray[np.float64]:
        return np.asarray(self.v)

    def utility(self, points):
        return np.atleast_2d(np.asarray(points, dtype=float)) @ self.index

    def reversed(self) -> ExpectedUtility:
        return ExpectedUtility(self.space, tuple(-c for c in self.v))

    def params(self):
        return {"v": self.v}


@dataclass(frozen=True)
class DiscountedUtility(PreferenceSpec):
    """``u(x) = sum_i delta_i v(x_i)`` with piecewise-linear ``v``, ``v(0) = 0``.

    ``knots`` are the breakpoints ``0 = k_0 < k_1 < ... < k_{m-1}``; ``slopes[j]``
    applies on ``[k_j, k_{j+1})`` and the last slope continues past the final knot.
    """

    family: ClassVar[Family] = Family.DISCOUNTED_UTILITY
    delta: tuple[float, ...] = ()
    knots: tuple[float, ...] = ()
    slopes: tuple[float, ...] = ()
    eps: float = DEFAULT_EPS
    slope_lo: float = DEFAULT_SLOPE_LO
    slope_hi: float = DEFAULT_SLOPE_HI

    def __post_init__(self) -> None:
        for name in ("delta", "knots", "slopes"):
            object.__setattr__(self, name, _floats(getattr(self, name)))
        if self.space.kind is not SpaceKind.POSITIVE_ORTHANT:
            raise ContractViolation("discounted utility lives on the positive orthant")
        if len(self.delta) != self.space.dim:
            raise ContractViolation("one discount factor per period")
        if not 0.0 < self.eps <= 1.0:
            raise ContractViolation("discount floor must lie in (0, 1]")
        if not 0.0 < self.slope_lo < self.slope_hi:
            raise ContractViolation("slope bounds need 0 < a < b")
        if any(not self.eps <= dl <= 1.0 for dl in self.delta):
            raise ContractViolation(f"discount factors must lie in [{self.eps}, 1]")
        k = np.asarray(self.knots)
        if len(k) < 1 or k[0] != 0.0 or np.any(np.diff(k) <= 0):
            raise ContractViolation("knots must start at 0 and strictly increase")
        if len(self.slopes) != len(k):
            raise ContractViolation("one slope per knot interval (the last one is unbounded)")
        if any(not self.slope_lo <= s <= self.slope_hi for s in self.slopes):
            raise ContractViolation(f"slopes must lie in [{self.slope_lo}, {self.slope_hi}]")

    @staticmethod
    def uniform_knots(hi: float, count: int) -> tuple[float, ...]:
        if count < 1:
            raise ContractViolation("need at least one knot")
        return _floats(np.linspace(0.0, hi, count, endpoint=False))

    def instantaneous(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        k = np.asarray(self.knots)
        s = np.asarray(self.slopes)
        base = np.concatenate([[0.0], np.cumsum(s[:-1] * np.diff(k))])
        idx = np.clip(np.searchsorted(k, x, side="right") - 1, 0, len(k) - 1)
        return base[idx] + s[idx] * (x - k[idx])

    def utility(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.instantaneous(pts) @ np.asarray(self.delta)

    def params(self):
        return {"delta": self.delta, "knots": self.knots, "slopes": self.slopes,
                "eps": (self.eps,), "slope_lo": (self.slope_lo,), "slope_hi": (self.slope_hi,)}


@dataclass(frozen=True)
class TotalIndifference(PreferenceSpec):
    family: ClassVar[Family] = Family.TOTAL_INDIFFERENCE

    def utility(self, points):
        return np.zeros(np.atleast_2d(points).shape[0])


@dataclass(frozen=True)
class NaturalOrder(PreferenceSpec):
    """The usual order ``x >= y`` on the real line."""

    family: ClassVar[Family] = Family.NATURAL_ORDER

    def __post_init__(self) -> None:
        if self.space.kind is not SpaceKind.REAL_LINE:
            raise ContractViolation("natural order lives on the real line")

    def utility(self, points):
        return np.atleast_2d(np.asarray(points, dtype=float))[:, 0].copy()


@dataclass(frozen=True)
class ErraticPWL(PreferenceSpec):
    """Piecewise-linear rationalizer of increasing choices on the real line.

    Equal to ``arctan`` at every base point and outside their hull.  Inside each
    gap ``[b_i, b_{i+1}]`` it rises to 1 at the first third and drops to 0 at the
    second third, so it agrees with the usual order only on the base points.
    """

    family: ClassVar[Family] = Family.ERRATIC_PWL
    level: int = 0
    base_points: tuple[float, ...] = ()
    _xs: tuple[float, ...] = field(default=(), repr=False, compare=False)
    _ys: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self) -> None:
        b = np.asarray(_floats(self.base_points))
        object.__setattr__(self, "base_points", tuple(b))
        if self.space.kind is not SpaceKind.REAL_LINE:
            raise ContractViolation("erratic rationalizer lives on the real line")
        if len(b) < 2:
            raise ContractViolation("need at least two base points")
        if np.any(np.diff(b) <= 0):
            raise ContractViolation("base points must be strictly increasing")
        gap = np.diff(b)
        one = b[:-1] + gap / 3.0
        zero = b[:-1] + 2.0 * gap / 3.0
        xs = np.empty(3 * len(gap) + 1)
        xs[0:-1:3], xs[1::3], xs[2::3], xs[-1] = b[:-1], one, zero, b[-1]
        if np.any(np.diff(xs) <= 0):
            raise ContractViolation("base points too close: interior knots collide in floating point")
        ys = np.empty_like(xs)
        ys[0::3] = np.arctan(xs[0::3])
        ys[1::3], ys[2::3] = 1.0, 0.0
        object.__setattr__(self, "_xs", tuple(xs))
        object.__setattr__(self, "_ys", tuple(ys))

    def utility(self, points):
        x = np.atleast_2d(np.asarray(points, dtype=float))[:, 0]
        xs, ys = np.asarray(self._xs), np.asarray(self._ys)
        inside = (x >= xs[0]) & (x <= xs[-1])
        return np.where(inside, np.interp(x, xs, ys), np.arctan(x))

    def params(self):
        return {"level": (float(self.level),), "base_points": self.base_points}


def erratic_utility(n: int, base_points, space: AlternativeSpace | None = None) -> ErraticPWL:
    return ErraticPWL(space or AlternativeSpace.real_line(), int(n), _floats(base_points))


def _row_lookup(points: NDArray[np.float64]) -> dict[bytes, int]:
    table = {}
    for i, row in enumerate(points):
        key = row.tobytes()
        if key in table:
            raise ContractViolation("tabulated points must be distinct")
        table[key] = i
    return table


def _lookup(table: dict[bytes, int], points: NDArray[np.float64]) -> NDArray[np.int64]:
    pts = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
    try:
        return np.array([table[row.tobytes()] for row in pts], dtype=np.int64)
    except KeyError as exc:
        raise ContractViolation("point is not in the tabulated set") from exc


@dataclass(frozen=True)
class TabulatedUtility(PreferenceSpec):
    """Utility values on a finite point set; queries off the set are errors."""

    family: ClassVar[Family] = Family.TABULATED_UTILITY
    points: tuple[tuple[float, ...], ...] = ()
    values: tuple[float, ...] = ()
    _table: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", tuple(tuple(r) for r in pts))
        object.__setattr__(self, "values", _floats(self.values))
        self.space.validate(pts, "tabulated points")
        if len(self.values) != len(pts):
            raise ContractViolation("one value per tabulated point")
        object.__setattr__(self, "_table", _row_lookup(np.ascontiguousarray(pts)))

    def utility(self, points):
        return np.asarray(self.values)[_lookup(self._table, points)]

    def params(self):
        return {"points": tuple(c for r in self.points for c in r), "values": self.values}


@dataclass(frozen=True)
class TabulatedRelation(PreferenceSpec):
    """Explicit complete relation on a finite set, ``matrix[i][j] = points[i] >= points[j]``.

    Not necessarily transitive; used to exercise the chain-condition probe.
    """

    family: ClassVar[Family] = Family.TABULATED_RELATION
    points: tuple[tuple[float, ...], ...] = ()
    matrix: tuple[tuple[bool, ...], ...] = ()
    _table: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        m = np.asarray(self.matrix, dtype=bool)
        object.__setattr__(self, "points", tuple(tuple(r) for r in pts))
        object.__setattr__(self, "matrix", tuple(tuple(bool(c) for c in r) for r in m))
        self.space.validate(pts, "tabulated points")
        if m.shape != (len(pts), len(pts)):
            raise ContractViolation("relation matrix must be square over the points")
        if not np.all(m | m.T):
            raise ContractViolation("tabulated relation must be complete")
        object.__setattr__(self, "_table", _row_lookup(np.ascontiguousarray(pts)))

    def utility(self, points):
        raise ContractViolation("tabulated relation has no utility representation")

    def weak_matrix(self, xs, ys):
        m = np.asarray(self.matrix, dtype=bool)
        return m[np.ix_(_lookup(self._table, xs), _lookup(self._table, ys))]

    def weak_rows(self, xs, ys):
        m = np.asarray(self.matrix, dtype=bool)
        return m[_lookup(self._table, xs), _lookup(self._table, ys)]


# -- queries -----------------------------------------------------------------

def _check_point(p: PreferenceSpec, x) -> NDArray[np.float64]:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != p.space.dim:
        raise ContractViolation(
            f"point of shape {arr.shape} does not match {p.space.kind.value} of dim {p.space.dim}"
        )
    return arr


def weak_prefers(p: PreferenceSpec, x, y) -> bool:
    xa, ya = _check_point(p, x), _check_point(p, y)
    return bool(p.weak_rows(xa[None, :], ya[None, :])[0])


def strictly_prefers(p: PreferenceSpec, x, y) -> bool:
    return weak_prefers(p, x, y) and not weak_prefers(p, y, x)


# -- flat key = value serialization ------------------------------------------

_CLASSES: dict[Family, type[PreferenceSpec]] = {
    Family.EXPECTED_UTILITY: ExpectedUtility,
    Family.DISCOUNTED_UTILITY: DiscountedUtility,
    Family.TOTAL_INDIFFERENCE: TotalIndifference,
    Family.NATURAL_ORDER: NaturalOrder,
    Family.ERRATIC_PWL: ErraticPWL,
    Family.TABULATED_UTILITY: TabulatedUtility,
    Family.TABULATED_RELATION: TabulatedRelation,
}


def _fmt(values) -> str:
    return ",".join(format(float(v), ".17g") for v in values)


def _parse(text: str) -> tuple[float, ...]:
    text = text.strip()
    return tuple(float(t) for t in text.split(",")) if text else ()


def dumps_preference(p: PreferenceSpec) -> str:
    """Serialize to ``key = value`` lines; arrays are comma separated with 17 significant digits."""
    lines = [f"family = {p.family.value}", f"space = {p.space.kind.value}", f"dim = {p.space.dim}"]
    if p.space.support is not None:
        lines.append(f"support_lo = {_fmt(p.space.support[0])}")
        lines.append(f"support_hi = {_fmt(p.space.support[1])}")
    if isinstance(p, TabulatedRelation):
        lines.append(f"points = {_fmt(c for r in p.points for c in r)}")
        lines.append("matrix = " + ",".join(str(int(c)) for r in p.matrix for c in r))
    else:
        for key, vals in p.params().items():
            lines.append(f"{key} = {_fmt(vals)}")
    return "\n".join(lines) + "\n"


def loads_preference(text: str) -> PreferenceSpec:
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ContractViolation(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        kv[key.strip()] = value.strip()
    try:
        family = Family(kv["family"])
        kind = SpaceKind(kv["space"])
        dim = int(kv["dim"])
        support = None
        if "support_lo" in kv:
            support = (_parse(kv["support_lo"]), _parse(kv["support_hi"]))
        space = AlternativeSpace(kind, dim, support)
        if family is Family.EXPECTED_UTILITY:
            return ExpectedUtility(space, _parse(kv["v"]))
        if family is Family.DISCOUNTED_UTILITY:
            return DiscountedUtility(
                space, _parse(kv["delta"]), _parse(kv["knots"]), _parse(kv["slopes"]),
                float(kv["eps"]), float(kv["slope_lo"]), float(kv["slope_hi"]),
            )
        if family is Family.TOTAL_INDIFFERENCE:
            return TotalIndifference(space)
        if family is Family.NATURAL_ORDER:
            return NaturalOrder(space)
        if family is Family.ERRATIC_PWL:
            return ErraticPWL(space, int(float(kv["level"])), _parse(kv["base_points"]))
        flat = np.asarray(_parse(kv["points"])).reshape(-1, dim)
        if family is Family.TABULATED_UTILITY:
            return TabulatedUtility(space, flat, _parse(kv["values"]))
        bits = np.array([int(t) for t in kv["matrix"].split(",")], dtype=bool)
        return TabulatedRelation(space, flat, bits.reshape(len(flat), len(flat)))
    except KeyError as exc:
        raise ContractViolation(f"missing key {exc.args[0]!r} in preference text") from exc
    except ValueError as exc:
        if isinstance(exc, ContractViolation):
            raise
        raise ContractViolation(f"malformed preference text: {exc}") from exc


# -- parameter templates for search and sampling -----------------------------

class FamilyTemplate:
    """Finite parameterization of a family: a box of parameter vectors mapped to preferences."""

    n_params: int

    def from_params(self, theta: NDArray[np.float64]) -> PreferenceSpec:
        raise NotImplementedError

    def to_params(self, p: PreferenceSpec) -> NDArray[np.float64]:
        raise NotImplementedError

    def random_params(self, rng: np.random.Generator) -> NDArray[np.float64]:
        raise NotImplementedError

    def clip(self, theta: NDArray[np.float64]) -> NDArray[np.float64]:
        return theta

    def scale(self) -> NDArray[np.float64]:
        """Characteristic size of each coordinate, used for initial step lengths."""
        return np.ones(self.n_params)


@dataclass(frozen=True)
class EUTemplate(FamilyTemplate):
    space: AlternativeSpace

    @property
    def n_params(self) -> int:
        return self.space.dim

    def from_params(self, theta):
        return ExpectedUtility.from_index(self.space, theta)

    def to_params(self, p):
        return np.asarray(p.v)

    def random_params(self, rng):
        # Gaussian then normalize: uniform on the sum-zero sphere
        return ExpectedUtility.from_index(self.space, rng.standard_normal(self.space.dim)).index

    def scale(self):
        return np.full(self.n_params, 0.5)


@dataclass(frozen=True)
class DUTemplate(FamilyTemplate):
    space: AlternativeSpace
    knots: tuple[float, ...]
    eps: float = DEFAULT_EPS
    slope_lo: float = DEFAULT_SLOPE_LO
    slope_hi: float = DEFAULT_SLOPE_HI

    @property
    def n_params(self) -> int:
        return self.space.dim + len(self.knots)

    def _bounds(self):
        d, m = self.space.dim, len(self.knots)
        lo = np.concatenate([np.full(d, self.eps), np.full(m, self.slope_lo)])
        hi = np.concatenate([np.ones(d), np.full(m, self.slope_hi)])
        return lo, hi

    def from_params(self, theta):
        d = self.space.dim
        th = self.clip(np.asarray(theta, dtype=float))
        return DiscountedUtility(self.space, th[:d], self.knots, th[d:], self.eps, self.slope_lo, self.slope_hi)

    def to_params(self, p):
        return np.concatenate([p.delta, p.slopes])

    def random_params(self, rng):
        lo, hi = self._bounds()
        return lo + (hi - lo) * rng.random(self.n_params)

    def clip(self, theta):
        lo, hi = self._bounds()
        return np.clip(theta, lo, hi)

    def scale(self):
        lo, hi = self._bounds()
        return (hi - lo) / 4.0
