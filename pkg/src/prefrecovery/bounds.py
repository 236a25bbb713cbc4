"""Monte Carlo measurements behind the finite-sample guarantees.

The fit measure used here is the probability that a subject drawn from the
true noisy choice model makes a choice consistent with a candidate
preference, on a random problem ``{x, y}`` with ``x, y`` i.i.d. uniform:

    mu(A) = E[ 1[x >=_A y] q(x, y) + 1[y >=_A x] q(y, x) ]

where ``q(x, y)`` is the probability of choosing ``x``.  It lies in [0, 1] and
equals twice the integral over the ordered-pair measure.  All candidates are
evaluated on the same draws (common random numbers), so differences between
candidates carry far less noise than the values themselves.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from . import rng as rngmod
from .errors import ContractViolation, EstimationError
from .estimator import EstimatorConfig, Method, achievable_patterns, kemeny_minimize_eu, kemeny_minimize_search
from .experiment import ErrorModel, random_plan, simulate_noisy
from .metric import EvaluationGrid, relation_graph, hausdorff_distance
from .preferences import EUTemplate, FamilyTemplate, PreferenceSpec
from .spaces import AlternativeSpace

LN_4E2 = math.log(4.0) + 2.0
LOCAL_SCALES = (1e-3, 1.0)


# -- fit measure ---------------------------------------------------------------------

def _mu_draws(space: AlternativeSpace, mc: int, seed: int) -> tuple[NDArray, NDArray]:
    d = space.dim
    u = rngmod.uniforms(seed, "mu-pairs", 2 * mc * d).reshape(mc, 2, d)
    return space.from_uniforms(u[:, 0]), space.from_uniforms(u[:, 1])


def mu_samples(
    pA: PreferenceSpec, p_true: PreferenceSpec, em: ErrorModel, space: AlternativeSpace, mc: int, seed: int,
    draws: tuple[NDArray, NDArray] | None = None,
) -> NDArray[np.float64]:
    """Per-draw consistency probabilities; their mean is ``estimate_mu``."""
    if mc < 1:
        raise ContractViolation("mc must be >= 1")
    xs, ys = draws if draws is not None else _mu_draws(space, mc, seed)
    q_xy = em.q(p_true, xs, ys)
    a_xy = pA.weak_rows(xs, ys)
    a_yx = pA.weak_rows(ys, xs)
    return a_xy * q_xy + a_yx * (1.0 - q_xy)


def estimate_mu(
    pA: PreferenceSpec, p_true: PreferenceSpec, em: ErrorModel, space: AlternativeSpace, mc: int, seed: int
) -> float:
    return float(mu_samples(pA, p_true, em, space, mc, seed).mean())


# -- identification gap ----------------------------------------------------------------

@dataclass(frozen=True)
class GapEstimate:
    """Smallest measured fit advantage of the truth over probes at distance >= eta.

    This is an upper bound on the infimum over the whole class (only finitely
    many probes are examined).
    """

    eta: float
    gap: float
    stderr: float
    pairs_probed: int
    mc_samples: int
    attempts: int
    nearest_distance: float

    def conservative(self, k: float = 3.0) -> float:
        return self.gap + k * self.stderr


def _propose(template: FamilyTemplate, p_true: PreferenceSpec, g: np.random.Generator) -> PreferenceSpec:
    if g.random() < 0.5:
        theta = template.random_params(g)
    else:
        lo, hi = np.log(LOCAL_SCALES)
        s = float(np.exp(g.uniform(lo, hi)))
        theta = template.to_params(p_true) + s * template.scale() * g.standard_normal(template.n_params)
    return template.from_params(template.clip(theta))


def estimate_r(
    template: FamilyTemplate,
    p_true: PreferenceSpec,
    eta: float,
    grid: EvaluationGrid,
    em: ErrorModel,
    space: AlternativeSpace,
    probes: int,
    mc: int,
    seed: int,
    max_attempts: int | None = None,
) -> GapEstimate:
    if eta <= 0:
        raise ContractViolation("eta must be positive")
    if probes < 1:
        raise ContractViolation("need at least one probe")
    g = rngmod.stream(seed, "gap-probes")
    true_graph = relation_graph(p_true, grid)
    max_attempts = max_attempts or 200 * probes
    accepted: list[tuple[PreferenceSpec, float]] = []
    attempts = 0
    while len(accepted) < probes and attempts < max_attempts:
        attempts += 1
        try:
            cand = _propose(template, p_true, g)
        except ContractViolation:
            continue
        dist = hausdorff_distance(relation_graph(cand, grid), true_graph, grid)
        if dist >= eta:
            accepted.append((cand, dist))
    if len(accepted) < probes:
        raise EstimationError(
            f"found {len(accepted)} of {probes} preferences at grid distance >= {eta} in {attempts} draws"
        )
    draws = _mu_draws(space, mc, seed)
    base = mu_samples(p_true, p_true, em, space, mc, seed, draws)
    gaps, errs = [], []
    for cand, _ in accepted:
        diff = base - mu_samples(cand, p_true, em, space, mc, seed, draws)
        gaps.append(diff.mean())
        errs.append(diff.std(ddof=1) / np.sqrt(mc) if mc > 1 else 0.0)
    k = int(np.argmin(gaps))
    return GapEstimate(eta, float(gaps[k]), float(errs[k]), probes, mc, attempts,
                       float(min(d for _, d in accepted)))


# -- empirical sample complexity -----------------------------------------------------------

@dataclass(frozen=True)
class ComplexityRow:
    eta: float
    delta: float
    n_star: int | None
    replications: int
    schedule: tuple[int, ...]
    success_rates: tuple[float, ...]

    @property
    def reached(self) -> bool:
        return self.n_star is not None

    @property
    def success_rate(self) -> float | None:
        if self.n_star is None:
            return None
        return self.success_rates[self.schedule.index(self.n_star)]


def default_schedule(count: int = 6, base: int = 25) -> list[int]:
    return [base * 2 ** k for k in range(count)]


def _fit(template: FamilyTemplate, R, space: AlternativeSpace, cfg: EstimatorConfig):
    if isinstance(template, EUTemplate):
        return kemeny_minimize_eu(R, space.dim, cfg, space).estimate
    return kemeny_minimize_search(template, R, cfg).estimate


def replication_distances(
    p_true: PreferenceSpec, template: FamilyTemplate, em: ErrorModel, space: AlternativeSpace,
    grid: EvaluationGrid, schedule: list[int], seed: int, cfg: EstimatorConfig | None = None,
) -> list[float]:
    """One replication: nested random plan, noisy choices, a fit per prefix, grid distance to truth."""
    if isinstance(template, EUTemplate):
        cfg = cfg or EstimatorConfig()
    else:
        cfg = cfg or EstimatorConfig(method=Method.SEARCH, seed=seed)
    plan = random_plan(space, max(schedule), seed)
    R = simulate_noisy(p_true, plan, em, seed)
    true_graph = relation_graph(p_true, grid)
    out = []
    for n in schedule:
        est = _fit(template, R.subset(np.arange(n)), space, cfg)
        out.append(hausdorff_distance(relation_graph(est, grid), true_graph, grid))
    return out


def distance_table(
    p_true, template, em, space, grid, schedule, replications, seed, threads: int = 1, cfg=None
) -> NDArray[np.float64]:
    """``(replications, len(schedule))`` distances; row ``r`` uses seed ``replication_seed(seed, r)``."""
    seeds = [rngmod.replication_seed(seed, r) for r in range(replications)]

    def run(s):
        return replication_distances(p_true, template, em, space, grid, list(schedule), s, cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, seeds))
    else:
        rows = [run(s) for s in seeds]
    return np.array(rows)


def estimate_sample_complexity(
    p_true: PreferenceSpec,
    template: FamilyTemplate,
    eta: float,
    delta: float,
    em: ErrorModel,
    space: AlternativeSpace,
    grid: EvaluationGrid,
    replications: int,
    n_schedule: list[int],
    seed: int,
    threads: int = 1,
    table: NDArray[np.float64] | None = None,
) -> ComplexityRow:
    if replications < 20:
        raise ContractViolation("need at least 20 replications")
    if any(b <= a for a, b in zip(n_schedule, n_schedule[1:])):
        raise ContractViolation("n_schedule must be strictly increasing")
    if not 0.0 < delta <= 1.0:
        raise ContractViolation("delta must lie in (0, 1]")
    if table is None:
        table = distance_table(p_true, template, em, space, grid, n_schedule, replications, seed, threads)
    rates = tuple(float(r) for r in (table < eta).mean(axis=0))
    n_star = next((n for n, r in zip(n_schedule, rates) if r >= 1.0 - delta), None)
    return ComplexityRow(eta, delta, n_star, replications, tuple(n_schedule), rates)


# -- explicit finite-sample bound ---------------------------------------------------------------

@dataclass(frozen=True)
class BoundTerms:
    main: float
    c_linear: float
    c_sqrt: float

    @property
    def value(self) -> float:
        return max(self.main, self.c_linear, self.c_sqrt)


def theorem3_terms(V: int, r: float, delta: float) -> BoundTerms:
    """Terms of the VC-based sample-size bound.

    ``main = r^-2 (144 sqrt(V ln(4e^2)) + sqrt(2 ln(2/delta)))^2``.  The side
    condition is reported under two readings: ``24^2 V ln(4e^2) / 5`` and its
    square-root form ``24 sqrt(V ln(4e^2) / 5)``.
    """
    if V < 1:
        raise ContractViolation("VC dimension must be >= 1")
    if not r > 0:
        raise ContractViolation("gap r must be positive")
    if not 0.0 < delta < 1.0:
        raise ContractViolation("delta must lie in (0, 1)")
    main = (144.0 * math.sqrt(V * LN_4E2) + math.sqrt(2.0 * math.log(2.0 / delta))) ** 2 / r ** 2
    return BoundTerms(main, 24.0 ** 2 * V * LN_4E2 / 5.0, 24.0 * math.sqrt(V * LN_4E2 / 5.0))


def theorem3_bound(V: int, r: float, delta: float) -> float:
    """Conservative value: the largest of the main term and both side-condition readings."""
    return theorem3_terms(V, r, delta).value


# -- shattering ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class ShatterResult:
    max_patterns: int
    shattered: bool
    trials: int
    witness: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...] = ()


def shatter_probe(d: int, k: int, trials: int, seed: int, family: str = "expected_utility") -> ShatterResult:
    """Largest number of strict choice patterns the class realizes on random k-sets of problems."""
    if k < 1 or trials < 1:
        raise ContractViolation("need k >= 1 and trials >= 1")
    if family != "expected_utility":
        raise ContractViolation("exact pattern counting is available for expected utility only")
    space = AlternativeSpace.simplex(d)
    best, witness = -1, ()
    for t in range(trials):
        plan = random_plan(space, k, rngmod.replication_seed(seed, t))
        count = achievable_patterns(plan.xs, plan.ys).shape[0]
        if count > best:
            best = count
            witness = tuple((tuple(x), tuple(y)) for x, y in zip(plan.xs, plan.ys))
        if best == 2 ** k:
            break
    return ShatterResult(best, best == 2 ** k, trials, witness)


def eu_template(d: int) -> EUTemplate:
    return EUTemplate(AlternativeSpace.simplex(d))

