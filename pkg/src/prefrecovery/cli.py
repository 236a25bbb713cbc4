"""Command-line front end.

Subcommands: simulate | estimate | rates | demo-nonclosed | check-properties.
Exit codes: 0 success, 2 validation error, 3 I/O error, 4 internal contract violation.

All inputs are validated before any output is written, and every output file
is written to a temporary name and renamed into place, so a failed run leaves
no partial files behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import distance_table, estimate_r, estimate_sample_complexity, theorem3_bound
from .dominance import DominanceKind, DominanceRelation
from .errors import ConfigError, EstimationError, PreferenceError
from .estimator import EstimatorConfig, Method, kemeny_loss, kemeny_minimize_eu, kemeny_minimize_search
from .experiment import (
    ErrorModel,
    TieRule,
    choices_from_csv,
    choices_to_csv,
    exhaustive_plan,
    random_plan,
    simulate_noiseless,
    simulate_noisy,
)
from .config import RunConfig
from .metric import EvaluationGrid, hausdorff_distance, relation_graph
from .preferences import (
    DiscountedUtility,
    DUTemplate,
    ExpectedUtility,
    EUTemplate,
    NaturalOrder,
    PreferenceSpec,
    TotalIndifference,
    erratic_utility,
    loads_preference,
)
from .probes import (
    irreflexivity_probe,
    is_grodal_transitive_probe,
    is_locally_strict_probe,
    monotonicity_probe,
    openness_probe,
)
from .spaces import AlternativeSpace, SpaceKind

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_CONTRACT = 0, 2, 3, 4
DEFAULT_BOX = {SpaceKind.POSITIVE_ORTHANT: (0.25, 2.0), SpaceKind.DATED_REWARD: (0.25, 2.0),
               SpaceKind.REAL_LINE: (-1.0, 1.0)}


class ValidationFailure(Exception):
    """Raised while building inputs; mapped to exit code 2."""


# -- building blocks from config ------------------------------------------------------

def build_space(cfg: RunConfig) -> AlternativeSpace:
    kind = SpaceKind(cfg.choice("space", tuple(k.value for k in SpaceKind)))
    dim = {SpaceKind.DATED_REWARD: 2, SpaceKind.REAL_LINE: 1}.get(kind) or cfg.integer("dim", 2)
    if kind in DEFAULT_BOX:
        lo = cfg.numbers("support_lo") or [DEFAULT_BOX[kind][0]]
        hi = cfg.numbers("support_hi") or [DEFAULT_BOX[kind][1]]
        return AlternativeSpace(kind, dim, (tuple(lo), tuple(hi)))
    return AlternativeSpace(kind, dim)


def _du_parts(cfg: RunConfig, space: AlternativeSpace):
    m = cfg.integer("du_knots", 1)
    knots = DiscountedUtility.uniform_knots(float(space.box[1].max()), m)
    return knots, cfg.number("du_eps", 0.0, 1.0), cfg.number("du_a", 0.0), cfg.number("du_b", 0.0)


def build_truth(cfg: RunConfig, space: AlternativeSpace) -> PreferenceSpec:
    path = cfg.text("truth_file")
    if path:
        p = loads_preference(Path(path).read_text())
        if p.space != space:
            raise ConfigError("truth_file describes a different space than the config")
        return p
    family = cfg.choice("family", ("expected_utility", "discounted_utility", "total_indifference",
                                   "natural_order"))
    truth = cfg.numbers("truth")
    if family == "expected_utility":
        # default index: strictly increasing and free of rational ties on dyadic lattices
        v = truth or list(np.log(np.arange(2, space.dim + 2)))
        return ExpectedUtility.from_index(space, v)
    if family == "discounted_utility":
        knots, eps, a, b = _du_parts(cfg, space)
        delta = truth or [max(eps, 0.9 ** i) for i in range(space.dim)]
        slopes = np.linspace(b, a, len(knots)) if len(knots) > 1 else [0.5 * (a + b)]
        return DiscountedUtility(space, delta, knots, slopes, eps, a, b)
    if family == "natural_order":
        return NaturalOrder(space)
    return TotalIndifference(space)


def build_template(cfg: RunConfig, space: AlternativeSpace):
    family = cfg.text("family")
    if family == "expected_utility":
        return EUTemplate(space)
    if family == "discounted_utility":
        knots, eps, a, b = _du_parts(cfg, space)
        return DUTemplate(space, knots, eps, a, b)
    raise ConfigError(f"family {family!r} has no parameter template for estimation")


def build_error_model(cfg: RunConfig) -> ErrorModel | None:
    noise = cfg.choice("noise", ("none", "exponential", "linear_clamp"))
    if noise == "none":
        return None
    if noise == "exponential":
        return ErrorModel.exponential(cfg.number("kappa", 0.0))
    return ErrorModel.linear_clamp(cfg.number("slope", 0.0))


def build_estimator(cfg: RunConfig) -> EstimatorConfig:
    method = cfg.choice("method", ("exact", "search"))
    return EstimatorConfig(
        Method.EXACT if method == "exact" else Method.SEARCH,
        cfg.choice("tie_break", ("max_margin", "lexicographic")),
        cfg.integer("seed", 0),
        cfg.integer("starts", 1),
        cfg.integer("iterations", 1),
        cfg.number("step_decay", 0.0, 1.0),
    )


def build_grid(cfg: RunConfig, space: AlternativeSpace) -> EvaluationGrid:
    m = cfg.integer("grid_m", 2) if cfg.text("grid_m") else None
    return EvaluationGrid.lattice(space, m)


def provenance(cfg: RunConfig) -> dict[str, object]:
    return {"seed": cfg.integer("seed", 0), "config_hash": cfg.hash, "version": __version__}


# -- output -----------------------------------------------------------------------------

def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: dict[str, object], columns: list[str], rows: list[list[object]]) -> str:
    buf = io.StringIO()
    for k, v in header.items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x: float | None) -> str:
    return "" if x is None else format(float(x), ".17g")


# -- commands ---------------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, out: Path, threads: int) -> dict[str, str]:
    space = build_space(cfg)
    truth = build_truth(cfg, space)
    em = build_error_model(cfg)
    n = cfg.integer("n", 1)
    seed = cfg.integer("seed", 0)
    design = cfg.choice("design", ("exhaustive", "random"))
    tie_rule = TieRule(cfg.choice("tie_rule", tuple(t.value for t in TieRule)))

    def run():
        plan = exhaustive_plan(space, n) if design == "exhaustive" else random_plan(space, n, seed)
        R = simulate_noiseless(truth, plan, tie_rule) if em is None else simulate_noisy(truth, plan, em, seed)
        meta = {**provenance(cfg), "n": n, "records": R.n, "ties": int(R.tie_flags.sum()),
                "design": design, "noise": cfg.text("noise"), "family": truth.family.value}
        header = {**provenance(cfg), "space": space.kind.value, "dim": space.dim}
        return {"choices.csv": choices_to_csv(R, header),
                "choices.meta.json": json.dumps(meta, sort_keys=True, indent=2) + "\n"}

    return {"_run": run}


def cmd_estimate(cfg: RunConfig, out: Path, threads: int, data: str) -> dict[str, str]:
    space = build_space(cfg)
    ecfg = build_estimator(cfg)
    template = build_template(cfg, space) if ecfg.method is Method.SEARCH else None
    if ecfg.method is Method.EXACT and cfg.text("family") != "expected_utility":
        raise ConfigError("exact enumeration is available for expected utility only")
    text = Path(data).read_text()
    R, _ = choices_from_csv(text)
    space.validate(R.chosen, "chosen points")
    space.validate(R.rejected, "rejected points")

    def run():
        if ecfg.method is Method.EXACT:
            res = kemeny_minimize_eu(R, space.dim, ecfg, space)
        else:
            res = kemeny_minimize_search(template, R, ecfg)
        record = {**res.to_record(), **provenance(cfg), "data": str(data), "n": R.n}
        log = out / "estimates.jsonl"
        previous = log.read_text() if log.exists() else ""
        return {"estimates.jsonl": previous + json.dumps(record, sort_keys=True) + "\n",
                "_stdout": json.dumps(record, sort_keys=True)}

    return {"_run": run}


def cmd_rates(cfg: RunConfig, out: Path, threads: int) -> dict[str, str]:
    space = build_space(cfg)
    truth = build_truth(cfg, space)
    template = build_template(cfg, space)
    em = build_error_model(cfg) or ErrorModel.exponential(cfg.number("kappa", 0.0))
    grid = build_grid(cfg, space)
    etas = cfg.numbers("etas")
    delta = cfg.number("delta", 0.0, 1.0)
    if not 0.0 < delta < 1.0:
        raise ConfigError("delta must lie strictly between 0 and 1")
    reps = cfg.integer("replications", 20)
    schedule = cfg.integers("n_schedule")
    probes, mc, seed = cfg.integer("probes", 1), cfg.integer("mc", 2), cfg.integer("seed", 0)
    if not etas or any(e <= 0 for e in etas):
        raise ConfigError("etas must list positive numbers")
    if not schedule or any(b <= a for a, b in zip(schedule, schedule[1:])) or schedule[0] < 1:
        raise ConfigError("n_schedule must be a strictly increasing list of positive integers")
    vc = space.dim + 1

    def run():
        table = distance_table(truth, template, em, space, grid, schedule, reps, seed, threads)
        prov = provenance(cfg)
        crow, grow = [], []
        for eta in etas:
            row = estimate_sample_complexity(truth, template, eta, delta, em, space, grid, reps, schedule,
                                             seed, table=table)
            try:
                gap = estimate_r(template, truth, eta, grid, em, space, probes, mc, seed)
                r_hat = gap.conservative()
                grow.append([eta, _fmt(gap.gap), _fmt(gap.stderr), gap.pairs_probed, gap.mc_samples,
                             gap.attempts, "ok", prov["seed"], prov["config_hash"], prov["version"]])
            except EstimationError:
                r_hat = None
                grow.append([eta, "", "", probes, mc, "", "infeasible", prov["seed"], prov["config_hash"],
                             prov["version"]])
            bound = _fmt(theorem3_bound(vc, r_hat, delta)) if r_hat and r_hat > 0 else ""
            for n, rate in zip(schedule, row.success_rates):
                crow.append([eta, delta, n, _fmt(rate), row.n_star if row.reached else "not-reached", reps,
                             bound, prov["seed"], prov["config_hash"], prov["version"]])
        return {
            "complexity.csv": _csv_text(prov, ["eta", "delta", "n", "success_rate", "n_star", "replications",
                                               "theorem3_bound", "seed", "config_hash", "version"], crow),
            "gap.csv": _csv_text(prov, ["eta", "gap", "stderr", "pairs_probed", "mc", "attempts", "status",
                                        "seed", "config_hash", "version"], grow),
        }

    return {"_run": run}


def demo_rows(n_max: int, grid_points: int, space: AlternativeSpace | None = None) -> list[dict[str, float]]:
    """Erratic rationalizers on exhaustive prefixes of the real line, with their grid distances."""
    space = space or AlternativeSpace.real_line()
    if space.kind is not SpaceKind.REAL_LINE:
        raise ConfigError("the non-closedness demo runs on the real line")
    lo, hi = space.box
    grid = EvaluationGrid(space, tuple((x,) for x in np.linspace(lo[0], hi[0], grid_points)))
    truth = NaturalOrder(space)
    g_ind = relation_graph(TotalIndifference(space), grid)
    g_true = relation_graph(truth, grid)
    full = exhaustive_plan(space, n_max)
    rows = []
    for n in range(1, n_max + 1):
        plan = full.prefix(n)
        R = simulate_noiseless(truth, plan)
        base = np.unique(np.concatenate([plan.xs, plan.ys]).ravel())
        u = erratic_utility(n, base, space)
        loss = kemeny_loss(u, R)
        if loss != 0.0:
            raise EstimationError(f"erratic rationalizer has loss {loss} at n={n}")
        g = relation_graph(u, grid)
        rows.append({"n": n, "base_points": len(base), "loss": loss,
                     "dist_indifference": hausdorff_distance(g, g_ind, grid),
                     "dist_truth": hausdorff_distance(g, g_true, grid)})
    return rows


def cmd_demo_nonclosed(cfg: RunConfig, out: Path, threads: int) -> dict[str, str]:
    space = build_space(cfg)
    if space.kind is not SpaceKind.REAL_LINE:
        raise ConfigError("demo-nonclosed needs space = real_line")
    n_max = cfg.integer("demo_n_max", 1)
    m = cfg.integer("demo_grid", 2)

    def run():
        rows = demo_rows(n_max, m, space)
        prov = provenance(cfg)
        body = [[r["n"], r["base_points"], _fmt(r["loss"]), _fmt(r["dist_indifference"]), _fmt(r["dist_truth"]),
                 prov["seed"], prov["config_hash"], prov["version"]] for r in rows]
        return {"demo_nonclosed.csv": _csv_text(
            {**prov, "grid_points": m},
            ["n", "base_points", "loss", "dist_indifference", "dist_truth", "seed", "config_hash", "version"],
            body)}

    return {"_run": run}


def cmd_check_properties(cfg: RunConfig, out: Path, threads: int) -> dict[str, str]:
    space = build_space(cfg)
    truth = build_truth(cfg, space)
    grid = build_grid(cfg, space)
    radius = cfg.number("radius", 0.0)
    samples = cfg.integer("samples", 1)
    seed = cfg.integer("seed", 0)
    if radius <= 0:
        raise ConfigError("radius must be positive")

    def run():
        results = [is_locally_strict_probe(truth, grid, radius), is_grodal_transitive_probe(truth, grid, seed=seed)]
        if isinstance(truth, DiscountedUtility):
            results.append(monotonicity_probe(truth, DominanceRelation(DominanceKind.GG), samples, seed))
        elif isinstance(truth, ExpectedUtility) and np.all(np.diff(truth.index) > 0):
            results.append(monotonicity_probe(truth, DominanceRelation(DominanceKind.FSD), samples, seed))
        d = max(space.dim, 2)
        for kind in DominanceKind:
            if kind is DominanceKind.MENU_SUPPORT:
                continue
            rel = DominanceRelation(kind, 0.5 if kind is DominanceKind.GG_ALPHA else 0.0)
            results.append(irreflexivity_probe(rel, d, 1000, seed))
            results.append(openness_probe(rel, d, samples, seed=seed))
        prov = provenance(cfg)
        head = "".join(f"# {k}={v}\n" for k, v in prov.items())
        head += f"# family={truth.family.value}\n"
        text = head + "\n".join(r.line() for r in results) + "\n"
        return {"properties.txt": text, "_stdout": text.rstrip("\n")}

    return {"_run": run}


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "rates": cmd_rates,
    "demo-nonclosed": cmd_demo_nonclosed,
    "check-properties": cmd_check_properties,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prefrecovery", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", default=".", help="output directory (default: current directory)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for replication loops")
        if name == "estimate":
            p.add_argument("data", help="choice-data CSV produced by 'simulate'")
        p.add_argument("overrides", nargs="*", metavar="key=value", help="config overrides")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    # validation phase: nothing is written here
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        cfg.apply_overrides(args.overrides)
        if args.seed is not None:
            cfg.set("seed", str(args.seed))
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        extra = (args.data,) if args.command == "estimate" else ()
        plan = COMMANDS[args.command](cfg, out, args.threads, *extra)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PreferenceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    # computation phase
    try:
        files = plan["_run"]()
    except (PreferenceError, ValueError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    stdout = files.pop("_stdout", None)
    try:
        for name, text in files.items():
            atomic_write(out / name, text)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if stdout:
        print(stdout)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
