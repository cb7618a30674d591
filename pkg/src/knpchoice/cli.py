"""Command-line interface.

Subcommands: fit, cv, effects, bootstrap, simulate.  Data files are CSV with
header y,v,w1,...,wd; models are versioned JSON.  Every command writes its
resolved settings to run_config.json in the output directory.  Exit codes:
0 success, 1 invalid inputs or configuration, 2 numerical failure.
"""

import argparse
import csv
import json
import os
import re
import sys
from dataclasses import replace

import numpy as np

from . import __version__, util
from .core import Dataset, FitConfig, fit
from .effects import ape, conditional_ape, coord_index
from .errors import KnpChoiceError, NumericalError, ValidationError
from .inference import ApeTarget, BootstrapSpec, bootstrap
from .modelio import config_hash, load_model, save_model
from .selection import CvPlan, cross_validate
from .simulation import DEFAULT_TUNING, METHODS, SimDesign, replicate_table


class _Parser(argparse.ArgumentParser):
    """argparse exits usage errors with code 2; this package reserves 2 for
    numerical failures, so remap usage errors to 1."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


_WHERE_RE = re.compile(r"^\s*(\w+)\s*(<=|>=|==|!=|<|>)\s*(-?[\d.eE+]+)\s*$")


def parse_where(clauses, d_w):
    """Build a region predicate from clauses like 'w1>0.5' or 'v<=2'."""
    ops = {
        "<": np.less,
        ">": np.greater,
        "<=": np.less_equal,
        ">=": np.greater_equal,
        "==": np.equal,
        "!=": np.not_equal,
    }
    parsed = []
    for clause in clauses:
        m = _WHERE_RE.match(clause)
        if not m:
            raise ValidationError(
                f"--where {clause!r} not understood; expected column op value"
            )
        col, op, value = m.group(1).lower(), m.group(2), float(m.group(3))
        if col == "v":
            j = -1
        else:
            j = coord_index(col, d_w)
            if j == 0:
                raise ValidationError(f"--where column must be v or w1..w{d_w}")
            j -= 1
        parsed.append((j, ops[op], value))

    def region(v, w):
        mask = np.ones(v.shape[0], dtype=bool)
        for j, op, value in parsed:
            mask &= op(v if j < 0 else w[:, j], value)
        return mask

    region.__name__ = " and ".join(clauses)
    return region


def _read_json(path):
    try:
        with open(path) as fh:
            out = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(out, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    return out


def _load_dataset(path):
    y, v, w = util.read_data_csv(path)
    return Dataset(y, v, w)


def _out_dir(args):
    out = args.out_dir or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_run_config(out, payload):
    path = os.path.join(out, "run_config.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _fit_config(args, extra_keys=()):
    """FitConfig from --config JSON (if given) with --seed override."""
    raw = _read_json(args.config) if args.config else {}
    leftovers = {k: raw.pop(k) for k in list(extra_keys) if k in raw}
    config = FitConfig.from_dict(raw)
    if args.seed is not None:
        config = replace(config, seed=int(args.seed))
    return config, leftovers


def cmd_fit(args):
    data = _load_dataset(args.data)
    config, _ = _fit_config(args)
    config.validate(data.d_w)
    out = _out_dir(args)
    model = fit(data, config)
    save_model(model, os.path.join(out, "model.json"))
    _write_run_config(out, {"command": "fit", "data": args.data, "config": config.to_dict()})
    best = model.diagnostics.restarts[model.diagnostics.best_restart]
    print(
        f"fit: n={data.n} d_w={data.d_w} objective={model.objective_value:.6f} "
        f"components={model.n_components} rkhs_norm={model.rkhs_norm:.4f} "
        f"iterations={best.iterations} status={best.status}"
    )
    print(f"model written to {os.path.join(out, 'model.json')}")
    return 0


def cmd_cv(args):
    data = _load_dataset(args.data)
    if not args.config:
        raise ValidationError("cv requires --config with a 'grid' entry")
    config, extra = _fit_config(args, extra_keys=("grid", "folds", "cv_seed"))
    config.validate(data.d_w)
    if "grid" not in extra:
        raise ValidationError("cv config must contain 'grid': [[radius, order, m], ...]")
    plan = CvPlan(
        grid=tuple(tuple(t) for t in extra["grid"]),
        folds=int(extra.get("folds", 5)),
        seed=int(extra.get("cv_seed", 0)),
    )
    out = _out_dir(args)
    result = cross_validate(data, plan, config)
    result.to_csv(os.path.join(out, "cv_scores.csv"))
    best = result.best_config(config)
    with open(os.path.join(out, "best_config.json"), "w") as fh:
        json.dump(best.to_dict(), fh, indent=1)
        fh.write("\n")
    _write_run_config(
        out,
        {
            "command": "cv",
            "data": args.data,
            "config": config.to_dict(),
            "grid": [list(t) for t in plan.grid],
            "folds": plan.folds,
            "cv_seed": plan.seed,
        },
    )
    radius, order, m = result.best
    print(f"cv: best radius={radius} order={order} n_components={m}")
    print(f"scores written to {os.path.join(out, 'cv_scores.csv')}")
    return 0


def _check_model_data(model, data):
    if model.d_w != data.d_w:
        raise ValidationError(
            f"model was fit with d_w={model.d_w} but data has d_w={data.d_w}"
        )


def cmd_effects(args):
    model = load_model(args.model)
    data = _load_dataset(args.data)
    _check_model_data(model, data)
    region = parse_where(args.where, data.d_w) if args.where else None
    if region is None:
        value = ape(model, data, args.coord)
        n_used = data.n
    else:
        mask = region(data.v, data.w)
        if not mask.any():
            raise ValidationError(f"region {region.__name__!r} selects no observations")
        value = conditional_ape(model, data, args.coord, mask)
        n_used = int(mask.sum())
    out = _out_dir(args)
    with open(os.path.join(out, "effects.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["coord", "region", "estimate", "n_used", "n_total"])
        writer.writerow(
            [args.coord, " and ".join(args.where) if args.where else "", repr(value),
             n_used, data.n]
        )
    _write_run_config(
        out,
        {
            "command": "effects",
            "model": args.model,
            "data": args.data,
            "coord": args.coord,
            "where": args.where,
            "config_hash": config_hash(model.config),
        },
    )
    print(f"effects: ape[{args.coord}] = {value:.6f} (n={n_used}/{data.n})")
    return 0


def cmd_bootstrap(args):
    model = load_model(args.model)
    data = _load_dataset(args.data)
    _check_model_data(model, data)
    if model.centers.shape[0] != data.n + 1:
        raise ValidationError(
            f"model was fit on n={model.centers.shape[0] - 1} observations "
            f"but data has n={data.n}; bootstrap requires the original sample"
        )
    region = parse_where(args.where, data.d_w) if args.where else None
    target = ApeTarget(coord=args.coord, region=region)
    spec = BootstrapSpec(
        replications=int(args.reps),
        levels=tuple(args.level) if args.level else (0.95,),
        seed=int(args.seed if args.seed is not None else model.config.seed),
        n_jobs=int(args.threads),
    )
    out = _out_dir(args)
    result = bootstrap(data, model.config, spec, [target], model=model)
    result.to_csv(os.path.join(out, "intervals.csv"))
    _write_run_config(
        out,
        {
            "command": "bootstrap",
            "model": args.model,
            "data": args.data,
            "coord": args.coord,
            "where": args.where,
            "replications": spec.replications,
            "levels": list(spec.levels),
            "seed": spec.seed,
            "config_hash": config_hash(model.config),
        },
    )
    for lv in spec.levels:
        lo, hi = result.intervals[(target.name, lv)]
        print(
            f"bootstrap: ape[{args.coord}] = {result.estimates[0]:.6f} "
            f"{int(lv * 100)}% CI [{lo:.6f}, {hi:.6f}] "
            f"({spec.replications - result.n_failed}/{spec.replications} refits)"
        )
    print(f"intervals written to {os.path.join(out, 'intervals.csv')}")
    return 0


def cmd_simulate(args):
    designs = [SimDesign.from_label(lbl) for lbl in args.design]
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ValidationError(f"unknown method {m!r}; choose from {METHODS}")
    tuning = {}
    if args.config:
        raw = _read_json(args.config)
        tuning = raw.get("tuning", {})
        unknown = set(tuning) - set(DEFAULT_TUNING)
        if unknown:
            raise ValidationError(f"tuning for unknown methods: {sorted(unknown)}")
    seed = int(args.seed) if args.seed is not None else 0
    out = _out_dir(args)
    table = replicate_table(
        designs,
        methods,
        ntrain=int(args.ntrain),
        ntest=int(args.ntest),
        nsim=int(args.nsim),
        seed=seed,
        tuning=tuning,
        n_jobs=int(args.threads),
    )
    table.to_csv(os.path.join(out, "table.csv"))
    if args.emit_csv:
        table.replicates_to_csv(os.path.join(out, "replicates.csv"))
    with open(os.path.join(out, "metadata.json"), "w") as fh:
        json.dump(table.metadata(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    _write_run_config(
        out,
        {
            "command": "simulate",
            "designs": [d.label for d in designs],
            "methods": methods,
            "ntrain": int(args.ntrain),
            "ntest": int(args.ntest),
            "nsim": int(args.nsim),
            "seed": seed,
            "tuning": tuning,
        },
    )
    width = max(len(m) for m in methods) + 2
    header = "design  metric  " + "".join(m.rjust(width) for m in methods)
    print(header)
    for row in table.summary_rows():
        line = f"{row['design']:<7} {row['metric']:<7}"
        for m in methods:
            line += f"{row[m]:{width}.4f}"
        print(line)
    print(f"table written to {os.path.join(out, 'table.csv')}")
    return 0


def build_parser():
    parser = _Parser(prog="knpchoice", description=__doc__)
    parser.add_argument("--version", action="version", version=f"knpchoice {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        if data:
            p.add_argument("--data", required=True, help="CSV file with header y,v,w1..wd")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--out-dir", default=None, help="output directory (default .)")
        p.add_argument("--threads", type=int, default=1, help="parallel workers")

    p_fit = sub.add_parser("fit", help="fit the model and write model.json")
    common(p_fit)
    p_fit.add_argument("--config", default=None, help="JSON file of config fields")
    p_fit.set_defaults(handler=cmd_fit)

    p_cv = sub.add_parser("cv", help="cross-validate (radius, order, n_components)")
    common(p_cv)
    p_cv.add_argument("--config", required=True, help="JSON config with 'grid'")
    p_cv.set_defaults(handler=cmd_cv)

    p_eff = sub.add_parser("effects", help="average partial effects of a fitted model")
    common(p_eff)
    p_eff.add_argument("--model", required=True, help="model.json from fit")
    p_eff.add_argument("--coord", required=True, help="coordinate: v or w1..wd")
    p_eff.add_argument("--where", action="append", default=[],
                       help="region clause like 'w1>0.5' (repeatable, ANDed)")
    p_eff.set_defaults(handler=cmd_effects)

    p_boot = sub.add_parser("bootstrap", help="pairs-bootstrap confidence intervals")
    common(p_boot)
    p_boot.add_argument("--model", required=True, help="model.json from fit")
    p_boot.add_argument("--coord", required=True, help="coordinate: v or w1..wd")
    p_boot.add_argument("--where", action="append", default=[],
                        help="region clause like 'w1>0.5' (repeatable, ANDed)")
    p_boot.add_argument("--reps", type=int, default=200, help="bootstrap replications")
    p_boot.add_argument("--level", action="append", type=float, default=None,
                        help="confidence level (repeatable; default 0.95)")
    p_boot.set_defaults(handler=cmd_bootstrap)

    p_sim = sub.add_parser("simulate", help="Monte Carlo comparison of estimators")
    common(p_sim, data=False)
    p_sim.add_argument("--design", action="append", required=True,
                       help="design label like IA or IIB (repeatable)")
    p_sim.add_argument("--nsim", type=int, default=50, help="replications per design")
    p_sim.add_argument("--ntrain", type=int, default=2000, help="training sample size")
    p_sim.add_argument("--ntest", type=int, default=10000, help="test sample size")
    p_sim.add_argument("--methods", default="KNP,Probit",
                       help=f"comma list from {','.join(METHODS)}")
    p_sim.add_argument("--config", default=None,
                       help="JSON file with per-method 'tuning' overrides")
    p_sim.add_argument("--emit-csv", action="store_true",
                       help="also write replication-level metrics")
    p_sim.set_defaults(handler=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except KnpChoiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
