"""Command-line front end: ``shiftmix {analyze,simulate,truth,qgcomp}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import Config
from .data import ShiftSpec, load_csv
from .errors import ConfigurationError, ShiftmixError

log = logging.getLogger("shiftmix")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _names(text):
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _delta(text):
    """``1.5`` or ``A1=1,A4=0.5``."""
    if "=" not in text:
        return float(text)
    out = {}
    for part in _names(text):
        k, _, v = part.partition("=")
        out[k.strip()] = float(v)
    return out


def _var_sets(text):
    return tuple(tuple(sorted(s.split("-"))) for s in _names(text))


def build_parser():
    p = _Parser(prog="shiftmix", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    a = sub.add_parser("analyze", help="discover variable sets and estimate shift effects")
    a.add_argument("--config", help="JSON file mirroring the flags; flags win")
    a.add_argument("--data")
    a.add_argument("--outcome")
    a.add_argument("--exposures", type=_names)
    a.add_argument("--covariates", type=_names)
    a.add_argument("--delta", type=_delta)
    a.add_argument("--folds", type=int)
    a.add_argument("--f-quantile", dest="f_quantile", type=float)
    a.add_argument("--lambda", dest="lam", type=float)
    a.add_argument("--reduce-frac", dest="reduce_frac", type=float)
    a.add_argument("--density-kind", dest="density_kind", choices=("HOSE", "HESE"))
    a.add_argument("--var-sets", dest="var_sets", type=_var_sets,
                   help="e.g. A1,A4,A1-A4; skips discovery")
    a.add_argument("--cv-folds", dest="cv_folds", type=int)
    a.add_argument("--binary", action="store_true", default=None)
    a.add_argument("--seed", type=int)
    a.add_argument("--output")
    a.add_argument("--threads", type=int)
    a.set_defaults(_parser=a)

    s = sub.add_parser("simulate", help="convergence study on the built-in design")
    s.add_argument("--ns", type=lambda t: [int(x) for x in _names(t)], default=[250, 1000])
    s.add_argument("--reps", type=int, default=10)
    s.add_argument("--folds", type=int, default=5)
    s.add_argument("--var-sets", dest="var_sets", type=_var_sets)
    s.add_argument("--mc", type=int, default=2_000_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output")
    s.add_argument("--threads", type=int, default=1)

    t = sub.add_parser("truth", help="Monte-Carlo truth of a shift contrast")
    t.add_argument("--scenario", default="paper-dgp", choices=("paper-dgp",))
    t.add_argument("--shift", required=True, type=_delta, help="e.g. A4=1 or A1=1,A4=1")
    t.add_argument("--interaction", action="store_true")
    t.add_argument("--mc", type=int, default=10_000_000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--cache")

    q = sub.add_parser("qgcomp", help="quantile g-computation baseline")
    q.add_argument("--data", required=True)
    q.add_argument("--outcome", required=True)
    q.add_argument("--exposures", required=True, type=_names)
    q.add_argument("--covariates", type=_names, default=())
    q.add_argument("--q", type=int, default=4)
    return p


ANALYZE_KEYS = ("data", "outcome", "exposures", "covariates", "delta", "folds", "f_quantile",
                "lam", "reduce_frac", "density_kind", "var_sets", "cv_folds", "binary", "seed",
                "output", "threads")


def _analyze(args, out):
    from .engine import format_table, run

    base = Config.from_json(args.config).to_dict() if args.config else {}
    for k in ANALYZE_KEYS:
        v = getattr(args, k)
        if v is not None:
            base[k] = v
    for k in ("data", "outcome", "exposures"):
        if not base.get(k):
            raise UsageError(f"{args._parser.format_usage()}analyze: --{k} is required")
    cfg = Config.from_dict(base)
    dataset = load_csv(cfg.data, cfg.roles(), cfg.binary)
    report = run(dataset, cfg)
    text = report.to_json()
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        out.write(text + "\n")
    out.write(format_table(report) + "\n")


def _simulate(args, out):
    from .sim import UnitTruths, run_convergence, write_metrics_csv

    cfg = Config(folds=args.folds, var_sets=args.var_sets)
    truths = UnitTruths.compute(N_mc=args.mc, seed=args.seed)
    rows = run_convergence(args.ns, args.reps, cfg, args.seed, truths, threads=args.threads)
    write_metrics_csv(rows, args.output or out)


def _truth(args, out):
    from .sim import TruthRequest, ground_truth

    delta = args.shift
    if not isinstance(delta, dict):
        raise ConfigurationError("--shift needs NAME=VALUE pairs")
    req = TruthRequest(ShiftSpec(tuple(delta), delta), args.interaction)
    value, se = ground_truth(req, args.mc, args.seed, args.cache, with_se=True)
    json.dump({"request": req.key(), "n_mc": args.mc, "seed": args.seed, "value": value,
               "mc_se": se}, out, indent=2)
    out.write("\n")


def _qgcomp(args, out):
    from .sim import qgcomp_baseline

    roles = {args.outcome: "outcome"}
    roles.update({e: "exposure" for e in args.exposures})
    roles.update({c: "covariate" for c in args.covariates})
    res = qgcomp_baseline(load_csv(args.data, roles, binary=False), args.q)
    json.dump(res.to_dict(), out, indent=2)
    out.write("\n")


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().rstrip())
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        {"analyze": _analyze, "simulate": _simulate, "truth": _truth,
         "qgcomp": _qgcomp}[args.command](args, out)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 1
    except ShiftmixError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
