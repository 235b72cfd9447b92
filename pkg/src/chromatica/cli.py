"""Command line front end.

Three subcommands:

  chromatica run <experiment> [params] [--out report.json]
  chromatica grid [--config grid.toml] [--out dir]
  chromatica fgl show <kind> [--series ...] [--m M]

run and grid emit canonical JSON reports (stable bytes for a fixed spec and
seed); progress and wall times go to stderr so they never perturb output
files.  Exit status: 0 for confirmed or bound-satisfied verdicts, 2 for
falsified-at-profile, 3 for inconclusive, 1 for usage or runtime errors.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

import tomli

from . import experiments
from .experiments import ExperimentError, ExperimentSpec
from .fgl import get_law
from .precision import PrecisionProfile

_EXIT_BY_VERDICT = {
    experiments.VERDICT_CONFIRMED: 0,
    experiments.VERDICT_BOUND: 0,
    experiments.VERDICT_FALSIFIED: 2,
    experiments.VERDICT_INCONCLUSIVE: 3,
}


def _parse_ints(text: str):
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers, got %r"
                                         % (text,))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chromatica",
        description="torsion-exponent experiments for formal group laws")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment and emit its report")
    run.add_argument("experiment", choices=experiments.EXPERIMENT_IDS)
    run.add_argument("--p", type=int, required=True, help="the prime")
    run.add_argument("--k", type=int, help="cyclic exponent or factorization depth")
    run.add_argument("--n", type=_parse_ints, dest="heights",
                     help="height or comma list of heights, e.g. 1,2")
    run.add_argument("--group", type=_parse_ints,
                     help="abelian p-group exponents, non-increasing, e.g. 2,1")
    run.add_argument("--v-count", type=int, help="p-typical variable count")
    run.add_argument("--profile-a", type=int, help="override precision exponent a")
    run.add_argument("--profile-u", type=int, help="override deformation degree bound")
    run.add_argument("--deg", type=int, help="override series degree bound")
    run.add_argument("--escalate", type=_parse_ints,
                     default=experiments.DEFAULT_ESCALATION,
                     help="escalation steps da,du,dd (default 2,2,4)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", type=Path, help="write report JSON here instead of stdout")

    grid = sub.add_parser("grid", help="run every job in a grid config")
    grid.add_argument("--config", type=Path,
                      help="TOML grid file (default: the packaged grid)")
    grid.add_argument("--out", type=Path, default=Path("chromatica-grid"),
                      help="output directory (default: ./chromatica-grid)")

    fgl = sub.add_parser("fgl", help="inspect formal group law series")
    fgl_sub = fgl.add_subparsers(dest="action", required=True)
    show = fgl_sub.add_parser("show", help="print a law's series")
    show.add_argument("kind",
                      choices=("multiplicative", "lubin_tate", "p_typical"))
    show.add_argument("--p", type=int, default=2)
    show.add_argument("--height", type=int, default=2,
                      help="Lubin-Tate height (ignored otherwise)")
    show.add_argument("--v-count", type=int, default=3,
                      help="p-typical variable count (ignored otherwise)")
    show.add_argument("--deg", type=int, default=12, help="degree bound")
    show.add_argument("--profile-a", type=int, default=8)
    show.add_argument("--profile-u", type=int, default=4)
    show.add_argument("--series", default="sum",
                      choices=("sum", "neg", "p", "pk", "angle", "log", "exp"),
                      help="which series to print (default: the sum law)")
    show.add_argument("--m", type=int, default=1,
                      help="power for pk and angle series")
    return parser


def _overrides(args) -> dict:
    out = {}
    if args.profile_a is not None:
        out["a"] = args.profile_a
    if args.profile_u is not None:
        out["u_degree_bound"] = args.profile_u
    if args.deg is not None:
        out["degree_bound"] = args.deg
    return out


def _cmd_run(args) -> int:
    spec = ExperimentSpec(
        args.experiment,
        p=args.p,
        k=args.k,
        group=args.group,
        heights=args.heights,
        v_count=args.v_count,
        degree_bound=args.deg if args.experiment == "bp_factorization" else None,
        overrides=(_overrides(args)
                   if args.experiment != "bp_factorization" else None),
        escalation=args.escalate,
        seed=args.seed,
    )
    report = experiments.run_experiment(spec)
    text = report.canonical_json()
    if args.out is not None:
        args.out.write_text(text)
        sys.stderr.write("wrote %s\n" % args.out)
    else:
        sys.stdout.write(text)
    sys.stderr.write("%s: %s (%.1fs)\n" %
                     (spec.experiment, report.verdict, report.wall_time))
    return _EXIT_BY_VERDICT[report.verdict]


def default_grid_config() -> dict:
    data = resources.files("chromatica").joinpath("data/default_grid.toml")
    return tomli.loads(data.read_text())


def _cmd_grid(args) -> int:
    if args.config is not None:
        with open(args.config, "rb") as fh:
            config = tomli.load(fh)
    else:
        config = default_grid_config()
    reports = experiments.run_grid(config, args.out, log=sys.stderr)
    worst = 0
    for _, report in reports:
        worst = max(worst, _EXIT_BY_VERDICT[report.verdict])
    sys.stderr.write("%d reports in %s\n" % (len(reports), args.out))
    return worst


def _cmd_fgl_show(args) -> int:
    if args.kind == "multiplicative":
        profile = PrecisionProfile(p=args.p, a=args.profile_a,
                                   degree_bound=args.deg)
        law = get_law("multiplicative", profile)
    elif args.kind == "lubin_tate":
        profile = PrecisionProfile(p=args.p, a=args.profile_a,
                                   deformation_vars=args.height - 1,
                                   u_degree_bound=args.profile_u,
                                   degree_bound=args.deg)
        law = get_law("lubin_tate", profile, height=args.height)
    else:
        profile = PrecisionProfile(p=args.p, a=args.profile_a,
                                   deformation_vars=args.v_count,
                                   u_degree_bound=max(args.deg - 1, 1),
                                   degree_bound=args.deg)
        law = get_law("p_typical", profile, v_count=args.v_count)

    if args.series == "sum":
        series, names = law.F, ("x", "y")
    elif args.series == "neg":
        series, names = law.formal_neg(), ("x",)
    elif args.series == "p":
        series, names = law.p_series(), ("x",)
    elif args.series == "pk":
        series, names = law.pk_series(args.m), ("x",)
    elif args.series == "angle":
        series, names = law.angle_pk_series(args.m), ("x",)
    elif args.series == "log":
        series, names = law.log_series(), ("x",)
    else:
        series, names = law.exp_series(), ("x",)

    param_names = (["v%d" % (i + 1) for i in range(profile.deformation_vars)]
                   if args.kind == "p_typical" else None)
    print("%s p=%d degree<=%d" % (args.kind, args.p, args.deg))
    print(series.render(main_names=names, param_names=param_names))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "grid":
            return _cmd_grid(args)
        return _cmd_fgl_show(args)
    except (ExperimentError, ValueError, ArithmeticError) as err:
        sys.stderr.write("error: %s\n" % err)
        return 1


if __name__ == "__main__":
    sys.exit(main())
