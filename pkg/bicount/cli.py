"""Command line interface: ``bicount <command> [--config FILE | --preset NAME] ...``

Exit status: 0 on success, 2 for configuration errors, 3 for numerical failures and 4
when a validation check fails.
"""
import argparse
import logging
import sys

from .exceptions import exit_code_for

logger = logging.getLogger(__name__)

COMMANDS = {
    "solve": "find all Dirichlet levels below k_max",
    "count": "count boundary intersections for every level",
    "orbits": "search periodic orbits and tabulate their classical data",
    "spectrum": "numerical and semiclassical length spectra",
    "validate-rwm": "Rice formula and smooth-part checks on a spectral window",
    "compare": "match length-spectrum peaks and write plot data",
    "run": "full pipeline: solve, count, orbits, spectrum, compare",
}
# command-line option -> (config section, field)
SECTION_OPTIONS = {
    "k_max": ("solver", "k_max"),
    "gamma": ("count", "gamma"),
    "max_bounces": ("orbits", "max_bounces"),
    "q0": ("spectrum", "q0"),
    "sigma": ("spectrum", "sigma"),
    "k": ("rwm", "center"),
}
# command-line option -> stage read from that file
INPUT_OPTIONS = {"spectrum": "solve", "counts": "count", "orbits": "orbits"}
# command -> bicount.io function giving the table written by --out
OUT_TABLES = {"solve": "spectrum_frame", "count": "counts_frame", "orbits": "orbit_frame"}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument("--config", metavar="FILE", help="INI configuration file")
    source.add_argument(
        "--preset", choices=["disk", "africa-desk", "africa-full"], help="named configuration"
    )
    common.add_argument("--output-dir", metavar="DIR", help="override the output directory")
    common.add_argument(
        "--k-max", "--kmax", dest="k_max", type=float, help="override solver k_max"
    )
    common.add_argument("--seed", type=int, help="override the random seed")
    common.add_argument("--gamma", help='boundary subset as "fa:fb,fc:fd" fractions of L')
    common.add_argument(
        "--workers", type=int, help="worker threads (default: $BICOUNT_NUM_WORKERS or CPUs)"
    )
    common.add_argument("--force", action="store_true", help="ignore cached stage outputs")
    common.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="logging threshold",
    )
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging")

    parser = argparse.ArgumentParser(
        prog="bicount",
        description="Boundary-intersection counts, their trace formula and length spectra",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command", required=True)
    for name, help in COMMANDS.items():
        sub = subparsers.add_parser(name, parents=[common], help=help, description=help)
        _add_command_options(name, sub)
    return parser


def _add_command_options(name, sub):
    if name in OUT_TABLES:
        sub.add_argument("--out", metavar="FILE", help="also write the result table to FILE")
    if name in ("count", "validate-rwm"):
        sub.add_argument(
            "--spectrum", metavar="PATH", help="solve output (directory or modes.npz) to reuse"
        )
    if name == "orbits":
        sub.add_argument("--max-bounces", type=int, help="override the largest bounce count")
    if name == "spectrum":
        sub.add_argument("--counts", metavar="FILE", help="counts.csv to use instead of counting")
        sub.add_argument("--orbits", metavar="FILE", help="orbits.csv to use instead of searching")
        sub.add_argument("--q0", type=float, help="window center (with --sigma)")
        sub.add_argument("--sigma", type=float, help="window width (with --q0)")
    if name == "validate-rwm":
        sub.add_argument("--k", type=float, help="center of the spectral window")
    if name == "run":
        sub.add_argument(
            "--with-rwm", action="store_true", help="also run the random-wave validation"
        )


def _overrides(args):
    overrides = {}
    for option, (section, field) in SECTION_OPTIONS.items():
        value = getattr(args, option, None)
        if value is not None:
            overrides.setdefault(section, {})[field] = value
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    if args.seed is not None:
        overrides["seed"] = args.seed
    return overrides


def _inputs(args):
    inputs = {}
    for option, stage in INPUT_OPTIONS.items():
        value = getattr(args, option, None)
        if value is not None:
            inputs[stage] = value
    return inputs


def _write_out(command, pipeline, path):
    from . import io

    table = getattr(io, OUT_TABLES[command])(pipeline.result(command))
    logger.info("writing %s table to %s", command, path)
    return io.write_table(table, path)


def _configure_logging(args):
    level = getattr(logging, args.log_level)
    level = max(logging.DEBUG, level - 10 * args.verbose)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _summarize(command, pipeline):
    from .formatting import format_comparison, format_frame
    from .io import orbit_frame
    from .rwm import format_report

    if command == "solve":
        spectrum = pipeline.result("solve")
        return f"{len(spectrum)} levels below k={spectrum.k_max:g}"
    if command == "count":
        return format_frame(pipeline.result("count").to_frame(), "BICountSequence")
    if command == "orbits":
        frame = orbit_frame(pipeline.result("orbits"))
        return format_frame(frame.drop(columns=["s"]), "PeriodicOrbits")
    if command == "spectrum":
        spectra = pipeline.result("spectrum")
        return "\n".join(
            format_frame(spectrum.peaks(0.1 * spectrum.magnitude.max()), f"peaks[{name}]")
            for name, spectrum in spectra.items()
        )
    if command == "validate-rwm":
        return format_report(pipeline.result("validate-rwm"))
    reports = pipeline.result("compare")
    return "\n".join(format_comparison(report) for report in reports.values())


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)
    try:
        import bicount

        from .config import load_config
        from .pipeline import PIPELINE, Pipeline

        if args.workers is not None:
            bicount.init(args.workers)
        if args.config is None and args.preset is None:
            parser.error("one of --config or --preset is required")
        config = load_config(args.config, preset_name=args.preset, overrides=_overrides(args))
        pipeline = Pipeline(config, force=args.force, inputs=_inputs(args))
        if args.command == "run":
            stages = PIPELINE + (("validate-rwm",) if args.with_rwm else ())
            pipeline.run(stages)
            manifest = pipeline.manifest()
            print(f"run {config.name}: {len(manifest['stages'])} stages")
            print(f"recomputed: {', '.join(manifest['recomputed']) or 'nothing (all cached)'}")
            print(f"manifest: {pipeline.output_dir / 'manifest.json'}")
            print(_summarize("compare", pipeline))
        else:
            pipeline.run([args.command])
            print(_summarize(args.command, pipeline))
            if getattr(args, "out", None) is not None:
                print(f"table: {_write_out(args.command, pipeline, args.out)}")
    except Exception as exc:
        code = exit_code_for(exc)
        if code == 1:
            logger.exception("unexpected failure")
        print(f"bicount: error: {exc}", file=sys.stderr)
        return code
    return 0
