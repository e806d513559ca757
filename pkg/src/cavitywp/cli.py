"""Command line front end.

    cavitywp VERB --config PATH --out DIR [--dt-override DT] [--check-convergence]

Exit codes: 0 success, 2 configuration error, 3 numerical abort (boundary
leak or non-finite amplitudes; the manifest still records the partial run).
"""
import argparse
import sys

from . import __version__, runner
from .config import ConfigError, build, load

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 2, 3

VERBS = {
    "propagate": "propagate each configured model and write observable series",
    "compare": "Rabi vs JC inversion with the JC Fock-basis oracle",
    "lz-sweep": "Landau-Zener sweep: formula vs measured adiabatic following",
    "revival-scan": "detect revivals from channel centroid overlap",
    "dicke-spectrum": "normal-mode frequencies and potentials of the Dicke model",
    "oracle": "evaluate closed-form references and potential curves",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cavitywp", description="Wave-packet simulations of cavity QED models."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")
    for verb, help_text in VERBS.items():
        p = sub.add_parser(verb, help=help_text, description=help_text)
        p.add_argument("--config", required=True, metavar="PATH", help="run configuration file")
        p.add_argument("--out", required=True, metavar="DIR", help="output directory")
        p.add_argument("--dt-override", type=float, metavar="DT", help="replace propagation.dt")
        p.add_argument(
            "--check-convergence",
            action="store_true",
            help="repeat each propagation at dt/2 and record the deltas",
        )
    return parser


def _dispatch(args):
    cfg = load(args.config)
    if args.dt_override is not None:
        if not args.dt_override > 0:
            raise ConfigError("--dt-override must be positive")
        cfg = cfg.with_dt(args.dt_override)
        if args.verb == "lz-sweep":
            cfg = build(dict(cfg.values, **{"lz.dt": args.dt_override}))
    if args.verb == "propagate":
        return runner.run_propagate(cfg, args.out, args.check_convergence)
    if args.verb == "compare":
        return runner.run_compare(cfg, args.out, args.check_convergence)
    if args.verb == "lz-sweep":
        return runner.run_lz_sweep(cfg, args.out)
    if args.verb == "revival-scan":
        return runner.run_revival_scan(cfg, args.out)
    if args.verb == "dicke-spectrum":
        return runner.run_dicke_spectrum(cfg, args.out)
    return runner.run_oracle(cfg, args.out)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        result = _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except runner.NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    status = result.get("status", "ok")
    print(f"{args.verb}: status {status}; output in {args.out}")
    if status == "invalid":
        return EXIT_ABORT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
