"""
Command-line entry point.

    oam-direct measure  [--config PATH] [--seed N] [--noiseless] [--out DIR]
    oam-direct sorter   [--config PATH] [--out DIR] [--no-masks]
    oam-direct analyze  BUNDLE [--out DIR]
    oam-direct plotdata BUNDLE [--out DIR]

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O
error.  Failures print one JSON object to stderr.
"""
import argparse
import json
import sys

from . import pipeline
from .config import load_config
from .errors import ConfigError, DomainError, FitFailureError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _parser():
    p = argparse.ArgumentParser(
        prog="oam-direct",
        description="Simulate direct measurement of OAM states and characterize the mode sorter.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("measure", "simulate the direct measurement"),
                           ("sorter", "characterize the mode sorter")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", help="INI file or a previous manifest.json")
        s.add_argument("--seed", type=int, help="override [noise] seed")
        s.add_argument("--noiseless", action="store_true", help="skip photon-counting noise")
        s.add_argument("--out", help="override [output] directory")
    sub.choices["sorter"].add_argument("--no-masks", action="store_true", help="do not export element masks")
    for name, helptext in (("analyze", "re-fit saved reconstructions"),
                           ("plotdata", "write per-panel plot tables")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("bundle", help="directory written by measure")
        s.add_argument("--out", help="output directory (default: the bundle)")
    return p


def _resolve(args):
    cfg = load_config(args.config)
    noise = {}
    if args.seed is not None:
        noise["seed"] = args.seed
    if args.noiseless:
        noise["noiseless"] = True
    if noise:
        cfg = cfg.replace("noise", **noise)
    if args.out:
        cfg = cfg.replace("output", directory=args.out)
    return cfg


def _fail(code, exc):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if getattr(exc, "key", None) is not None:
        payload["key"] = exc.key
    if getattr(exc, "ell", None) is not None:
        payload["ell"] = exc.ell
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command in ("measure", "sorter"):
            cfg = _resolve(args)
            out = cfg["output"]["directory"]
            if args.command == "measure":
                pipeline.run_direct_measurement(cfg, out)
            else:
                pipeline.run_sorter_characterization(cfg, out, masks=not args.no_masks)
        elif args.command == "analyze":
            pipeline.analyze_bundle(args.bundle, args.out)
        else:
            pipeline.emit_plot_data(args.bundle, args.out)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    except (DomainError, FitFailureError, ArithmeticError, ValueError) as exc:
        return _fail(EXIT_NUMERIC, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
