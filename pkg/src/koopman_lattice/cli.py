"""Command-line entry point: ``koopman-lattice <command> --config run.json``.

Commands
--------
spectrum       EDMD (or transition-matrix) eigen-table with the unit-disk check
lattice-check  product checks over catalog pairs or computed eigenpairs
weyl-seq       clamp-product Weyl sequence trace
markov         Markov spectrum plus finite-spectrum closure
all            every analysis selected in the configuration

Exit codes: 0 success, 1 validation error, 2 numerical phase error,
3 I/O error.
"""

import argparse
import copy
import logging
import sys

from .config import _build_analyses, load_config
from .errors import ConfigError, KoopmanError
from .report import emit, run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

_COMMANDS = {
    "spectrum": ("spectrum",),
    "lattice-check": ("lattice_check",),
    "weyl-seq": ("weyl_seq",),
    "markov": ("spectrum", "markov_closure"),
    "all": None,
}


def select_analyses(config, command):
    """Restrict ``config`` to the analyses of ``command``.

    Sections the configuration already specifies keep their settings; the
    others get their defaults.
    """
    wanted = _COMMANDS[command]
    if wanted is None:
        return config
    if command == "markov" and not config.is_markov:
        raise ConfigError("the markov command needs a Markov chain system", "system.kind")
    spec = {name: True for name in wanted}
    resolved = _build_analyses(spec, config.system, "analyses")
    for name in wanted:
        if name in config.analyses:
            resolved[name] = config.analyses[name]
    out = copy.copy(config)
    out.resolved = copy.deepcopy(config.resolved)
    out.resolved["analyses"] = resolved
    out.analyses = resolved
    return out


def build_parser():
    parser = argparse.ArgumentParser(
        prog="koopman-lattice",
        description="Koopman spectra and lattice-closure diagnostics.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (default: config output.dir)")
    parser.add_argument("--format", choices=("json", "csv-bundle"), default=None)
    parser.add_argument("--seed", type=int, default=None, help="override the quadrature seed")
    parser.add_argument("--timings", action="store_true", help="print per-phase wall-clock times to stderr")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise ConfigError("seed must be an unsigned 64-bit integer", "--seed")
            config = config.with_seed(args.seed)
        config = select_analyses(config, args.command)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        report = run(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KoopmanError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    out_dir = args.out or config.output.get("dir", "out")
    fmt = args.format or config.output.get("format", "json")
    try:
        paths = emit(report, out_dir, fmt)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for p in paths:
        print(p)
    if args.timings:
        for phase, seconds in report.timings.items():
            print(f"{phase}: {seconds:.3f} s", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
