"""``latdisc <mode> [flags]``.

Exit codes: 0 success, 2 acceptance-threshold failure, 1 usage error.
Values from ``--config`` override the flags.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import MODES, build_config, read_config_file
from .errors import InvalidArgument
from .experiments import run_mode

EXIT_OK, EXIT_USAGE, EXIT_THRESHOLD = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="latdisc", description="Lattice-point discrepancy experiments.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--domain", help='e.g. "superellipse:omega=4,a=1,b=1,theta=0.73" or "disk"')
    p.add_argument("--theta-count", type=int, dest="theta_count")
    p.add_argument("--thetas", help="comma-separated explicit rotation angles")
    p.add_argument("--seed", type=int)
    p.add_argument("--jmin", type=int, dest="j_min")
    p.add_argument("--jmax", type=int, dest="j_max")
    p.add_argument("--samples", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--out", help="output path, '-' for stdout")
    p.add_argument("--config", help="file of 'key = value' lines; overrides flags")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    values = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "verbose")}
    try:
        if args.config:
            values.update(read_config_file(args.config))
        cfg = build_config(values)
        text, ok = run_mode(cfg)
    except (InvalidArgument, OSError) as e:
        print(f"latdisc: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.out == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    if not ok:
        print("latdisc: acceptance threshold not met", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
