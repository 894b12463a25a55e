"""Command line: ``dtnfem <study> --config run.json --out results/``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ENV_PREFIX
from .harness import run

COMMANDS = {
    "solve": "solve",
    "converge-h": "converge_h",
    "converge-N": "converge_N",
    "verify-kernels": "verify_kernels",
    "infsup": "infsup",
    "eta-probe": "eta_probe",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtnfem",
        description="Finite element studies for scattering with a truncated DtN boundary condition.",
        epilog=f"Config keys can be overridden with {ENV_PREFIX}<SECTION>__<KEY>=<json>, "
               f"e.g. {ENV_PREFIX}WAVE__N=32.",
    )
    parser.add_argument("command", choices=list(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (default: output.dir)")
    parser.add_argument("--seed", type=int, default=0, help="seed for randomised studies")
    parser.add_argument("--threads", type=int, default=None, help="cap BLAS/LAPACK threads")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    if args.seed < 0 or args.seed >= 2**64:
        logging.error("seed must be an unsigned 64-bit integer")
        return 2
    if args.threads is not None:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=args.threads):
            return run(args.config, args.out, COMMANDS[args.command], args.seed)
    return run(args.config, args.out, COMMANDS[args.command], args.seed)


if __name__ == "__main__":
    sys.exit(main())
