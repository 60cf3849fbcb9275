"""Command-line front door.

    rsns <subcommand> [--config FILE] [--preset NAME] [flag overrides...]

Flags override config-file values, which override preset values, which
override package defaults.  Exit codes: 0 success, 2 configuration error,
3 budget exceeded, 4 integrator instability rejection.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import PRESETS, SUBCOMMANDS, config_from_sources
from .errors import RsnsError
from . import campaigns


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsns",
        description="Resonant Schroedinger system lab: enumeration, estimates, simulation.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="|".join(SUBCOMMANDS))
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="named parameter bundle")
        p.add_argument("--window", type=int, dest="window_k", help="mode window half-width K")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", dest="output_dir", help="output directory")
        p.add_argument("--dt", type=float)
        p.add_argument("--t-end", type=float, dest="t_end")
        p.add_argument("--grid-n", type=int, dest="grid_n")
        p.add_argument("--box-l", type=float, dest="box_l")
        p.add_argument("--trials", type=int)
        p.add_argument("--sequences", type=int)
        p.add_argument("--circles", type=int)
        p.add_argument("--snapshot-stride", type=int, dest="snapshot_stride")
        p.add_argument("--memory-cap", type=int, dest="memory_cap_bytes")
        p.add_argument("--g2m-cap", type=int, dest="g2m_cap")
    return parser


def main(argv=None) -> int:
    workers = os.environ.get("RSNS_WORKERS")
    if workers:
        # the only environment knob: caps compiled-kernel threading; results
        # are worker-count independent by construction
        try:
            import numba

            numba.set_num_threads(max(1, int(workers)))
        except (ImportError, ValueError):
            pass
    args = _build_parser().parse_args(argv)
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k not in ("subcommand", "config", "preset") and v is not None
    }
    try:
        cfg = config_from_sources(
            args.subcommand, file_path=args.config, preset=args.preset, overrides=overrides
        )
        manifest = campaigns.run(cfg)
    except RsnsError as e:
        print(f"rsns: error: {e}", file=sys.stderr)
        return e.exit_code
    print(manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
