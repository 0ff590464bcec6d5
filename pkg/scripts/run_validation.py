#!/usr/bin/env python3
"""Run the Monte-Carlo-vs-analytic validation battery on bundled configs.

Each config gets its own output directory with a validation report, a CSV
summary and a sha-256 manifest; the script exits non-zero if any battery
fails.  Pass --fast to shrink path counts for a quick smoke run.
"""

import argparse
import pathlib
import sys

from hawkespop.cli import main as cli_main

CONFIG_DIR = pathlib.Path(__file__).resolve().parent.parent / "configs"
DEFAULT_SET = ["default.toml", "critical.toml", "delayed.toml",
               "dassios_zhao.toml", "seasonal.toml"]

FAST_OVERRIDES = ["--set", "run.n_paths=2000", "--set", "run.martingale_paths=500",
                  "--set", "run.ks_paths=40", "--set", "run.ks_horizon=150.0"]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("configs", nargs="*", default=None,
                        help="config files (default: the bundled set)")
    parser.add_argument("--out", default="validation_runs",
                        help="root output directory")
    parser.add_argument("--fast", action="store_true",
                        help="reduced path counts for a smoke run")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    configs = args.configs or [str(CONFIG_DIR / name) for name in DEFAULT_SET]
    worst = 0
    for cfg in configs:
        name = pathlib.Path(cfg).stem
        outdir = str(pathlib.Path(args.out) / name)
        argv = ["validate", "-c", cfg, "--out", outdir,
                "--threads", str(args.threads)]
        if args.fast:
            argv += FAST_OVERRIDES
        print(f"== {name} ==")
        rc = cli_main(argv)
        print(f"== {name}: exit {rc} ==\n")
        worst = max(worst, rc)
    return worst


if __name__ == "__main__":
    sys.exit(main())
