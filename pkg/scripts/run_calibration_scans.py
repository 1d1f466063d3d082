#!/usr/bin/env python3
"""Calibration scans: compensation curve, 2-D operating-point scans, and
repeated-gate amplification scans.

Writes fig3_compensation.csv and fig4a-d CSVs into the output directory.
"""

import argparse
import sys

from czsim.cli import main


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config")
    parser.add_argument("--output-dir", default="czsim_out")
    parser.add_argument("--grid-points", type=int, default=17)
    args = parser.parse_args(argv)

    base = []
    if args.config:
        base += ["--config", args.config]
    base += ["--output-dir", args.output_dir]

    rc = main(["compensate"] + base)
    if rc != 0:
        return rc
    return main(["sweep", "--grid-points", str(args.grid_points)]
                + [flag for fig in ("fig4a", "fig4b", "fig4c", "fig4d")
                   for flag in ("--figure", fig)] + base)


if __name__ == "__main__":
    sys.exit(run())
