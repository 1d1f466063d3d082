#!/usr/bin/env python3
"""Waveform study: optimize each pulse family and sweep leakage vs length.

Writes fig2a_*_waveform.csv, optimized_*.json, and fig2b_leakage.csv into
the output directory (default czsim_out/).
"""

import argparse
import sys

from czsim.cli import main


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config")
    parser.add_argument("--output-dir", default="czsim_out")
    args = parser.parse_args(argv)

    base = []
    if args.config:
        base += ["--config", args.config]
    base += ["--output-dir", args.output_dir]

    for family in ("square", "slepian", "cosine"):
        rc = main(["optimize", "--shape", family] + base)
        if rc != 0:
            return rc
    return main(["sweep", "--figure", "fig2b"] + base)


if __name__ == "__main__":
    sys.exit(run())
