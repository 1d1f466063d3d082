#!/usr/bin/env python3
"""Benchmarking runs: two-qubit and single-qubit XEB plus a speckle purity
benchmarking experiment, using the noise model from the config.

Writes fig5_xeb_*.json/.csv and fig5c_spb.json into the output directory.
"""

import argparse
import sys

from czsim.cli import main


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config")
    parser.add_argument("--output-dir", default="czsim_out")
    parser.add_argument("--use-gate", action="store_true",
                        help="benchmark the simulated calibrated gate")
    args = parser.parse_args(argv)

    base = []
    if args.config:
        base += ["--config", args.config]
    base += ["--output-dir", args.output_dir]

    xeb2 = ["xeb", "--qubits", "2"] + (["--use-gate"] if args.use_gate else [])
    for cmd in (xeb2, ["xeb", "--qubits", "1"], ["spb"]):
        rc = main(cmd + base)
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(run())
