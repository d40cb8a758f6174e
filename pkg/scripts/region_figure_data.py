#!/usr/bin/env python3
"""Export plot-ready subsolution-region data for the two-eigenvalue plane.

Wraps the `dhym region` subcommand for a few target phases; consumers render
the CSVs (label 0 = neither, 1 = subsolution region, 2 = level-set band).
"""

import sys

import numpy as np

from dhym.cli import main as dhym_main


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "region_data"
    for tag, sigma in (("half_pi", np.pi / 2), ("low", 0.4), ("high", np.pi - 0.4)):
        rc = dhym_main(
            [
                "region",
                "--sigma",
                str(sigma),
                "--resolution",
                "512",
                "--scale",
                "1.5",
                "--out",
                f"{out_dir}/region_{tag}.csv",
            ]
        )
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(main())
