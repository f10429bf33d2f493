"""Transition radius of the truncated ratio versus distortion level.

Writes the exact (Lambert W) and small-noise radii on a grid of
sigma_D^2 / d_min^2 to ``results/rtilde.csv``.
"""

import argparse
import sys
from pathlib import Path

from clipfix import cli


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--sigma", default="0.005:0.5:0.005")
    ap.add_argument("--out", default="results/rtilde.csv")
    a = ap.parse_args(argv)
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    return cli.main(["rtilde", "--sigma", a.sigma, "--out", a.out])


if __name__ == "__main__":
    sys.exit(main())
