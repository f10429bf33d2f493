"""NSR of the selected tones versus clipping ratio for every reliability criterion.

64-QAM, N = 256, 20 dB Eb/N0, 64 selected tones, no recovery.  The output
CSV has one row per (CR, criterion) with the mean NSR and its standard error.
"""

import argparse
import sys
from pathlib import Path

from clipfix import cli

CRITERIA = "exact,trunc,quadrant,circle,square,leaf(0.65),leaf(0.95),adaptive,random"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--cr", default="1.2:2.4:0.1")
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--out", default="results/fig6_nsr.csv")
    a = ap.parse_args(argv)
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    args = ["sweep", "--n", "256", "--qam", "64", "--ebn0-db", "20", "--stage1-m", "64",
            "--criterion", CRITERIA, "--cr", a.cr, "--trials", str(a.trials),
            "--seed", str(a.seed), "--solver", "none", "--out", a.out]
    if a.threads:
        args += ["--threads", str(a.threads)]
    return cli.main(args)


if __name__ == "__main__":
    sys.exit(main())
