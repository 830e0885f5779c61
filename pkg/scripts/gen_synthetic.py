#!/usr/bin/env python3
"""Generate the procedural weather-texture dataset into a directory.

Writes one PPM subtree per leaf class plus manifest.csv.  Regenerating
with the same seed reproduces every file byte for byte.
"""

import argparse
from pathlib import Path

from wxhier.synthetic import DEFAULT_PER_CLASS, DEFAULT_SEED, DEFAULT_SIZE, generate_dataset


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("outdir", type=Path)
    ap.add_argument("--per-class", type=int, default=DEFAULT_PER_CLASS)
    ap.add_argument("--size", type=int, default=DEFAULT_SIZE)
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    args = ap.parse_args()
    manifest = generate_dataset(args.outdir, per_class=args.per_class, size=args.size, seed=args.seed)
    print(f"manifest: {manifest}")


if __name__ == "__main__":
    main()
