#!/usr/bin/env python3
"""Write seeded random D-elementary or hybrid models for batch runs (hybrid-pn ... --jobs N)."""

from functools import partial
from pathlib import Path
import argparse
import sys

import numpy as np

PROJECT_DIR = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(PROJECT_DIR))

from src.netgen import random_delementary, random_hybrid_timed  # noqa: E402
from src.parser import serialize_model  # noqa: E402

GENERATORS = {
    "delementary": random_delementary,
    "hybrid": random_hybrid_timed,
    "thresholds": partial(random_hybrid_timed, thresholds=True),
}


def write_corpus(directory: Path, count: int, seed: int, kind: str) -> list[Path]:
    rng = np.random.default_rng(seed)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for index in range(count):
        name = f"{kind}_{seed}_{index:03d}"
        net = GENERATORS[kind](rng, name=name)
        path = directory / f"{name}.hpn"
        path.write_text(serialize_model(net))
        written.append(path)
    return written


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("directory", type=Path)
    parser.add_argument("--count", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--kind", choices=sorted(GENERATORS), default="delementary")
    args = parser.parse_args()
    if args.count < 1:
        raise SystemExit("Error: --count must be at least 1")

    try:
        written = write_corpus(args.directory, args.count, args.seed, args.kind)
    except OSError as error:
        raise SystemExit(f"Error: {error}") from error
    print(f"Wrote {len(written)} models to {args.directory}")


if __name__ == "__main__":
    main()
