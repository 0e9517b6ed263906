"""Recompute the Overall column of the published score tables from their sub-metrics."""

import argparse
import csv
from pathlib import Path

from docbench.protocol import overall_score

DEFAULT = Path(__file__).resolve().parent.parent / "tests" / "data" / "published_scores.csv"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--csv", type=Path, default=DEFAULT)
    args = ap.parse_args()
    worst = 0.0
    print(f"{'tier':5} {'model':28} {'published':>9} {'recomputed':>10} {'diff':>6}")
    with args.csv.open() as fh:
        for row in csv.DictReader(fh):
            got = overall_score(float(row["text_edit"]), float(row["formula"]) / 100, float(row["teds"]) / 100)
            diff = got - float(row["overall"])
            worst = max(worst, abs(diff))
            print(f"{row['tier']:5} {row['model']:28} {float(row['overall']):9.2f} {got:10.3f} {diff:+6.3f}")
    print(f"max |diff| = {worst:.3f}")


if __name__ == "__main__":
    main()
