"""Pick the low and high min_neighbors settings from a fine sweep CSV.

    brickscan --neighbors 1,2,...,150 sweep-neighbors --maps RUN/heldout_wall/maps \
        --model RUN/model/cascade.json --annotations RUN/heldout_wall/annotations.json \
        --out data/calibration/neighbors_seed7.csv
    python tools/calibrate_neighbors.py data/calibration/neighbors_seed7.csv

low: the smallest swept value.
high: best recall_H among rows with mean labels per detected brick in
[0.95, 1.05]; ties go to the mean closest to 1, then to the smaller value.
"""

import csv
import sys


def pick(rows):
    low = min(int(r["min_neighbors"]) for r in rows)
    single = [r for r in rows if 0.95 <= float(r["mean_labels_per_brick"]) <= 1.05]
    if not single:
        return low, None
    best = min(
        single,
        key=lambda r: (
            -float(r["recall_H"]),
            abs(float(r["mean_labels_per_brick"]) - 1.0),
            int(r["min_neighbors"]),
        ),
    )
    return low, int(best["min_neighbors"])


def main(argv):
    if len(argv) != 2:
        print(__doc__, file=sys.stderr)
        return 2
    with open(argv[1], newline="") as f:
        rows = list(csv.DictReader(f))
    low, high = pick(rows)
    print(f"low {low}")
    print(f"high {high}")
    return 0 if high is not None else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv))
