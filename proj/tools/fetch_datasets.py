#!/usr/bin/env python3
"""Build the Mushrooms and Yeast benchmark files in libsvm format.

The canonical copies live on the LIBSVM and UCI sites:

  https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/mushrooms
  https://archive.ics.uci.edu/dataset/110/yeast
  https://archive.ics.uci.edu/dataset/73/mushroom

When those hosts are unreachable this script rebuilds both sets from the KEEL
copies bundled in the `keel-ds` wheel on PyPI:

  * mushroom.dat is the UCI table without the rows that have a missing
    stalk-root value (5644 of 8124 rows). Each categorical attribute is one-hot
    encoded over the values that occur.
  * the 10-class Yeast table is not shipped as such, only as one-vs-rest
    files. The class of each of the 1484 rows is recovered by matching feature
    tuples across those files.

Usage: fetch_datasets.py [--wheel PATH] [--out DIR]
"""

import argparse
import collections
import pathlib
import subprocess
import sys
import tempfile
import zipfile

WHEEL = "keel-ds==0.2.5"
RAW = "keel_ds/data/{kind}/raw/{name}.dat"

# (file, side, class) in assignment order; earlier rules win.
YEAST_RULES = [
    ("yeast1", "positive", "NUC"),
    ("yeast3", "positive", "ME3"),
    ("yeast4", "positive", "ME2"),
    ("yeast5", "positive", "ME1"),
    ("yeast6", "positive", "EXC"),
    ("yeast-2_vs_4", "negative", "CYT"),
    ("yeast-2_vs_8", "positive", "POX"),
    ("yeast-1_vs_7", "positive", "VAC"),
]
YEAST_CLASSES = ["CYT", "NUC", "MIT", "ME3", "ME2", "ME1", "EXC", "VAC", "POX", "ERL"]
# yeast-1_vs_7 drops the pox column.
DROPPED_COLUMN = {"yeast-1_vs_7": 5}


def fetch_wheel(dest):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", WHEEL, "--no-deps", "-d", str(dest)],
        check=True,
    )
    return next(pathlib.Path(dest).glob("keel_ds-*.whl"))


def read_rows(wheel, kind, name):
    text = wheel.read(RAW.format(kind=kind, name=name)).decode()
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([f.strip() for f in line.split(",")])
    return rows


def key(values):
    return tuple(round(float(v), 2) for v in values)


def build_yeast(wheel):
    base = read_rows(wheel, "imbalanced", "yeast1")
    features = [key(r[:-1]) for r in base]
    labels = [None] * len(base)
    for name, side, cls in YEAST_RULES:
        pool = collections.Counter()
        for r in read_rows(wheel, "imbalanced", name):
            if r[-1] == side:
                pool[key(r[:-1])] += 1
        drop = DROPPED_COLUMN.get(name)
        for i, f in enumerate(features):
            if labels[i] is not None:
                continue
            k = f if drop is None else f[:drop] + f[drop + 1:]
            if pool[k] > 0:
                pool[k] -= 1
                labels[i] = cls
        leftover = sum(pool.values())
        if leftover:
            raise SystemExit(f"{name}: {leftover} {side} rows did not match")
    for i, f in enumerate(features):
        if labels[i] is None:
            labels[i] = "ERL" if f[4] == 1.0 else "MIT"
    return features, labels


def build_mushrooms(wheel):
    rows = read_rows(wheel, "balanced", "mushroom")
    n_attr = len(rows[0]) - 1
    values = [sorted({r[a] for r in rows}) for a in range(n_attr)]
    offsets, total = [], 0
    for v in values:
        offsets.append(total)
        total += len(v)
    lines = []
    for r in rows:
        idx = [offsets[a] + values[a].index(r[a]) + 1 for a in range(n_attr)]
        label = "1" if r[-1] == "e" else "2"
        lines.append(label + " " + " ".join(f"{i}:1" for i in idx))
    return lines, total


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--wheel", type=pathlib.Path, help="local keel-ds wheel (downloaded if absent)")
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path(__file__).resolve().parent.parent / "data")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel_path = args.wheel or fetch_wheel(tmp)
        with zipfile.ZipFile(wheel_path) as wheel:
            mushrooms, n_mush = build_mushrooms(wheel)
            yeast_x, yeast_y = build_yeast(wheel)

    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "mushrooms").write_text("\n".join(mushrooms) + "\n")
    with open(args.out / "yeast", "w") as f:
        for x, y in zip(yeast_x, yeast_y):
            cols = " ".join(f"{i + 1}:{v:g}" for i, v in enumerate(x) if v != 0.0)
            f.write(f"{YEAST_CLASSES.index(y) + 1} {cols}\n")

    counts = collections.Counter(yeast_y)
    print(f"mushrooms: {len(mushrooms)} rows, {n_mush} features")
    print("yeast: " + ", ".join(f"{c} {counts[c]}" for c in YEAST_CLASSES))


if __name__ == "__main__":
    main()
