#!/usr/bin/env python3
"""Materialise the datasets used by the bundled recipes and the acceptance suite.

The sandboxed build environment can reach PyPI but not the original dataset
hosts, so the files are recovered from two wheels that ship them verbatim:

* ``recbole`` bundles MovieLens 100K as atomic files whose rating rows keep the
  original ``u.data`` order. The standard ``u.data``/``u.user``/``u.item``
  files and the ``u1..u5`` 80:20 splits are rebuilt from them, the splits with
  the same block procedure as the ``mku.sh`` script shipped with the dataset.
* ``pytorch-widedeep`` bundles the 1990 California housing census table.

Usage: python3 scripts/prepare_data.py [OUT_DIR]   (default: ./data)
"""

import glob
import io
import os
import subprocess
import sys
import tempfile
import zipfile

GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]


def fetch_wheel(package, workdir):
    subprocess.check_call(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q", package, "-d", workdir]
    )
    return zipfile.ZipFile(glob.glob(os.path.join(workdir, "*.whl"))[0])


def atomic_rows(blob):
    lines = blob.decode("utf-8").splitlines()
    return [line.split("\t") for line in lines[1:] if line]


def write_movielens(out_dir, work):
    wheel = fetch_wheel("recbole==1.2.1", os.path.join(work, "recbole"))
    base = "recbole/dataset_example/ml-100k/ml-100k."
    inter = atomic_rows(wheel.read(base + "inter"))
    users = atomic_rows(wheel.read(base + "user"))
    items = atomic_rows(wheel.read(base + "item"))

    ml = os.path.join(out_dir, "ml-100k")
    os.makedirs(ml, exist_ok=True)

    data_lines = ["\t".join(r[:4]) for r in inter]
    with open(os.path.join(ml, "u.data"), "w") as f:
        f.write("\n".join(data_lines) + "\n")

    with open(os.path.join(ml, "u.user"), "w") as f:
        for uid, age, gender, occupation, zipcode in users:
            f.write(f"{uid}|{age}|{gender}|{occupation}|{zipcode}\n")

    with open(os.path.join(ml, "u.item"), "w", encoding="latin-1") as f:
        for row in items:
            iid, title, year = row[0], row[1], row[2]
            tags = set(row[3].split()) if len(row) > 3 else set()
            flags = "|".join("1" if g in tags else "0" for g in GENRES)
            f.write(f"{iid}|{title} ({year})|||{flags}\n".encode("latin-1", "replace").decode("latin-1"))

    def key(line):
        parts = line.split("\t")
        return (int(parts[0]), int(parts[1]))

    for i in range(1, 6):
        test = data_lines[(i - 1) * 20000 : i * 20000]
        train = data_lines[: (i - 1) * 20000] + data_lines[i * 20000 :]
        for name, rows in ((f"u{i}.test", test), (f"u{i}.base", train)):
            with open(os.path.join(ml, name), "w") as f:
                f.write("\n".join(sorted(rows, key=key)) + "\n")
    print(f"wrote MovieLens 100K to {ml} ({len(data_lines)} ratings)")


def write_california(out_dir, work):
    import pandas as pd

    wheel = fetch_wheel("pytorch-widedeep==1.7.0", os.path.join(work, "widedeep"))
    blob = wheel.read("pytorch_widedeep/datasets/data/california_housing.parquet.brotli")
    df = pd.read_parquet(io.BytesIO(blob))
    df = df.rename(
        columns={
            "Longitude": "longitude",
            "Latitude": "latitude",
            "MedHouseVal": "median_house_value",
            "MedInc": "median_income",
            "HouseAge": "housing_median_age",
            "AveRooms": "average_rooms",
            "AveBedrms": "average_bedrooms",
            "Population": "population",
            "AveOccup": "average_occupancy",
        }
    )
    path = os.path.join(out_dir, "california")
    os.makedirs(path, exist_ok=True)
    df.to_csv(os.path.join(path, "cadata.csv"), index=False, lineterminator="\n")
    print(f"wrote California housing to {path} ({len(df)} rows)")


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "data"
    os.makedirs(out_dir, exist_ok=True)
    with tempfile.TemporaryDirectory() as work:
        write_movielens(out_dir, work)
        write_california(out_dir, work)


if __name__ == "__main__":
    main()
