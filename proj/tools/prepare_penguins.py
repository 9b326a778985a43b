#!/usr/bin/env python3
"""Rebuild data/penguins.csv from the palmerpenguins package.

Keeps the seven measurement/label columns under their culmen_* names and
drops rows with any missing value (333 complete records remain).

    pip download palmerpenguins --no-deps -d /tmp/pp
    python3 tools/prepare_penguins.py /tmp/pp/palmerpenguins-*.whl data/penguins.csv
"""
import csv
import io
import sys
import zipfile

RENAME = {
    "species": "species",
    "island": "island",
    "bill_length_mm": "culmen_length_mm",
    "bill_depth_mm": "culmen_depth_mm",
    "flipper_length_mm": "flipper_length_mm",
    "body_mass_g": "body_mass_g",
    "sex": "sex",
}


def main(wheel, out_path):
    with zipfile.ZipFile(wheel) as zf:
        text = zf.read("palmerpenguins/data/penguins.csv").decode("utf-8")
    rows = list(csv.DictReader(io.StringIO(text)))
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RENAME.values())
        kept = 0
        for row in rows:
            values = [row[k] for k in RENAME]
            if any(v in ("", "NA") for v in values):
                continue
            writer.writerow(values)
            kept += 1
    print(f"wrote {kept} rows to {out_path}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
