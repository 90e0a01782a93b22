"""Add a header to the UCI ``drug_consumption.data`` file.

    python scripts/prepare_drug.py path/to/drug_consumption.data data/drug_consumption.csv
"""
import csv
import sys

COLUMNS = [
    "id", "age", "gender", "education", "country", "ethnicity", "nscore",
    "escore", "oscore", "ascore", "cscore", "impulsive", "ss", "alcohol",
    "amphet", "amyl", "benzos", "caff", "cannabis", "choc", "coke", "crack",
    "ecstasy", "heroin", "ketamine", "legalh", "lsd", "meth", "mushrooms",
    "nicotine", "semer", "vsa",
]


def main(src, dst):
    with open(src, newline="") as fin, open(dst, "w", newline="") as fout:
        writer = csv.writer(fout)
        writer.writerow(COLUMNS)
        for row in csv.reader(fin):
            if not row:
                continue
            if len(row) != len(COLUMNS):
                raise SystemExit(f"unexpected field count {len(row)}")
            writer.writerow(row)


if __name__ == "__main__":
    if len(sys.argv) != 3:
        raise SystemExit(__doc__)
    main(sys.argv[1], sys.argv[2])
