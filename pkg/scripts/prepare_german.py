"""Convert the UCI Statlog ``german.data`` file into a headed CSV.

The raw file is space separated with no header; the loader expects a
comma-separated file with named columns.

    python scripts/prepare_german.py path/to/german.data data/german.csv
"""
import csv
import sys

COLUMNS = [
    "status", "duration", "credit_history", "purpose", "credit_amount",
    "savings", "employment", "installment_rate", "personal_status_sex",
    "other_debtors", "residence_since", "property", "age",
    "other_installment_plans", "housing", "existing_credits", "job",
    "num_liable", "telephone", "foreign_worker", "credit_risk",
]


def main(src, dst):
    with open(src) as fin, open(dst, "w", newline="") as fout:
        writer = csv.writer(fout)
        writer.writerow(COLUMNS)
        for line in fin:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != len(COLUMNS):
                raise SystemExit(f"unexpected field count {len(parts)}: {line!r}")
            writer.writerow(parts)


if __name__ == "__main__":
    if len(sys.argv) != 3:
        raise SystemExit(__doc__)
    main(sys.argv[1], sys.argv[2])
