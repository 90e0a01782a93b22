"""Run every experiment config and write CSV and markdown reports.

    python scripts/run_experiments.py                 # all configs/*.json
    python scripts/run_experiments.py configs/compas_rate09.json --jobs 4

Configs whose data file is missing are skipped with a note.
"""
import argparse
import time
import warnings
from pathlib import Path

from fairpul.harness import ExperimentConfig, emit_report, run_experiment

ROOT = Path(__file__).resolve().parents[1]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="*", type=Path)
    ap.add_argument("--out", type=Path, default=ROOT / "results")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    paths = args.configs or sorted((ROOT / "configs").glob("*.json"))
    args.out.mkdir(parents=True, exist_ok=True)
    for path in paths:
        cfg = ExperimentConfig.load(path)
        if cfg.dataset.kind == "csv" and not Path(cfg.dataset.path).is_file():
            print(f"skip {path.name}: {cfg.dataset.path} not found")
            continue
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            report = run_experiment(cfg, jobs=args.jobs)
        emit_report(report, "csv", args.out / f"{path.stem}.csv")
        emit_report(report, "md", args.out / f"{path.stem}.md")
        print(f"{path.name}: {len(report.records)} records in {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
