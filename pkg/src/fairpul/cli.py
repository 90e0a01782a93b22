"""Command line entry point: ``fairpul run | predict | synth``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .dataset import CsvSchema, SchemaError, Standardizer, SyntheticSpec, load_csv, \
    default_gaussian_spec, synthesize_gaussian
from .fair_postprocess import FairClassifier, FairnessCriterion
from .harness import ConfigError, ExperimentConfig, emit_report, preprocessing_document, \
    run_experiment, run_trial
from .metrics import evaluate

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairpul", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured experiment")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--out", type=Path, help="report path (default: stdout)")
    run.add_argument("--format", default="csv", choices=("csv", "json", "md"))
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--model-out", type=Path,
                     help="directory for the trial-0 fair classifiers")

    pred = sub.add_parser("predict", help="score a CSV with a saved fair classifier")
    pred.add_argument("--model", required=True, type=Path)
    pred.add_argument("--data", required=True, type=Path)
    pred.add_argument("--out", type=Path, help="predictions CSV (default: stdout)")

    syn = sub.add_parser("synth", help="write a synthetic Gaussian data set as CSV")
    syn.add_argument("--spec", default="default",
                     help="JSON cell spec, or 'default'")
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--out", required=True, type=Path)
    return p


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    report = run_experiment(cfg, jobs=args.jobs)
    text = emit_report(report, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)
    if args.model_out is not None and any(m.startswith("fairpul") for m in cfg.methods):
        args.model_out.mkdir(parents=True, exist_ok=True)
        _, models, data = run_trial(cfg, 0, keep_models=True)
        prep = preprocessing_document(cfg, data)
        for name, clf in models.items():
            FairClassifier(clf.scorer, clf.c_hat, clf.stats, clf.lam, clf.criterion,
                           clf.diagnostics, prep).save(args.model_out / f"{name}.json")
    return EXIT_OK


def _cmd_predict(args) -> int:
    try:
        clf = FairClassifier.load(args.model)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load model {args.model}: {exc}") from None
    prep = clf.preprocessing
    if not prep:
        raise ConfigError("model has no preprocessing block; re-export it with `run --model-out`")
    schema = CsvSchema.from_dict(prep["schema"])
    data = load_csv(args.data, schema, require_target=False, categories=prep.get("categories"))
    if "standardizer" in prep:
        data = Standardizer.from_dict(prep["standardizer"]).transform(data)
    pred = clf.predict_dataset(data)
    post = clf.posterior(data.features, data.sensitive)

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["sensitive", "posterior", "prediction"])
        for s, p, g in zip(data.sensitive, post, pred):
            w.writerow([int(s), repr(float(p)), int(g)])
    finally:
        if args.out:
            out.close()
    if data.ground_truth is not None:
        ev = evaluate(pred, data.ground_truth, data.sensitive)
        crit = FairnessCriterion.parse(clf.criterion).value
        print(f"[{crit}] n={len(data)} f1={ev.f1:.3f} error={ev.error:.3f} "
              f"aod={ev.aod:.3f} eod={ev.eod:.3f}", file=sys.stderr)
    return EXIT_OK


def _cmd_synth(args) -> int:
    if args.spec == "default":
        spec = default_gaussian_spec()
    else:
        try:
            spec = SyntheticSpec.from_dict(json.loads(Path(args.spec).read_text()))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad synthetic spec {args.spec}: {exc}") from None
    data = synthesize_gaussian(spec, args.seed)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(data.feature_names) + ["s", "y"])
        for x, s, y in zip(data.features, data.sensitive, data.ground_truth):
            w.writerow([repr(float(v)) for v in x] + [int(s), int(y)])
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    handler = {"run": _cmd_run, "predict": _cmd_predict, "synth": _cmd_synth}[args.command]
    try:
        return handler(args)
    except (ConfigError, SchemaError, FileNotFoundError) as exc:
        print(f"fairpul: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"fairpul: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
