"""Config-driven experiment runner.

Every trial derives its randomness from ``(master_seed, trial, stage label)``,
so results do not depend on method order or on how trials are spread over
worker processes.  Within a trial all methods share the split, the SCAR mask,
the validation holdout and the fitted PU scorer.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .base_model import FitHyperparams, fit_logistic
from .baselines import fit_naive, fit_oracle, fit_weighted_pu
from .dataset import (
    CsvSchema,
    Dataset,
    Standardizer,
    SyntheticSpec,
    apply_scar,
    categories_of,
    concat,
    load_csv,
    load_schema,
    default_gaussian_spec,
    split,
    synthesize_gaussian,
)
from .fair_postprocess import AnnealParams, FairClassifier, fairpul_fit
from .metrics import evaluate
from .pu_estimation import estimate_label_frequency

__all__ = [
    "METHODS",
    "ConfigError",
    "DatasetConfig",
    "ExperimentConfig",
    "TrialRecord",
    "ExperimentReport",
    "derive_seed",
    "prepare_trial",
    "run_trial",
    "run_experiment",
    "emit_report",
]

METHODS = ("fairpul-eo", "fairpul-eop", "naive", "oracle", "wpu")
METRICS = ("f1", "error", "aod", "eod")


class ConfigError(ValueError):
    pass


def derive_seed(master_seed: int, trial: int, *labels: Any) -> int:
    """Stable 32-bit seed for one (trial, stage) pair."""
    words = [int(master_seed) & 0xFFFFFFFF, int(trial)]
    for label in labels:
        if isinstance(label, float):
            words.append(int(round(label * 1_000_000)))
        elif isinstance(label, int):
            words.append(label)
        else:
            words.append(zlib.crc32(str(label).encode()))
    return int(np.random.SeedSequence(words).generate_state(1)[0])


# --------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class DatasetConfig:
    kind: str
    path: str | None = None
    schema: str | None = None
    synthetic: Mapping[str, Any] | str | None = None
    standardize: bool = True

    def __post_init__(self):
        if self.kind == "csv":
            if not (self.path and self.schema):
                raise ConfigError("csv dataset needs 'path' and 'schema'")
        elif self.kind == "synthetic":
            if self.synthetic is None:
                object.__setattr__(self, "synthetic", "default")
        else:
            raise ConfigError(f"unknown dataset kind {self.kind!r}")

    def synthetic_spec(self) -> SyntheticSpec:
        if self.synthetic == "default":
            return default_gaussian_spec()
        if isinstance(self.synthetic, Mapping):
            try:
                return SyntheticSpec.from_dict(self.synthetic)
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"bad synthetic spec: {exc}") from None
        raise ConfigError(f"unknown synthetic spec {self.synthetic!r}")

    def load_schema(self) -> CsvSchema:
        try:
            return load_schema(self.schema)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    methods: tuple[str, ...] = METHODS
    rates: tuple[float, ...] = (0.9,)
    trials: int = 10
    master_seed: int = 0
    test_fraction: float = 0.3
    holdout_ratio: float = 0.2
    scar_mode: str = "exact"
    base_model: FitHyperparams = field(default_factory=FitHyperparams)
    anneal: AnnealParams = field(default_factory=AnnealParams)
    pool_fractions: tuple[float, ...] | None = None
    base_fraction: float = 0.5
    grid_check: int | None = 41
    name: str = "experiment"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.methods:
            raise ConfigError("no methods configured")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if not self.rates or any(not 0 < r <= 1 for r in self.rates):
            raise ConfigError("labeling rates must lie in (0, 1]")
        if not 0 < self.test_fraction < 1 or not 0 < self.holdout_ratio < 1:
            raise ConfigError("test_fraction and holdout_ratio must lie in (0, 1)")
        if self.scar_mode not in ("exact", "bernoulli"):
            raise ConfigError(f"unknown scar_mode {self.scar_mode!r}")
        if self.pool_fractions is not None:
            if any(not 0 <= q <= 1 - self.base_fraction + 1e-12 for q in self.pool_fractions):
                raise ConfigError("pool fractions must lie in [0, 1 - base_fraction]")
        if self.grid_check is not None and self.grid_check < 3:
            raise ConfigError("grid_check resolution must be >= 3")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], base_dir: str | Path = ".") -> "ExperimentConfig":
        d = dict(d)
        try:
            ds = dict(d.pop("dataset"))
        except KeyError:
            raise ConfigError("config is missing 'dataset'") from None
        base_dir = Path(base_dir)
        if ds.get("path"):
            p = Path(ds["path"])
            ds["path"] = str(p if p.is_absolute() else base_dir / p)
        if ds.get("schema") and str(ds["schema"]).endswith(".json"):
            p = Path(ds["schema"])
            ds["schema"] = str(p if p.is_absolute() else base_dir / p)
        try:
            kwargs: dict[str, Any] = {"dataset": DatasetConfig(**ds)}
            if "base_model" in d:
                kwargs["base_model"] = FitHyperparams(**d.pop("base_model"))
            if "anneal" in d:
                an = dict(d.pop("anneal"))
                if isinstance(an.get("search_box"), list):
                    an["search_box"] = tuple(an["search_box"])
                kwargs["anneal"] = AnnealParams(**an)
            for key in ("methods", "rates", "pool_fractions"):
                if d.get(key) is not None:
                    kwargs[key] = tuple(d.pop(key))
                else:
                    d.pop(key, None)
            allowed = {f.name for f in fields(cls)}
            extra = set(d) - allowed
            if extra:
                raise ConfigError(f"unknown config keys {sorted(extra)}")
            kwargs.update(d)
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(raw, path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dataset"] = dict(asdict(self.dataset))
        d["anneal"]["search_box"] = (None if self.anneal.search_box is None
                                     else list(self.anneal.search_box))
        for key in ("methods", "rates", "pool_fractions"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d


# --------------------------------------------------------------------------
# report types

@dataclass(frozen=True)
class TrialRecord:
    method: str
    rate: float
    pool_fraction: float | None
    trial: int
    seed: int
    f1: float
    error: float
    aod: float
    eod: float
    tpr0: float
    tpr1: float
    fpr0: float
    fpr1: float
    positive_rate: float
    c_hat: float | None = None
    lambda1: float | None = None
    lambda2: float | None = None
    delta_hat: float | None = None
    delta_hat_grid: float | None = None
    n_train: int = 0
    n_labeled: int = 0
    timings: Mapping[str, float] = field(default_factory=dict, compare=False)

    @property
    def cell(self) -> tuple[str, float, float | None]:
        return (self.method, self.rate, self.pool_fraction)


CSV_COLUMNS = ["row_type"] + [f.name for f in fields(TrialRecord) if f.name != "timings"]
_INT_COLUMNS = {"trial", "seed", "n_train", "n_labeled"}


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ExperimentReport:
    config: Mapping[str, Any]
    records: list[TrialRecord]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExperimentReport):
            return NotImplemented
        return self.config == other.config and self.records == other.records

    def cells(self) -> list[tuple[str, float, float | None]]:
        seen: dict = {}
        for r in self.records:
            seen.setdefault(r.cell, None)
        return list(seen)

    def select(self, method: str, rate: float, pool_fraction: float | None = None
               ) -> list[TrialRecord]:
        return [r for r in self.records
                if r.method == method and math.isclose(r.rate, rate)
                and (r.pool_fraction == pool_fraction
                     or (r.pool_fraction is not None and pool_fraction is not None
                         and math.isclose(r.pool_fraction, pool_fraction)))]

    def aggregate(self) -> list[dict]:
        """Mean and (population) standard deviation per (method, rate, pool) cell."""
        out = []
        for method, rate, q in self.cells():
            rows = self.select(method, rate, q)
            entry = {"method": method, "rate": rate, "pool_fraction": q, "n": len(rows)}
            for m in METRICS + ("c_hat", "delta_hat"):
                vals = [getattr(r, m) for r in rows if getattr(r, m) is not None]
                entry[m] = float(np.mean(vals)) if vals else None
                entry[m + "_std"] = float(np.std(vals)) if vals else None
            out.append(entry)
        return out

    # -- serialization

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow(["trial"] + [_fmt(getattr(r, c)) for c in CSV_COLUMNS[1:]])
        for agg in self.aggregate():
            for kind, suffix in (("mean", ""), ("std", "_std")):
                row = {c: "" for c in CSV_COLUMNS}
                row.update(row_type=kind, method=agg["method"], rate=_fmt(agg["rate"]),
                           pool_fraction=_fmt(agg["pool_fraction"]))
                for m in METRICS + ("c_hat", "delta_hat"):
                    row[m] = _fmt(agg[m + suffix])
                w.writerow([row[c] for c in CSV_COLUMNS])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "records": [asdict(r) for r in self.records],
            "aggregates": self.aggregate(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ExperimentReport":
        return cls(d["config"], [TrialRecord(**r) for r in d["records"]])

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls.from_dict(json.loads(text))

    def to_markdown(self) -> str:
        blocks = []
        keys: dict = {}
        for _, rate, q in self.cells():
            keys.setdefault((rate, q), None)
        aggs = self.aggregate()
        for rate, q in keys:
            title = f"### labeling rate {rate:g}"
            if q is not None:
                title += f", unlabeled pool {q:g}"
            lines = [title, "", "| Method | F1 | Error | AOD | EOD |",
                     "|---|---|---|---|---|"]
            for a in aggs:
                if a["rate"] == rate and a["pool_fraction"] == q:
                    cells = [f"{a[m]:.3f}±{a[m + '_std']:.3f}" for m in METRICS]
                    lines.append(f"| {a['method']} | " + " | ".join(cells) + " |")
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks) + "\n"


def emit_report(report: ExperimentReport, fmt: str, path: str | Path | None) -> str:
    """Render ``report`` as csv, json or md; write it to ``path`` when given."""
    render = {"csv": report.to_csv, "json": report.to_json,
              "md": report.to_markdown, "markdown": report.to_markdown}
    if fmt not in render:
        raise ValueError(f"unknown report format {fmt!r}")
    text = render[fmt]()
    if path is not None:
        Path(path).write_text(text)
    return text


# --------------------------------------------------------------------------
# trials

@dataclass(frozen=True)
class TrialData:
    train: Dataset
    test: Dataset
    standardizer: Standardizer | None


def _load_source(cfg: ExperimentConfig) -> Dataset | None:
    if cfg.dataset.kind != "csv":
        return None
    schema = cfg.dataset.load_schema()
    try:
        return load_csv(cfg.dataset.path, schema)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None


def prepare_trial(cfg: ExperimentConfig, trial: int, source: Dataset | None = None) -> TrialData:
    if cfg.dataset.kind == "csv":
        if source is None:
            source = _load_source(cfg)
        train, test = split(source, (1 - cfg.test_fraction, cfg.test_fraction),
                            derive_seed(cfg.master_seed, trial, "split"),
                            stratify_on_label=True)
    else:
        spec = cfg.dataset.synthetic_spec()
        train = synthesize_gaussian(spec, derive_seed(cfg.master_seed, trial, "synth-train"))
        test = synthesize_gaussian(spec, derive_seed(cfg.master_seed, trial, "synth-test"))
    std = None
    if cfg.dataset.standardize:
        std = Standardizer.fit(train)
        train, test = std.transform(train), std.transform(test)
    return TrialData(train, test, std)


def _label_exact(data: Dataset, k: int, seed: int) -> Dataset:
    pos = np.flatnonzero(data.ground_truth == 1)
    label = np.zeros(len(data), dtype=np.int8)
    label[np.random.default_rng(seed).choice(pos, size=min(k, pos.size), replace=False)] = 1
    return data.with_labels(label)


def _pu_variants(cfg: ExperimentConfig, data: TrialData, trial: int, rate: float):
    """Yield ``(pool_fraction, PU training set)`` for one labeling rate."""
    if cfg.pool_fractions is None:
        seed = derive_seed(cfg.master_seed, trial, "scar", rate)
        yield None, apply_scar(data.train, rate, seed, cfg.scar_mode)
        return
    train = data.train
    f = cfg.base_fraction
    base, pool = split(train, (f, 1 - f), derive_seed(cfg.master_seed, trial, "pool"),
                       stratify_on_label=True)
    order = np.random.default_rng(derive_seed(cfg.master_seed, trial, "pool-order")
                                  ).permutation(len(pool))
    n_fixed = math.ceil(rate * int(base.ground_truth.sum()) - 1e-9)
    for q in cfg.pool_fractions:
        k = min(len(pool), int(round(q * len(train))))
        current = concat([base, pool.subset(order[:k])]) if k else base
        seed = derive_seed(cfg.master_seed, trial, "scar", rate, q)
        yield q, _label_exact(current, n_fixed, seed)


def _record(method, rate, q, trial, seed, pred, test, pu, **extra) -> TrialRecord:
    ev = evaluate(pred, test.ground_truth, test.sensitive)
    return TrialRecord(method, rate, q, trial, seed, ev.f1, ev.error, ev.aod, ev.eod,
                       ev.tpr[0], ev.tpr[1], ev.fpr[0], ev.fpr[1], ev.positive_rate,
                       n_train=len(pu), n_labeled=int(pu.label_indicator.sum()), **extra)


def run_trial(cfg: ExperimentConfig, trial: int, source: Dataset | None = None,
              keep_models: bool = False):
    """Run every (rate, pool fraction, method) cell of one trial.

    Returns the records, plus the fitted fair classifiers when ``keep_models``.
    """
    t0 = time.perf_counter()
    data = prepare_trial(cfg, trial, source)
    trial_seed = derive_seed(cfg.master_seed, trial)
    records: list[TrialRecord] = []
    models: dict[str, FairClassifier] = {}
    t_prep = time.perf_counter() - t0
    for rate in cfg.rates:
        for q, pu in _pu_variants(cfg, data, trial, rate):
            pool, val = split(pu, (1 - cfg.holdout_ratio, cfg.holdout_ratio),
                              derive_seed(cfg.master_seed, trial, "holdout", rate, q or 0.0),
                              stratify_on_label=True)
            ts = time.perf_counter()
            scorer = fit_logistic(pool, cfg.base_model)
            t_scorer = time.perf_counter() - ts
            for method in cfg.methods:
                tm = time.perf_counter()
                extra: dict[str, Any] = {}
                if method.startswith("fairpul"):
                    crit = method.split("-", 1)[1]
                    anneal = AnnealParams(**{**asdict(cfg.anneal), "seed": derive_seed(
                        cfg.master_seed, trial, "anneal", rate, q or 0.0, crit)})
                    clf = fairpul_fit(pool, val, scorer, crit, anneal, cfg.grid_check)
                    pred = clf.predict_dataset(data.test)
                    extra = dict(c_hat=clf.c_hat, lambda1=clf.lam.lambda1,
                                 lambda2=clf.lam.lambda2,
                                 delta_hat=clf.diagnostics["delta_hat"],
                                 delta_hat_grid=clf.diagnostics.get("delta_hat_grid"))
                    if keep_models:
                        models[f"{method}_rate{rate:g}" + ("" if q is None else f"_pool{q:g}")] = clf
                elif method == "naive":
                    pred = fit_naive(pool, cfg.base_model, model=scorer).predict_dataset(data.test)
                elif method == "oracle":
                    pred = fit_oracle(pool, cfg.base_model).predict_dataset(data.test)
                else:
                    c = estimate_label_frequency(scorer, val)
                    pred = fit_weighted_pu(pool, scorer, c, cfg.base_model).predict_dataset(data.test)
                    extra = dict(c_hat=c.c_hat)
                timings = {"prepare": t_prep, "scorer_fit": t_scorer,
                           "method": time.perf_counter() - tm}
                records.append(_record(method, rate, q, trial, trial_seed, pred, data.test, pool,
                                       timings=timings, **extra))
    if keep_models:
        return records, models, data
    return records


def _run_trial_worker(args):
    cfg, trial, source = args
    return run_trial(cfg, trial, source)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    source = _load_source(cfg)  # surfaces file/schema errors before any trial
    if cfg.dataset.kind == "synthetic":
        cfg.dataset.synthetic_spec()
    work = [(cfg, t, source) for t in range(cfg.trials)]
    if jobs > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_trial = list(pool.map(_run_trial_worker, work))
    else:
        per_trial = [_run_trial_worker(w) for w in work]
    records = [r for rs in per_trial for r in rs]
    return ExperimentReport(cfg.to_dict(), records)


def preprocessing_document(cfg: ExperimentConfig, data: TrialData) -> dict:
    """What ``predict`` needs to turn a raw CSV into model inputs."""
    if cfg.dataset.kind == "csv":
        schema = cfg.dataset.load_schema().to_dict()
    else:
        schema = load_schema("synthetic").to_dict()
    doc: dict[str, Any] = {"schema": schema, "categories": categories_of(data.train),
                           "feature_names": list(data.train.feature_names)}
    if data.standardizer is not None:
        doc["standardizer"] = data.standardizer.to_dict()
    return doc
