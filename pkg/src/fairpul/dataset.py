"""Tabular PU datasets: CSV ingestion, Gaussian synthesis, SCAR masking, splits.

A :class:`Dataset` stores columns as read-only numpy arrays.  The sensitive
attribute is kept separate from ``features``; models append it themselves.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from importlib import resources
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "Example",
    "Dataset",
    "GaussianCell",
    "SyntheticSpec",
    "FeatureSpec",
    "RowFilter",
    "CsvSchema",
    "Standardizer",
    "SchemaError",
    "load_csv",
    "load_schema",
    "synthesize_gaussian",
    "default_gaussian_spec",
    "apply_scar",
    "split",
    "concat",
]


class SchemaError(ValueError):
    """Raised for malformed schemas or CSV files that do not match them."""


@dataclass(frozen=True)
class Example:
    features: np.ndarray
    sensitive: int
    label_indicator: int
    ground_truth: int | None = None


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable collection of ``(x, s, l[, y])`` rows.

    ``numeric`` flags the feature columns that standardization should touch;
    one-hot columns are left alone.
    """

    features: np.ndarray
    sensitive: np.ndarray
    label_indicator: np.ndarray
    ground_truth: np.ndarray | None = None
    feature_names: tuple[str, ...] = ()
    numeric: np.ndarray | None = None
    provenance: str = ""

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise ValueError("features must be a 2-d array")
        n, d = x.shape
        if n == 0:
            raise ValueError("dataset is empty")
        s = np.asarray(self.sensitive).astype(np.int8)
        l = np.asarray(self.label_indicator).astype(np.int8)
        if s.shape != (n,) or l.shape != (n,):
            raise ValueError("sensitive/label_indicator must have one entry per row")
        for name, arr in (("sensitive", s), ("label_indicator", l)):
            if not np.isin(arr, (0, 1)).all():
                raise ValueError(f"{name} must be binary")
        if not (np.any(s == 0) and np.any(s == 1)):
            raise ValueError("both sensitive groups must be present")
        y = None
        if self.ground_truth is not None:
            y = np.asarray(self.ground_truth).astype(np.int8)
            if y.shape != (n,) or not np.isin(y, (0, 1)).all():
                raise ValueError("ground_truth must be binary with one entry per row")
            if np.any((l == 1) & (y == 0)):
                raise ValueError("a labeled example has ground_truth 0")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(d))
        if len(names) != d:
            raise ValueError("feature_names length does not match feature dimension")
        numeric = (np.ones(d, dtype=bool) if self.numeric is None
                   else np.asarray(self.numeric, dtype=bool))
        if numeric.shape != (d,):
            raise ValueError("numeric mask length does not match feature dimension")
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "sensitive", _frozen(s))
        object.__setattr__(self, "label_indicator", _frozen(l))
        object.__setattr__(self, "ground_truth", None if y is None else _frozen(y))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "numeric", _frozen(numeric))

    def __len__(self) -> int:
        return self.features.shape[0]

    def __getitem__(self, i: int) -> Example:
        y = None if self.ground_truth is None else int(self.ground_truth[i])
        return Example(self.features[i], int(self.sensitive[i]),
                       int(self.label_indicator[i]), y)

    def __iter__(self) -> Iterator[Example]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        same_y = (self.ground_truth is None and other.ground_truth is None) or (
            self.ground_truth is not None and other.ground_truth is not None
            and np.array_equal(self.ground_truth, other.ground_truth))
        return (same_y
                and self.feature_names == other.feature_names
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.sensitive, other.sensitive)
                and np.array_equal(self.label_indicator, other.label_indicator)
                and np.array_equal(self.numeric, other.numeric))

    @property
    def dimension(self) -> int:
        return self.features.shape[1]

    def subset(self, index: np.ndarray, provenance: str | None = None) -> "Dataset":
        index = np.asarray(index)
        y = None if self.ground_truth is None else self.ground_truth[index]
        return Dataset(self.features[index], self.sensitive[index],
                       self.label_indicator[index], y, self.feature_names,
                       self.numeric,
                       self.provenance if provenance is None else provenance)

    def with_labels(self, label_indicator: np.ndarray, provenance: str | None = None) -> "Dataset":
        return replace(self, label_indicator=label_indicator,
                       provenance=self.provenance if provenance is None else provenance)

    def with_features(self, features: np.ndarray) -> "Dataset":
        return replace(self, features=features)


def concat(parts: Sequence[Dataset], provenance: str = "") -> Dataset:
    first = parts[0]
    has_y = all(p.ground_truth is not None for p in parts)
    return Dataset(
        np.vstack([p.features for p in parts]),
        np.concatenate([p.sensitive for p in parts]),
        np.concatenate([p.label_indicator for p in parts]),
        np.concatenate([p.ground_truth for p in parts]) if has_y else None,
        first.feature_names, first.numeric, provenance or first.provenance,
    )


# --------------------------------------------------------------------------
# Standardization

@dataclass(frozen=True)
class Standardizer:
    """Z-score numeric feature columns with statistics from one split."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, data: Dataset) -> "Standardizer":
        mean = np.zeros(data.dimension)
        scale = np.ones(data.dimension)
        cols = data.numeric
        if cols.any():
            mean[cols] = data.features[:, cols].mean(axis=0)
            sd = data.features[:, cols].std(axis=0)
            scale[cols] = np.where(sd > 0, sd, 1.0)
        return cls(mean, scale)

    def transform(self, data: Dataset) -> Dataset:
        return data.with_features((data.features - self.mean) / self.scale)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["scale"], dtype=float))


# --------------------------------------------------------------------------
# Gaussian synthesis

@dataclass(frozen=True)
class GaussianCell:
    mean: tuple[float, ...]
    variance: float
    count: int

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance}")
        if int(self.count) <= 0:
            raise ValueError(f"count must be positive, got {self.count}")


@dataclass(frozen=True)
class SyntheticSpec:
    """Isotropic Gaussian cells keyed by ``(group, label)``, group/label in {0, 1}."""

    cells: Mapping[tuple[int, int], GaussianCell]

    def __post_init__(self):
        if not self.cells:
            raise ValueError("spec has no cells")
        dims = {len(c.mean) for c in self.cells.values()}
        if len(dims) != 1:
            raise ValueError("all cells must share one mean dimension")
        for key in self.cells:
            if key[0] not in (0, 1) or key[1] not in (0, 1):
                raise ValueError(f"bad cell key {key}")
        if {k[0] for k in self.cells} != {0, 1}:
            raise ValueError("spec must cover both groups")

    def to_dict(self) -> dict:
        return {"cells": [
            {"group": g, "label": y, "mean": list(c.mean), "variance": c.variance,
             "count": c.count}
            for (g, y), c in sorted(self.cells.items())]}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SyntheticSpec":
        cells = {}
        for c in d["cells"]:
            cells[(int(c["group"]), int(c["label"]))] = GaussianCell(
                tuple(float(v) for v in c["mean"]), float(c["variance"]), int(c["count"]))
        return cls(cells)


def default_gaussian_spec() -> SyntheticSpec:
    """Two-group benchmark; group 0 plays group ``a`` and group 1 group ``b``."""
    return SyntheticSpec({
        (0, 1): GaussianCell((-1.0, -1.0), 0.8, 1000),
        (0, 0): GaussianCell((1.0, 1.0), 0.8, 1000),
        (1, 1): GaussianCell((-0.5, -0.5), 0.5, 200),
        (1, 0): GaussianCell((0.5, 0.5), 0.5, 1000),
    })


def synthesize_gaussian(spec: SyntheticSpec, seed: int) -> Dataset:
    """Draw every cell of ``spec``; labels are fully revealed (``l == y``)."""
    rng = np.random.default_rng(seed)
    xs, ss, ys = [], [], []
    for (g, y), cell in sorted(spec.cells.items()):
        mu = np.asarray(cell.mean, dtype=float)
        xs.append(mu + math.sqrt(cell.variance) * rng.standard_normal((cell.count, mu.size)))
        ss.append(np.full(cell.count, g))
        ys.append(np.full(cell.count, y))
    y = np.concatenate(ys)
    d = xs[0].shape[1]
    return Dataset(np.vstack(xs), np.concatenate(ss), y, y,
                   tuple(f"x{j}" for j in range(d)), None,
                   f"synthetic gaussian seed={seed}")


# --------------------------------------------------------------------------
# SCAR masking and splitting

def apply_scar(data: Dataset, label_frequency: float, seed: int,
               mode: str = "exact") -> Dataset:
    """Reveal a SCAR subset of the positives.

    ``mode="bernoulli"`` labels each positive independently with probability
    ``label_frequency``; ``mode="exact"`` labels ``ceil(rate * n_pos)``
    positives drawn without replacement.
    """
    if data.ground_truth is None:
        raise ValueError("SCAR masking needs ground_truth")
    if not 0 < label_frequency <= 1:
        raise ValueError("label_frequency must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    pos = np.flatnonzero(data.ground_truth == 1)
    label = np.zeros(len(data), dtype=np.int8)
    if mode == "bernoulli":
        label[pos[rng.random(pos.size) < label_frequency]] = 1
    elif mode == "exact":
        k = min(pos.size, math.ceil(label_frequency * pos.size - 1e-9))
        label[rng.choice(pos, size=k, replace=False)] = 1
    else:
        raise ValueError(f"unknown SCAR mode {mode!r}")
    return data.with_labels(label, f"{data.provenance}; scar c={label_frequency} "
                                   f"mode={mode} seed={seed}")


def split(data: Dataset, fractions: Sequence[float], seed: int,
          stratify_on_label: bool = False) -> tuple[Dataset, Dataset]:
    """Random two-way partition; stratification keeps label proportions per part."""
    if len(fractions) != 2 or min(fractions) <= 0 or not math.isclose(sum(fractions), 1.0):
        raise ValueError("fractions must be two positive numbers summing to 1")
    rng = np.random.default_rng(seed)
    n = len(data)
    if stratify_on_label:
        first = []
        for value in (0, 1):
            idx = np.flatnonzero(data.label_indicator == value)
            idx = idx[rng.permutation(idx.size)]
            first.append(idx[: int(round(fractions[0] * idx.size))])
        head = np.sort(np.concatenate(first))
    else:
        head = np.sort(rng.permutation(n)[: int(round(fractions[0] * n))])
    mask = np.zeros(n, dtype=bool)
    mask[head] = True
    tail = np.flatnonzero(~mask)
    parts = []
    for tag, index in (("a", head), ("b", tail)):
        if index.size == 0:
            raise ValueError("split leaves a part empty")
        s = data.sensitive[index]
        if not (np.any(s == 0) and np.any(s == 1)):
            raise ValueError(f"split part {tag} misses a sensitive group")
        if data.label_indicator.any() and not data.label_indicator[index].any():
            raise ValueError(f"split part {tag} has no labeled positives")
        parts.append(data.subset(index, f"{data.provenance}; split {tag} seed={seed}"))
    return parts[0], parts[1]


# --------------------------------------------------------------------------
# CSV ingestion

_FILTER_OPS = {"eq", "ne", "in", "not_in", "ge", "le", "between"}


@dataclass(frozen=True)
class FeatureSpec:
    """One feature source.

    ``kind`` is ``numeric``, ``categorical`` (one-hot) or ``duration_days``
    (difference between two timestamp columns, in days).
    """

    name: str
    kind: str = "numeric"
    column: str | None = None
    start: str | None = None
    end: str | None = None

    def source_columns(self) -> tuple[str, ...]:
        if self.kind == "duration_days":
            return (self.start, self.end)
        return (self.column or self.name,)


@dataclass(frozen=True)
class RowFilter:
    column: str
    op: str
    value: Any

    def __post_init__(self):
        if self.op not in _FILTER_OPS:
            raise SchemaError(f"unknown filter op {self.op!r}")

    def keep(self, raw: str) -> bool:
        if raw == "":
            return False
        op, v = self.op, self.value
        if op == "eq":
            return raw == str(v)
        if op == "ne":
            return raw != str(v)
        if op == "in":
            return raw in {str(x) for x in v}
        if op == "not_in":
            return raw not in {str(x) for x in v}
        try:
            x = float(raw)
        except ValueError:
            return False
        if op == "ge":
            return x >= float(v)
        if op == "le":
            return x <= float(v)
        lo, hi = v
        return float(lo) <= x <= float(hi)


@dataclass(frozen=True)
class CsvSchema:
    features: tuple[FeatureSpec, ...]
    sensitive_column: str
    sensitive_mapping: Mapping[str, int]
    target_column: str
    target_mapping: Mapping[str, int]
    filters: tuple[RowFilter, ...] = ()
    name: str = ""
    description: str = ""

    def __post_init__(self):
        if not self.features:
            raise SchemaError("schema lists no features")
        cols = {c for f in self.features for c in f.source_columns()}
        if self.sensitive_column in cols or self.target_column in cols:
            raise SchemaError("sensitive/target columns must not be feature columns")
        if self.sensitive_column == self.target_column:
            raise SchemaError("sensitive and target column coincide")
        for f in self.features:
            if f.kind not in ("numeric", "categorical", "duration_days"):
                raise SchemaError(f"unknown feature kind {f.kind!r}")
            if f.kind == "duration_days" and not (f.start and f.end):
                raise SchemaError(f"duration feature {f.name!r} needs start and end")
        for mapping in (self.sensitive_mapping, self.target_mapping):
            if not set(mapping.values()) <= {0, 1}:
                raise SchemaError("value mappings must map to 0/1")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "CsvSchema":
        try:
            feats = tuple(
                FeatureSpec(f.get("name") or f["column"], f.get("kind", "numeric"),
                            f.get("column"), f.get("start"), f.get("end"))
                for f in d["features"])
            filters = tuple(RowFilter(f["column"], f["op"], f["value"])
                            for f in d.get("filters", ()))
            return cls(
                feats,
                d["sensitive"]["column"],
                {str(k): int(v) for k, v in d["sensitive"]["mapping"].items()},
                d["target"]["column"],
                {str(k): int(v) for k, v in d["target"]["mapping"].items()},
                filters, d.get("name", ""), d.get("description", ""),
            )
        except KeyError as exc:
            raise SchemaError(f"schema is missing key {exc}") from None

    def to_dict(self) -> dict:
        feats = []
        for f in self.features:
            entry = {"name": f.name, "kind": f.kind}
            if f.column:
                entry["column"] = f.column
            if f.kind == "duration_days":
                entry.update(start=f.start, end=f.end)
            feats.append(entry)
        return {
            "name": self.name,
            "description": self.description,
            "features": feats,
            "sensitive": {"column": self.sensitive_column,
                          "mapping": dict(self.sensitive_mapping)},
            "target": {"column": self.target_column, "mapping": dict(self.target_mapping)},
            "filters": [{"column": f.column, "op": f.op, "value": f.value}
                        for f in self.filters],
        }


def load_schema(name_or_path: str | Path) -> CsvSchema:
    """Load a schema by shipped name (``compas``, ``german``, ``drug``,
    ``synthetic``) or by JSON file path."""
    path = Path(name_or_path)
    if path.suffix == ".json" or path.exists():
        if not path.exists():
            raise SchemaError(f"schema file not found: {path}")
        text = path.read_text()
    else:
        res = resources.files("fairpul.schemas").joinpath(f"{name_or_path}.json")
        if not res.is_file():
            raise SchemaError(f"no shipped schema named {name_or_path!r}")
        text = res.read_text()
    return CsvSchema.from_dict(json.loads(text))


def _parse_time(raw: str) -> datetime:
    for fmt in ("%Y-%m-%d %H:%M:%S", "%Y-%m-%d"):
        try:
            return datetime.strptime(raw, fmt)
        except ValueError:
            pass
    raise ValueError(raw)


def load_csv(path: str | Path, schema: CsvSchema, require_target: bool = True,
             categories: Mapping[str, Sequence[str]] | None = None) -> Dataset:
    """Read a headed CSV into a fully labeled :class:`Dataset`.

    Rows failing a filter, or with an empty value in any used column, are
    dropped.  ``categories`` pins the one-hot levels (for scoring new files
    against a fitted model); by default they are the sorted observed levels.
    With ``require_target=False`` the target column may be absent and the
    labels are all zero.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such CSV file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        has_target = schema.target_column in header
        if require_target and not has_target:
            raise SchemaError(f"{path}: missing column {schema.target_column!r}")
        needed = {c for f in schema.features for c in f.source_columns()}
        needed |= {schema.sensitive_column} | {f.column for f in schema.filters}
        missing = sorted(needed - set(header))
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        used = needed - {f.column for f in schema.filters}
        if has_target:
            used.add(schema.target_column)

        raw_feats: list[list] = []
        sens, target = [], []
        for lineno, row in enumerate(reader, start=2):
            if not all(f.keep(row[f.column]) for f in schema.filters):
                continue
            if any(row[c] == "" for c in used):
                continue
            s_raw = row[schema.sensitive_column]
            if s_raw not in schema.sensitive_mapping:
                raise SchemaError(f"{path}:{lineno}: sensitive value {s_raw!r} is not mapped")
            sens.append(schema.sensitive_mapping[s_raw])
            if has_target:
                t_raw = row[schema.target_column]
                if t_raw not in schema.target_mapping:
                    raise SchemaError(f"{path}:{lineno}: target value {t_raw!r} is not mapped")
                target.append(schema.target_mapping[t_raw])
            values = []
            for f in schema.features:
                try:
                    if f.kind == "numeric":
                        values.append(float(row[f.column or f.name]))
                    elif f.kind == "categorical":
                        values.append(row[f.column or f.name])
                    else:
                        delta = _parse_time(row[f.end]) - _parse_time(row[f.start])
                        values.append(delta.total_seconds() / 86400.0)
                except ValueError:
                    raise SchemaError(f"{path}:{lineno}: bad value for feature {f.name!r}") from None
            raw_feats.append(values)

    if not raw_feats:
        raise SchemaError(f"{path}: no rows left after filtering")

    columns, names, numeric = [], [], []
    for j, f in enumerate(schema.features):
        col = [r[j] for r in raw_feats]
        if f.kind == "categorical":
            levels = (list(categories[f.name]) if categories and f.name in categories
                      else sorted(set(col)))
            arr = np.asarray(col)
            for level in levels:
                columns.append((arr == level).astype(float))
                names.append(f"{f.name}={level}")
                numeric.append(False)
        else:
            columns.append(np.asarray(col, dtype=float))
            names.append(f.name)
            numeric.append(True)
    x = np.column_stack(columns)
    if not np.isfinite(x).all():
        raise SchemaError(f"{path}: non-finite feature values")
    y = np.asarray(target, dtype=np.int8) if has_target else np.zeros(len(sens), np.int8)
    return Dataset(x, np.asarray(sens), y, y if has_target else None, tuple(names),
                   np.asarray(numeric), f"{path.name} schema={schema.name or '?'}")


def categories_of(data: Dataset) -> dict[str, list[str]]:
    """Recover the one-hot levels from ``name=level`` feature names."""
    out: dict[str, list[str]] = {}
    for name, num in zip(data.feature_names, data.numeric):
        if not num and "=" in name:
            key, level = name.split("=", 1)
            out.setdefault(key, []).append(level)
    return out
