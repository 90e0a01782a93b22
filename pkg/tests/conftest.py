from pathlib import Path

import numpy as np
import pytest

from fairpul.dataset import Dataset, apply_scar, load_csv, load_schema, default_gaussian_spec, \
    split, synthesize_gaussian

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"
COMPAS_CSV = DATA / "compas-scores-two-years.csv"
GERMAN_CSV = DATA / "german.csv"

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def compas():
    if not COMPAS_CSV.is_file():
        pytest.skip("COMPAS CSV not present")
    return load_csv(COMPAS_CSV, load_schema("compas"))


@pytest.fixture(scope="session")
def synthetic():
    return synthesize_gaussian(default_gaussian_spec(), seed=11)


@pytest.fixture(scope="session")
def synthetic_pu(synthetic):
    """(pool, validation) at labeling rate 0.6."""
    pu = apply_scar(synthetic, 0.6, seed=3)
    return split(pu, (0.8, 0.2), seed=4, stratify_on_label=True)


def random_dataset(rng: np.random.Generator, n: int = 40, d: int = 3, rate: float = 0.5) -> Dataset:
    x = rng.standard_normal((n, d))
    s = np.r_[0, 1, rng.integers(0, 2, n - 2)]
    y = np.r_[1, 1, rng.integers(0, 2, n - 2)]
    label = y * (rng.random(n) < rate)
    label[:2] = 1
    return Dataset(x, s, label, y)
