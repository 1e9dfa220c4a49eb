"""Deterministic fixtures: the three-patient example and census-style datasets.

The census-style generator synthesizes a base pool of plausible rows (15
attributes, fixed categorical domains, bounded integers) from a seeded
counter-based generator. Small sizes sample the pool without replacement;
sizes beyond the pool replicate it and jitter every numeric column by a
uniform integer in [-2, 2], clamped to the declared bounds, so replicas are
not byte-copies of each other.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .queries import And, Leaf, Query
from .tabular import Column, Dataset, Schema

# ---------------------------------------------------------------------------
# Patient example: three records, one positive


PATIENT_SCHEMA = Schema(
    columns=(
        Column(name="P", kind="categorical"),
        Column(name="D", kind="integer", bounds=(0, 1)),
    )
)

PATIENT_ROWS = (("A", 0), ("B", 0), ("C", 1))


def patient_dataset() -> Dataset:
    return Dataset(schema=PATIENT_SCHEMA, rows=PATIENT_ROWS)


def patient_csv() -> str:
    return "P,D\nA,0\nB,0\nC,1\n"


def patient_count_query() -> Query:
    """Count the patients carrying the disease marker."""
    return Query(kind="count", predicate=Leaf(attr="D", op="==", value=1))


# ---------------------------------------------------------------------------
# Census-style data


_CATEGORICAL_DOMAINS: dict[str, tuple[tuple[str, ...], tuple[float, ...]]] = {
    "workclass": (
        ("Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov",
         "State-gov", "Without-pay", "Never-worked"),
        (0.70, 0.08, 0.04, 0.03, 0.06, 0.05, 0.02, 0.02),
    ),
    "education": (
        ("Bachelors", "Some-college", "HS-grad", "Masters", "Assoc-voc", "11th",
         "Assoc-acdm", "10th", "7th-8th", "Prof-school", "9th", "12th", "Doctorate",
         "5th-6th", "1st-4th", "Preschool"),
        (0.16, 0.22, 0.32, 0.06, 0.04, 0.04, 0.03, 0.03, 0.02, 0.02, 0.015, 0.015,
         0.012, 0.01, 0.005, 0.003),
    ),
    "marital_status": (
        ("Married-civ-spouse", "Never-married", "Divorced", "Separated", "Widowed",
         "Married-spouse-absent", "Married-AF-spouse"),
        (0.46, 0.33, 0.13, 0.03, 0.03, 0.015, 0.005),
    ),
    "occupation": (
        ("Prof-specialty", "Craft-repair", "Exec-managerial", "Adm-clerical", "Sales",
         "Other-service", "Machine-op-inspct", "Transport-moving", "Handlers-cleaners",
         "Farming-fishing", "Tech-support", "Protective-serv", "Priv-house-serv",
         "Armed-Forces"),
        (0.13, 0.13, 0.13, 0.12, 0.11, 0.10, 0.06, 0.05, 0.04, 0.04, 0.035, 0.03,
         0.014, 0.001),
    ),
    "relationship": (
        ("Husband", "Not-in-family", "Own-child", "Unmarried", "Wife", "Other-relative"),
        (0.40, 0.26, 0.16, 0.10, 0.05, 0.03),
    ),
    "race": (
        ("White", "Black", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other"),
        (0.85, 0.09, 0.035, 0.015, 0.01),
    ),
    "sex": (("Male", "Female"), (0.66, 0.34)),
    "native_country": (
        ("United-States", "Mexico", "Philippines", "Germany", "Canada", "Puerto-Rico",
         "El-Salvador", "India", "Cuba", "England", "China", "Jamaica", "South",
         "Italy", "Vietnam"),
        (0.895, 0.03, 0.012, 0.008, 0.007, 0.007, 0.006, 0.006, 0.005, 0.005, 0.005,
         0.004, 0.004, 0.003, 0.003),
    ),
    "income": (("<=50K", ">50K"), (0.76, 0.24)),
}

_NUMERIC_BOUNDS = {
    "age": (17, 90),
    "fnlwgt": (10000, 1500000),
    "education_num": (1, 16),
    "capital_gain": (0, 99999),
    "capital_loss": (0, 4356),
    "hours_per_week": (1, 99),
}

ADULT_SCHEMA = Schema(
    columns=(
        Column("age", "integer", _NUMERIC_BOUNDS["age"]),
        Column("workclass", "categorical"),
        Column("fnlwgt", "integer", _NUMERIC_BOUNDS["fnlwgt"]),
        Column("education", "categorical"),
        Column("education_num", "integer", _NUMERIC_BOUNDS["education_num"]),
        Column("marital_status", "categorical"),
        Column("occupation", "categorical"),
        Column("relationship", "categorical"),
        Column("race", "categorical"),
        Column("sex", "categorical"),
        Column("capital_gain", "integer", _NUMERIC_BOUNDS["capital_gain"]),
        Column("capital_loss", "integer", _NUMERIC_BOUNDS["capital_loss"]),
        Column("hours_per_week", "integer", _NUMERIC_BOUNDS["hours_per_week"]),
        Column("native_country", "categorical"),
        Column("income", "categorical"),
    )
)

BASE_POOL_ROWS = 48842


def _synthesize_columns(n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    cols: dict[str, np.ndarray] = {}
    cols["age"] = np.clip(np.rint(rng.normal(38.6, 13.6, n)), 17, 90).astype(np.int64)
    cols["fnlwgt"] = np.clip(
        np.rint(np.exp(rng.normal(12.0, 0.45, n))), 10000, 1500000
    ).astype(np.int64)
    cols["education_num"] = np.clip(np.rint(rng.normal(10.1, 2.6, n)), 1, 16).astype(np.int64)
    gains = np.where(
        rng.random(n) < 0.083, np.rint(np.exp(rng.normal(8.4, 1.3, n))), 0
    )
    cols["capital_gain"] = np.clip(gains, 0, 99999).astype(np.int64)
    losses = np.where(
        rng.random(n) < 0.047, np.rint(rng.normal(1870, 370, n)), 0
    )
    cols["capital_loss"] = np.clip(losses, 0, 4356).astype(np.int64)
    cols["hours_per_week"] = np.clip(np.rint(rng.normal(40.4, 12.3, n)), 1, 99).astype(np.int64)
    for name, (domain, weights) in _CATEGORICAL_DOMAINS.items():
        p = np.asarray(weights, dtype=np.float64)
        cols[name] = rng.choice(np.asarray(domain, dtype=object), size=n, p=p / p.sum())
    return cols


def _columns_to_rows(cols: dict[str, np.ndarray], n: int) -> list[tuple]:
    ordered = [cols[c.name] for c in ADULT_SCHEMA]
    kinds = [c.kind for c in ADULT_SCHEMA]
    rows = []
    for i in range(n):
        rows.append(
            tuple(
                int(col[i]) if kind == "integer" else str(col[i])
                for col, kind in zip(ordered, kinds)
            )
        )
    return rows


def adult_style_dataset(n: int, seed: int = 7) -> Dataset:
    """n census-style rows: sampled below the pool size, replicated + jittered above."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    pool_n = min(n, BASE_POOL_ROWS)
    cols = _synthesize_columns(pool_n, rng)
    if n > pool_n:
        reps = -(-n // pool_n)
        cols = {name: np.tile(col, reps)[:n] for name, col in cols.items()}
        for name, (lo, hi) in _NUMERIC_BOUNDS.items():
            jitter = rng.integers(-2, 3, size=n)
            cols[name] = np.clip(cols[name] + jitter, lo, hi)
    return Dataset(schema=ADULT_SCHEMA, rows=tuple(_columns_to_rows(cols, n)))


def dataset_to_csv_file(dataset: Dataset, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.schema.names)
        writer.writerows(dataset.rows)


# ---------------------------------------------------------------------------
# The five benchmark query shapes


def marital_status_domain() -> tuple[str, ...]:
    return _CATEGORICAL_DOMAINS["marital_status"][0]


def q1_count() -> Query:
    return Query(
        kind="count",
        predicate=And(
            (
                Leaf("income", "==", ">50K"),
                Leaf("education_num", "==", 13),
                Leaf("age", "==", 25),
            )
        ),
    )


def q2_group_by_count() -> Query:
    return Query(
        kind="group_by_count",
        predicate=And(
            (
                Leaf("race", "==", "Asian-Pac-Islander"),
                Leaf("age", "between", (30, 40)),
            )
        ),
        group_by="marital_status",
        group_domain=marital_status_domain(),
    )


def q3_count() -> Query:
    return Query(
        kind="count",
        predicate=And(
            (
                Leaf("native_country", "!=", "United-States"),
                Leaf("sex", "==", "Female"),
            )
        ),
    )


def q4_avg() -> Query:
    return Query(
        kind="avg",
        predicate=Leaf("workclass", "in", ("Federal-gov", "Local-gov", "State-gov")),
        target="hours_per_week",
    )


def q5_sum() -> Query:
    return Query(kind="sum", target="capital_gain")


def benchmark_queries() -> dict[str, Query]:
    return {
        "q1": q1_count(),
        "q2": q2_group_by_count(),
        "q3": q3_count(),
        "q4": q4_avg(),
        "q5": q5_sum(),
    }


def scaling_query() -> Query:
    """High-cardinality projection so unique records grow with the dataset."""
    return Query(
        kind="count",
        predicate=And(
            (
                Leaf("age", "between", (25, 60)),
                Leaf("hours_per_week", ">=", 35),
                Leaf("capital_gain", "<=", 20000),
                Leaf("fnlwgt", "<", 1200000),
            )
        ),
    )
