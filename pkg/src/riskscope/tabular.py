"""Typed tabular datasets: schema, CSV loading, and query-attribute projection.

Records are value tuples in schema column order. Integer columns hold ints,
real columns hold floats, categorical columns hold stripped strings. Datasets
are immutable after load and safe to share across worker processes.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import DatasetError, SchemaError

KINDS = ("integer", "real", "categorical")
NUMERIC_KINDS = ("integer", "real")


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.name:
            raise SchemaError("column name must be non-empty")
        if self.kind not in KINDS:
            raise SchemaError(f"unknown column kind {self.kind!r} for {self.name!r}")
        if self.bounds is not None:
            if self.kind not in NUMERIC_KINDS:
                raise SchemaError(f"bounds declared on non-numeric column {self.name!r}")
            lo, hi = self.bounds
            if lo > hi:
                raise SchemaError(f"column {self.name!r}: bounds lo={lo} > hi={hi}")

    @property
    def is_numeric(self) -> bool:
        return self.kind in NUMERIC_KINDS


@dataclass(frozen=True)
class Schema:
    """Ordered column declarations with optional numeric bounds."""

    columns: tuple[Column, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate column names: {dupes}")

    def __iter__(self):
        return iter(self.columns)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"unknown column {name!r}")

    def index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise SchemaError(f"unknown column {name!r}")

    def has(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    @classmethod
    def from_json(cls, text: str | bytes | dict) -> "Schema":
        """Parse the sidecar format: {"columns": [{"name","kind","bounds"?}, ...]}."""
        doc = text if isinstance(text, dict) else json.loads(text)
        try:
            cols = doc["columns"]
        except (KeyError, TypeError):
            raise SchemaError('schema sidecar must be an object with a "columns" list')
        columns = []
        for entry in cols:
            bounds = entry.get("bounds")
            columns.append(
                Column(
                    name=entry["name"],
                    kind=entry["kind"],
                    bounds=tuple(bounds) if bounds is not None else None,
                )
            )
        return cls(columns=tuple(columns))

    def to_json(self) -> dict:
        out = []
        for c in self.columns:
            entry: dict = {"name": c.name, "kind": c.kind}
            if c.bounds is not None:
                entry["bounds"] = list(c.bounds)
            out.append(entry)
        return {"columns": out}


def _coerce(raw: str, column: Column, row_num: int):
    value = raw.strip()
    if column.kind == "categorical":
        if value == "":
            raise DatasetError(f"row {row_num}, column {column.name!r}: missing value")
        return value
    if value == "":
        raise DatasetError(f"row {row_num}, column {column.name!r}: missing value")
    try:
        if column.kind == "integer":
            typed: float = int(value)
        else:
            typed = float(value)
    except ValueError:
        raise DatasetError(
            f"row {row_num}, column {column.name!r}: cannot parse {raw!r} as {column.kind}"
        )
    if column.bounds is not None:
        lo, hi = column.bounds
        if not (lo <= typed <= hi):
            raise DatasetError(
                f"row {row_num}, column {column.name!r}: value {typed} outside bounds [{lo}, {hi}]"
            )
    return typed


@dataclass(frozen=True)
class Dataset:
    """One record per individual; neighboring datasets drop exactly one record."""

    schema: Schema
    rows: tuple[tuple, ...]

    @property
    def n(self) -> int:
        return len(self.rows)

    def without_row(self, index: int) -> "Dataset":
        """The neighboring dataset with record `index` removed."""
        rows = self.rows[:index] + self.rows[index + 1 :]
        return Dataset(schema=self.schema, rows=rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(self.schema.names)
        for row in self.rows:
            writer.writerow(row)
        return buf.getvalue()


def load_dataset(source: str | bytes | io.IOBase, schema: Schema) -> Dataset:
    """Load an RFC-4180 CSV (header row required) against `schema`.

    The header must contain exactly the schema's column names; column order in
    the file may differ from schema order. Rows are re-ordered into schema
    order. Rejects empty bodies, missing values, type failures, and numeric
    values outside declared bounds, reporting row and column.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data

    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DatasetError("empty file: no header row")

    expected = list(schema.names)
    if sorted(header) != sorted(expected):
        missing = sorted(set(expected) - set(header))
        extra = sorted(set(header) - set(expected))
        duped = sorted({h for h in header if header.count(h) > 1})
        parts = []
        if missing:
            parts.append(f"missing {missing}")
        if extra:
            parts.append(f"unexpected {extra}")
        if duped:
            parts.append(f"duplicated {duped}")
        raise DatasetError("header does not match schema: " + "; ".join(parts))

    positions = [header.index(name) for name in expected]
    rows = []
    for row_num, raw in enumerate(reader, start=1):
        if not raw or (len(raw) == 1 and raw[0].strip() == ""):
            continue
        if len(raw) != len(header):
            raise DatasetError(f"row {row_num}: expected {len(header)} fields, got {len(raw)}")
        rows.append(tuple(_coerce(raw[pos], col, row_num) for pos, col in zip(positions, schema)))

    if not rows:
        raise DatasetError("empty dataset: header present but no data rows")
    return Dataset(schema=schema, rows=tuple(rows))


@dataclass(frozen=True)
class ProjectedDataset:
    """A dataset narrowed to the attributes one query touches.

    Duplicate projected records collapse into `uniques`; `multiplicity` maps
    each unique back to the original row indices, so anything computed per
    unique record fans out to all n individuals.
    """

    schema: Schema
    attrs: tuple[str, ...]
    uniques: tuple[tuple, ...]
    multiplicity: dict[tuple, tuple[int, ...]]
    row_to_unique: tuple[int, ...] = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.row_to_unique)

    @property
    def unique_count(self) -> int:
        return len(self.uniques)

    def counts(self) -> tuple[int, ...]:
        return tuple(len(self.multiplicity[u]) for u in self.uniques)


def project_dataset(dataset: Dataset, attrs: Sequence[str]) -> ProjectedDataset:
    """Project onto `attrs` (kept in schema order) and group duplicates."""
    for a in attrs:
        if not dataset.schema.has(a):
            raise SchemaError(f"unknown column {a!r}")
    ordered = tuple(name for name in dataset.schema.names if name in set(attrs))
    idxs = [dataset.schema.index(a) for a in ordered]

    uniques: list[tuple] = []
    seen: dict[tuple, int] = {}
    members: list[list[int]] = []
    row_to_unique: list[int] = []
    for i, row in enumerate(dataset.rows):
        key = tuple(row[j] for j in idxs)
        u = seen.get(key)
        if u is None:
            u = len(uniques)
            seen[key] = u
            uniques.append(key)
            members.append([])
        members[u].append(i)
        row_to_unique.append(u)

    narrowed = Schema(columns=tuple(dataset.schema.column(a) for a in ordered))
    return ProjectedDataset(
        schema=narrowed,
        attrs=ordered,
        uniques=tuple(uniques),
        multiplicity={u: tuple(m) for u, m in zip(uniques, members)},
        row_to_unique=tuple(row_to_unique),
    )


def project_query_attributes(dataset: Dataset, query) -> ProjectedDataset:
    """Keep exactly the attributes the query references (predicate, group-by, target).

    A query referencing no attributes (e.g. unfiltered COUNT) projects onto the
    empty tuple: all records collapse into one unique.
    """
    return project_dataset(dataset, query.referenced_attrs(dataset.schema))
