"""Query family (COUNT / GROUP-BY-COUNT / SUM / AVG), evaluation, sensitivities.

Aggregation is exact: integer columns accumulate as Python ints, real columns
as Fractions (floats embed exactly). Results are converted to float only at
the QueryOutput boundary. This makes evaluation order-independent, so the
memoized neighbor evaluation used for per-instance sensitivities reproduces a
naive per-row recomputation bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from multiprocessing import get_context
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence

from .errors import EmptyAverageError, QueryError, SchemaError
from .tabular import Dataset, ProjectedDataset, Schema, project_query_attributes

L1 = "l1"
L2 = "l2"
NORMS = (L1, L2)

QUERY_KINDS = ("count", "group_by_count", "sum", "avg")
_ORDER_OPS = ("<", "<=", ">", ">=")
_LEAF_OPS = ("==", "!=", "<", "<=", ">", ">=", "in", "between")


# ---------------------------------------------------------------------------
# Predicates


@dataclass(frozen=True)
class Leaf:
    attr: str
    op: str
    value: object

    def attrs(self) -> set[str]:
        return {self.attr}


@dataclass(frozen=True)
class And:
    children: tuple

    def attrs(self) -> set[str]:
        return set().union(*(c.attrs() for c in self.children))


@dataclass(frozen=True)
class Or:
    children: tuple

    def attrs(self) -> set[str]:
        return set().union(*(c.attrs() for c in self.children))


Predicate = Leaf | And | Or


def predicate_from_json(doc) -> Predicate:
    """Parse {"and": [...]}, {"or": [...]}, or {"attr","op","value"} trees."""
    if not isinstance(doc, dict):
        raise QueryError(f"predicate node must be an object, got {type(doc).__name__}")
    if "and" in doc:
        kids = doc["and"]
        if not kids:
            raise QueryError('"and" requires at least one child')
        return And(tuple(predicate_from_json(c) for c in kids))
    if "or" in doc:
        kids = doc["or"]
        if not kids:
            raise QueryError('"or" requires at least one child')
        return Or(tuple(predicate_from_json(c) for c in kids))
    try:
        attr, op, value = doc["attr"], doc["op"], doc["value"]
    except KeyError as exc:
        raise QueryError(f"predicate leaf missing field {exc}")
    if op not in _LEAF_OPS:
        raise QueryError(f"unknown predicate op {op!r}")
    return Leaf(attr=attr, op=op, value=value)


def predicate_to_json(p: Predicate) -> dict:
    if isinstance(p, And):
        return {"and": [predicate_to_json(c) for c in p.children]}
    if isinstance(p, Or):
        return {"or": [predicate_to_json(c) for c in p.children]}
    if isinstance(p.value, (set, frozenset)):
        value = sorted(p.value)  # stable wire order for "in" sets
    elif isinstance(p.value, tuple):
        value = list(p.value)
    else:
        value = p.value
    return {"attr": p.attr, "op": p.op, "value": value}


def _coerce_literal(value, column, op):
    kind = column.kind
    if kind == "categorical":
        if not isinstance(value, str):
            raise QueryError(
                f"column {column.name!r} is categorical; literal {value!r} is not a string"
            )
        return value.strip()
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise QueryError(f"column {column.name!r} is {kind}; literal {value!r} is not numeric")
    return value


def _validate_leaf(leaf: Leaf, schema: Schema) -> Leaf:
    if not schema.has(leaf.attr):
        raise QueryError(f"predicate references unknown column {leaf.attr!r}")
    column = schema.column(leaf.attr)
    if leaf.op in _ORDER_OPS or leaf.op == "between":
        if not column.is_numeric:
            raise QueryError(
                f"op {leaf.op!r} needs a numeric column, but {leaf.attr!r} is categorical"
            )
    if leaf.op == "in":
        if not isinstance(leaf.value, (list, tuple, set, frozenset)):
            raise QueryError(f'op "in" on {leaf.attr!r} requires a list of literals')
        coerced = frozenset(_coerce_literal(v, column, leaf.op) for v in leaf.value)
        return Leaf(leaf.attr, "in", coerced)
    if leaf.op == "between":
        if not isinstance(leaf.value, (list, tuple)) or len(leaf.value) != 2:
            raise QueryError(f'op "between" on {leaf.attr!r} requires a [lo, hi] pair')
        lo = _coerce_literal(leaf.value[0], column, leaf.op)
        hi = _coerce_literal(leaf.value[1], column, leaf.op)
        return Leaf(leaf.attr, "between", (lo, hi))
    return Leaf(leaf.attr, leaf.op, _coerce_literal(leaf.value, column, leaf.op))


def validate_predicate(p: Predicate, schema: Schema) -> Predicate:
    if isinstance(p, And):
        return And(tuple(validate_predicate(c, schema) for c in p.children))
    if isinstance(p, Or):
        return Or(tuple(validate_predicate(c, schema) for c in p.children))
    return _validate_leaf(p, schema)


def compile_predicate(p: Predicate | None, schema: Schema) -> Callable[[tuple], bool]:
    """Compile a validated predicate into a closure over record tuples."""
    if p is None:
        return lambda record: True
    if isinstance(p, And):
        kids = [compile_predicate(c, schema) for c in p.children]
        return lambda record: all(k(record) for k in kids)
    if isinstance(p, Or):
        kids = [compile_predicate(c, schema) for c in p.children]
        return lambda record: any(k(record) for k in kids)

    pos = schema.index(p.attr)
    op, val = p.op, p.value
    if op == "==":
        return lambda record: record[pos] == val
    if op == "!=":
        return lambda record: record[pos] != val
    if op == "<":
        return lambda record: record[pos] < val
    if op == "<=":
        return lambda record: record[pos] <= val
    if op == ">":
        return lambda record: record[pos] > val
    if op == ">=":
        return lambda record: record[pos] >= val
    if op == "in":
        return lambda record: record[pos] in val
    lo, hi = val
    return lambda record: lo <= record[pos] <= hi


# ---------------------------------------------------------------------------
# Queries


@dataclass(frozen=True)
class Query:
    kind: str
    predicate: Predicate | None = None
    group_by: str | None = None
    group_domain: tuple | None = None
    target: str | None = None

    def __post_init__(self):
        if self.kind not in QUERY_KINDS:
            raise QueryError(f"unknown query kind {self.kind!r}")
        if self.kind == "group_by_count":
            if not self.group_by:
                raise QueryError("group_by_count requires a group_by attribute")
            if not self.group_domain:
                raise QueryError(
                    "group_by_count requires a fixed group_domain so the output "
                    "dimension does not depend on the data"
                )
        elif self.group_by or self.group_domain:
            raise QueryError(f"{self.kind} does not take group_by/group_domain")
        if self.kind in ("sum", "avg"):
            if not self.target:
                raise QueryError(f"{self.kind} requires a target column")
        elif self.target:
            raise QueryError(f"{self.kind} does not take a target column")

    @property
    def k(self) -> int:
        """Output dimension; fixed up front, never data-dependent."""
        return len(self.group_domain) if self.kind == "group_by_count" else 1

    def referenced_attrs(self, schema: Schema) -> tuple[str, ...]:
        names: set[str] = set()
        if self.predicate is not None:
            names |= self.predicate.attrs()
        if self.group_by:
            names.add(self.group_by)
        if self.target:
            names.add(self.target)
        return tuple(n for n in schema.names if n in names)

    def validated(self, schema: Schema) -> "Query":
        """Type-check against a schema; returns a copy with coerced literals."""
        predicate = (
            validate_predicate(self.predicate, schema) if self.predicate is not None else None
        )
        group_domain = self.group_domain
        if self.kind == "group_by_count":
            column = (
                schema.column(self.group_by)
                if schema.has(self.group_by)
                else None
            )
            if column is None:
                raise QueryError(f"group_by references unknown column {self.group_by!r}")
            group_domain = tuple(_coerce_literal(g, column, "==") for g in self.group_domain)
            if len(set(group_domain)) != len(group_domain):
                raise QueryError("group_domain contains duplicate keys")
        if self.target:
            if not schema.has(self.target):
                raise QueryError(f"target references unknown column {self.target!r}")
            column = schema.column(self.target)
            if not column.is_numeric:
                raise QueryError(f"{self.kind} target {self.target!r} must be numeric")
            if column.bounds is None:
                raise QueryError(
                    f"{self.kind} target {self.target!r} must declare bounds so global "
                    "sensitivity is defined"
                )
        return Query(
            kind=self.kind,
            predicate=predicate,
            group_by=self.group_by,
            group_domain=group_domain,
            target=self.target,
        )

    @classmethod
    def from_json(cls, doc: dict) -> "Query":
        if not isinstance(doc, dict) or "kind" not in doc:
            raise QueryError('query JSON must be an object with a "kind" field')
        predicate = None
        if doc.get("predicate") is not None:
            predicate = predicate_from_json(doc["predicate"])
        group_domain = doc.get("group_domain")
        return cls(
            kind=doc["kind"],
            predicate=predicate,
            group_by=doc.get("group_by"),
            group_domain=tuple(group_domain) if group_domain is not None else None,
            target=doc.get("target"),
        )

    def to_json(self) -> dict:
        doc: dict = {"kind": self.kind}
        if self.predicate is not None:
            doc["predicate"] = predicate_to_json(self.predicate)
        if self.group_by:
            doc["group_by"] = self.group_by
            doc["group_domain"] = list(self.group_domain)
        if self.target:
            doc["target"] = self.target
        return doc


@dataclass(frozen=True)
class QueryOutput:
    values: tuple[float, ...]

    def __post_init__(self):
        for v in self.values:
            if not math.isfinite(v):
                raise QueryError(f"non-finite query output value {v!r}")

    @property
    def k(self) -> int:
        return len(self.values)


def norm_diff(a: Sequence[float], b: Sequence[float], norm: str) -> float:
    if len(a) != len(b):
        raise QueryError(f"dimension mismatch: {len(a)} vs {len(b)}")
    if norm == L1:
        return sum(abs(x - y) for x, y in zip(a, b))
    if norm == L2:
        return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))
    raise QueryError(f"unknown norm {norm!r}")


def _exact(value):
    """Exact representation for aggregation: ints stay ints, floats embed in Fraction."""
    return value if isinstance(value, int) else Fraction(value)


def _iter_weighted(data: Dataset | ProjectedDataset) -> Iterable[tuple[tuple, int]]:
    if isinstance(data, ProjectedDataset):
        for u in data.uniques:
            yield u, len(data.multiplicity[u])
    else:
        for row in data.rows:
            yield row, 1


class _ExactAggregates:
    """Exact full-dataset aggregates for one (data, query) pair.

    Holds whatever the query kind needs to answer both q(x) and, by removing a
    single record's contribution, every q(x_{-i}).
    """

    def __init__(self, data: Dataset | ProjectedDataset, query: Query):
        schema = data.schema
        self.query = query
        self.schema = schema
        self.pred = compile_predicate(query.predicate, schema)
        self.kind = query.kind
        if self.kind == "group_by_count":
            self.group_pos = schema.index(query.group_by)
            self.group_index = {g: i for i, g in enumerate(query.group_domain)}
            counts = [0] * len(query.group_domain)
            for record, weight in _iter_weighted(data):
                if self.pred(record):
                    g = record[self.group_pos]
                    idx = self.group_index.get(g)
                    if idx is None:
                        raise QueryError(
                            f"group value {g!r} found in data but absent from group_domain"
                        )
                    counts[idx] += weight
            self.group_counts = counts
        elif self.kind == "count":
            total = 0
            for record, weight in _iter_weighted(data):
                if self.pred(record):
                    total += weight
            self.count = total
        else:
            self.target_pos = schema.index(query.target)
            total = 0
            matched = 0
            for record, weight in _iter_weighted(data):
                if self.pred(record):
                    total = total + _exact(record[self.target_pos]) * weight
                    matched += weight
            self.sum = total
            self.matched = matched

    def full_values(self) -> tuple[float, ...]:
        if self.kind == "count":
            return (float(self.count),)
        if self.kind == "group_by_count":
            return tuple(float(c) for c in self.group_counts)
        if self.kind == "sum":
            return (float(self.sum),)
        if self.matched == 0:
            raise EmptyAverageError("empty AVG: no rows match the predicate")
        return (float(Fraction(self.sum) / self.matched),)

    def neighbor_values(self, record: tuple) -> tuple[float, ...]:
        """q(x_{-i}) for a neighbor that drops one instance of `record`."""
        if not self.pred(record):
            return self.full_values()
        if self.kind == "count":
            return (float(self.count - 1),)
        if self.kind == "group_by_count":
            g = record[self.group_pos]
            idx = self.group_index.get(g)
            if idx is None:
                raise QueryError(f"group value {g!r} found in data but absent from group_domain")
            out = [float(c) for c in self.group_counts]
            out[idx] = float(self.group_counts[idx] - 1)
            return tuple(out)
        value = _exact(record[self.target_pos])
        if self.kind == "sum":
            return (float(self.sum - value),)
        if self.matched == 1:
            raise EmptyAverageError(
                "empty AVG: removing the only matching record leaves no rows to average"
            )
        return (float(Fraction(self.sum - value) / (self.matched - 1)),)


def evaluate_query(data: Dataset | ProjectedDataset, query: Query) -> QueryOutput:
    """Exact, deterministic evaluation; GROUP_BY_COUNT emits group_domain order."""
    return QueryOutput(values=_ExactAggregates(data, query).full_values())


def neighbor_outputs(projection: ProjectedDataset, query: Query) -> list[QueryOutput]:
    """q(x_{-i}) per unique projected record, in unique order."""
    agg = _ExactAggregates(projection, query)
    return [QueryOutput(values=agg.neighbor_values(u)) for u in projection.uniques]


# ---------------------------------------------------------------------------
# Sensitivities


def global_sensitivity(
    query: Query,
    schema: Schema,
    n: int,
    norm: str = L1,
    override: float | None = None,
) -> float:
    """Worst-case one-record-removal change of the query output.

    COUNT and GROUP-BY-COUNT move a single count by 1 (identical in both
    norms). SUM moves by at most max(|lo|, |hi|) of the target bounds. AVG
    uses (hi - lo) / n, an approximation that `override` can replace.
    """
    if norm not in NORMS:
        raise QueryError(f"unknown norm {norm!r}")
    if override is not None:
        if override <= 0:
            raise QueryError(f"sensitivity override must be positive, got {override}")
        return float(override)
    if query.kind in ("count", "group_by_count"):
        return 1.0
    column = schema.column(query.target)
    if column.bounds is None:
        raise QueryError(f"{query.kind} target {query.target!r} has no declared bounds")
    lo, hi = column.bounds
    if query.kind == "sum":
        return float(max(abs(lo), abs(hi)))
    if n < 1:
        raise QueryError("AVG sensitivity needs n >= 1")
    return float(hi - lo) / n


class PerRowView:
    """Row-indexed view over per-unique values via the projection multiplicity."""

    def __init__(self, values: Sequence[float], row_to_unique: Sequence[int]):
        self._values = values
        self._row_to_unique = row_to_unique

    def __len__(self) -> int:
        return len(self._row_to_unique)

    def __getitem__(self, row: int) -> float:
        return self._values[self._row_to_unique[row]]

    def __iter__(self):
        values = self._values
        for u in self._row_to_unique:
            yield values[u]


@dataclass(frozen=True)
class PisTable:
    """Per-instance sensitivities ||q(x) - q(x_{-i})|| for every individual."""

    norm: str
    projection: ProjectedDataset
    per_unique_values: tuple[float, ...]

    def __post_init__(self):
        if len(self.per_unique_values) != self.projection.unique_count:
            raise QueryError("per-unique values do not cover the projection")

    @property
    def per_unique(self) -> dict[tuple, float]:
        return dict(zip(self.projection.uniques, self.per_unique_values))

    @property
    def per_row(self) -> PerRowView:
        return PerRowView(self.per_unique_values, self.projection.row_to_unique)

    @property
    def n(self) -> int:
        return self.projection.n

    def min(self) -> float:
        return min(self.per_unique_values)

    def max(self) -> float:
        return max(self.per_unique_values)


def _pis_values(
    projection: ProjectedDataset,
    norm: str,
    span: tuple[int, int],
    agg: _ExactAggregates,
) -> list[float]:
    full = agg.full_values()
    start, stop = span
    out = []
    for u in projection.uniques[start:stop]:
        out.append(norm_diff(full, agg.neighbor_values(u), norm))
    return out


# Worker-side state for fork-based pools: children inherit the parent's memory
# at fork time (aggregates included), so nothing large crosses a pipe.
_FORK_STATE: tuple | None = None


def _pis_chunk(span: tuple[int, int]) -> list[float]:
    projection, norm, agg = _FORK_STATE
    return _pis_values(projection, norm, span, agg)


def per_instance_sensitivity(
    projection: ProjectedDataset,
    query: Query,
    norm: str = L1,
    workers: int = 1,
) -> PisTable:
    """One neighbor evaluation per unique projected record, fanned out to rows.

    Unique records are split into contiguous chunks of roughly U/workers; the
    result is independent of the worker count. Requires an OS with fork
    (workers > 1); falls back to inline computation otherwise.
    """
    if norm not in NORMS:
        raise QueryError(f"unknown norm {norm!r}")
    if workers < 1:
        raise QueryError(f"workers must be >= 1, got {workers}")

    u_count = projection.unique_count
    agg = _ExactAggregates(projection, query)
    if workers == 1 or u_count < 2:
        values = _pis_values(projection, norm, (0, u_count), agg)
        return PisTable(norm=norm, projection=projection, per_unique_values=tuple(values))

    chunk = max(1, math.ceil(u_count / workers))
    spans = [(start, min(start + chunk, u_count)) for start in range(0, u_count, chunk)]

    global _FORK_STATE
    _FORK_STATE = (projection, norm, agg)
    try:
        ctx = get_context("fork")
    except ValueError:
        values = _pis_values(projection, norm, (0, u_count), agg)
        return PisTable(norm=norm, projection=projection, per_unique_values=tuple(values))
    try:
        with ProcessPoolExecutor(max_workers=min(workers, len(spans)), mp_context=ctx) as pool:
            parts = list(pool.map(_pis_chunk, spans))
    finally:
        _FORK_STATE = None

    values = [v for part in parts for v in part]
    return PisTable(norm=norm, projection=projection, per_unique_values=tuple(values))


def pis_for_query(
    dataset: Dataset, query: Query, norm: str = L1, workers: int = 1
) -> tuple[ProjectedDataset, PisTable]:
    """Project, then compute the per-instance sensitivity table."""
    checked = query.validated(dataset.schema)
    projection = project_query_attributes(dataset, checked)
    return projection, per_instance_sensitivity(projection, checked, norm, workers)
