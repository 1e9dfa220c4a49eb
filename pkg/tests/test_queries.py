import math
import random

import pytest

from riskscope import (
    And,
    Column,
    Dataset,
    EmptyAverageError,
    L1,
    L2,
    Leaf,
    Or,
    Query,
    QueryError,
    Schema,
    evaluate_query,
    global_sensitivity,
    neighbor_outputs,
    norm_diff,
    per_instance_sensitivity,
    project_query_attributes,
)
from riskscope.fixtures import adult_style_dataset, benchmark_queries
from riskscope.queries import predicate_from_json, predicate_to_json


def naive_pis(dataset, query, norm):
    """Unmemoized oracle: rebuild each neighbor and evaluate it from scratch."""
    full = evaluate_query(dataset, query).values
    return [
        norm_diff(full, evaluate_query(dataset.without_row(i), query).values, norm)
        for i in range(dataset.n)
    ]


def local_sensitivity_oracle(dataset, query, norm):
    return max(naive_pis(dataset, query, norm))


def random_dataset(rnd, max_rows=40):
    schema = Schema(
        columns=(
            Column("g", "categorical"),
            Column("v", "integer", (0, 50)),
            Column("w", "real", (0.0, 10.0)),
        )
    )
    n = rnd.randint(1, max_rows)
    rows = tuple(
        (rnd.choice("abc"), rnd.randint(0, 50), round(rnd.uniform(0, 10), 3))
        for _ in range(n)
    )
    return Dataset(schema=schema, rows=rows)


RANDOM_QUERIES = [
    Query(kind="count", predicate=Leaf("v", ">=", 25)),
    Query(kind="count", predicate=Or((Leaf("g", "==", "a"), Leaf("v", "<", 10)))),
    Query(kind="sum", target="w", predicate=Leaf("g", "==", "a")),
    Query(kind="sum", target="v"),
    Query(kind="avg", target="v"),
    Query(
        kind="group_by_count",
        group_by="g",
        group_domain=("a", "b", "c"),
        predicate=Leaf("v", "<", 40),
    ),
]


# ---------------------------------------------------------------------------
# Query structure and predicates


def test_predicate_json_round_trip():
    doc = {
        "and": [
            {"attr": "race", "op": "==", "value": "Asian-Pac-Islander"},
            {"attr": "age", "op": "between", "value": [30, 40]},
        ]
    }
    assert predicate_to_json(predicate_from_json(doc)) == doc


def test_query_json_round_trip():
    doc = {
        "kind": "group_by_count",
        "predicate": {"attr": "age", "op": ">=", "value": 30},
        "group_by": "marital_status",
        "group_domain": ["Married-civ-spouse", "Never-married"],
    }
    assert Query.from_json(doc).to_json() == doc


def test_query_output_dimension():
    q = benchmark_queries()["q2"]
    assert q.k == 7
    assert benchmark_queries()["q1"].k == 1


def test_group_by_count_requires_domain():
    with pytest.raises(QueryError, match="group_domain"):
        Query(kind="group_by_count", group_by="g")


def test_order_op_on_categorical_rejected(adult_1k):
    q = Query(kind="count", predicate=Leaf("race", "<", "White"))
    with pytest.raises(QueryError, match="numeric"):
        q.validated(adult_1k.schema)


def test_sum_requires_bounds():
    schema = Schema(columns=(Column("x", "integer"),))
    with pytest.raises(QueryError, match="bounds"):
        Query(kind="sum", target="x").validated(schema)


def test_unknown_attribute_rejected(adult_1k):
    with pytest.raises(QueryError, match="unknown column"):
        Query(kind="count", predicate=Leaf("salary", "==", 1)).validated(adult_1k.schema)


# ---------------------------------------------------------------------------
# Evaluation


def test_patient_disease_count(patient, patient_query):
    assert evaluate_query(patient, patient_query).values == (1.0,)


def test_count_matching_nothing(patient):
    q = Query(kind="count", predicate=Leaf("D", "==", -1)).validated(patient.schema)
    assert evaluate_query(patient, q).values == (0.0,)


def test_group_by_count_emits_domain_order_with_zero_for_absent(adult_1k):
    q = Query(
        kind="group_by_count",
        group_by="sex",
        group_domain=("Female", "Male", "Unknown"),
    ).validated(adult_1k.schema)
    out = evaluate_query(adult_1k, q)
    idx = adult_1k.schema.index("sex")
    females = sum(1 for r in adult_1k.rows if r[idx] == "Female")
    males = sum(1 for r in adult_1k.rows if r[idx] == "Male")
    assert out.values == (float(females), float(males), 0.0)


def test_group_value_outside_domain_is_an_error(adult_1k):
    q = Query(
        kind="group_by_count", group_by="sex", group_domain=("Female",)
    ).validated(adult_1k.schema)
    with pytest.raises(QueryError, match="absent from group_domain"):
        evaluate_query(adult_1k, q)


def test_sum_matches_independent_fold(adult_1k):
    q = Query(kind="sum", target="capital_gain").validated(adult_1k.schema)
    idx = adult_1k.schema.index("capital_gain")
    # spreadsheet-style oracle: re-parse the CSV text and fold the column
    lines = adult_1k.to_csv().strip().split("\n")
    header = lines[0].split(",")
    col = header.index("capital_gain")
    folded = 0
    for line in lines[1:]:
        folded += int(line.split(",")[col])
    assert evaluate_query(adult_1k, q).values == (float(folded),)


def test_avg_over_zero_rows_is_an_error(patient):
    q = Query(kind="avg", target="D", predicate=Leaf("D", "==", -5)).validated(
        patient.schema
    )
    with pytest.raises(EmptyAverageError):
        evaluate_query(patient, q)


def test_benchmark_queries_run_on_fixture(adult_1k):
    for q in benchmark_queries().values():
        out = evaluate_query(adult_1k, q.validated(adult_1k.schema))
        assert all(math.isfinite(v) for v in out.values)


# ---------------------------------------------------------------------------
# Global sensitivity


def test_count_sensitivity_is_one(adult_1k):
    q = benchmark_queries()["q1"].validated(adult_1k.schema)
    assert global_sensitivity(q, adult_1k.schema, adult_1k.n) == 1.0


def test_group_by_count_sensitivity_is_one_in_both_norms(adult_1k):
    q = benchmark_queries()["q2"].validated(adult_1k.schema)
    assert global_sensitivity(q, adult_1k.schema, adult_1k.n, L1) == 1.0
    assert global_sensitivity(q, adult_1k.schema, adult_1k.n, L2) == 1.0


def test_sum_sensitivity_is_bound_magnitude(adult_1k):
    q = benchmark_queries()["q5"].validated(adult_1k.schema)
    assert global_sensitivity(q, adult_1k.schema, adult_1k.n) == 99999.0


def test_avg_sensitivity_closed_form():
    schema = Schema(columns=(Column("h", "integer", (1, 99)),))
    q = Query(kind="avg", target="h").validated(schema)
    assert global_sensitivity(q, schema, 50) == pytest.approx(1.96, abs=1e-15)


def test_avg_sensitivity_bounds_neighbor_difference():
    """Brute force: |avg(x) - avg(x_{-i})| never exceeds (hi-lo)/n."""
    rnd = random.Random(5)
    schema = Schema(columns=(Column("h", "integer", (1, 99)),))
    q = Query(kind="avg", target="h").validated(schema)
    for _ in range(100):
        n = rnd.randint(2, 40)
        d = Dataset(schema=schema, rows=tuple((rnd.randint(1, 99),) for _ in range(n)))
        delta = global_sensitivity(q, schema, n)
        full = evaluate_query(d, q).values[0]
        for i in range(n):
            nb = evaluate_query(d.without_row(i), q).values[0]
            assert abs(full - nb) <= delta + 1e-12


def test_sensitivity_override():
    schema = Schema(columns=(Column("h", "integer", (1, 99)),))
    q = Query(kind="avg", target="h").validated(schema)
    assert global_sensitivity(q, schema, 50, override=3.5) == 3.5
    with pytest.raises(QueryError):
        global_sensitivity(q, schema, 50, override=-1.0)


# ---------------------------------------------------------------------------
# Per-instance sensitivity


def test_patient_pis(patient, patient_query):
    proj = project_query_attributes(patient, patient_query)
    pis = per_instance_sensitivity(proj, patient_query, L1)
    assert list(pis.per_row) == [0.0, 0.0, 1.0]
    assert pis.per_unique == {(0,): 0.0, (1,): 1.0}


def test_all_identical_rows_single_memo_entry():
    schema = Schema(columns=(Column("v", "integer", (0, 5)),))
    d = Dataset(schema=schema, rows=((3,),) * 20)
    q = Query(kind="count", predicate=Leaf("v", "==", 3)).validated(schema)
    proj = project_query_attributes(d, q)
    assert proj.unique_count == 1
    pis = per_instance_sensitivity(proj, q, L1)
    assert set(pis.per_row) == {1.0}


def test_memoized_equals_naive_oracle_on_random_instances():
    rnd = random.Random(42)
    for _ in range(60):
        d = random_dataset(rnd)
        q = rnd.choice(RANDOM_QUERIES).validated(d.schema)
        for norm in (L1, L2):
            try:
                expected = naive_pis(d, q, norm)
            except EmptyAverageError:
                continue
            proj = project_query_attributes(d, q)
            got = list(per_instance_sensitivity(proj, q, norm).per_row)
            assert got == expected  # bit-exact


def test_group_by_count_table_matches_naive_oracle_200_rows():
    rnd = random.Random(9)
    schema = Schema(
        columns=(Column("g", "categorical"), Column("v", "integer", (0, 20)))
    )
    rows = tuple((rnd.choice("abcd"), rnd.randint(0, 20)) for _ in range(200))
    d = Dataset(schema=schema, rows=rows)
    q = Query(
        kind="group_by_count",
        group_by="g",
        group_domain=("a", "b", "c", "d"),
        predicate=Leaf("v", ">=", 5),
    ).validated(schema)
    proj = project_query_attributes(d, q)
    assert list(per_instance_sensitivity(proj, q, L1).per_row) == naive_pis(d, q, L1)


def test_parallel_determinism_across_worker_counts(adult_1k):
    q = benchmark_queries()["q2"].validated(adult_1k.schema)
    proj = project_query_attributes(adult_1k, q)
    baseline = per_instance_sensitivity(proj, q, L1, workers=1).per_unique_values
    for workers in (2, 8):
        assert (
            per_instance_sensitivity(proj, q, L1, workers=workers).per_unique_values
            == baseline
        )


def test_count_pis_values_are_zero_or_one():
    rnd = random.Random(17)
    for _ in range(30):
        d = random_dataset(rnd)
        q = Query(kind="count", predicate=Leaf("v", ">=", rnd.randint(0, 50))).validated(
            d.schema
        )
        proj = project_query_attributes(d, q)
        assert set(per_instance_sensitivity(proj, q, L1).per_row) <= {0.0, 1.0}


def test_pis_spread_bounded_by_local_sensitivity():
    rnd = random.Random(23)
    for _ in range(30):
        d = random_dataset(rnd, max_rows=25)
        q = rnd.choice(RANDOM_QUERIES).validated(d.schema)
        for norm in (L1, L2):
            try:
                ls = local_sensitivity_oracle(d, q, norm)
            except EmptyAverageError:
                continue
            proj = project_query_attributes(d, q)
            pis = per_instance_sensitivity(proj, q, norm)
            assert pis.max() - pis.min() <= ls + 1e-12


def test_neighbor_outputs_match_direct_reconstruction(patient, patient_query):
    proj = project_query_attributes(patient, patient_query)
    outs = neighbor_outputs(proj, patient_query)
    # removing a disease-free patient leaves the count at 1; removing C drops it to 0
    assert [o.values for o in outs] == [(1.0,), (0.0,)]


def test_empty_average_on_neighbor_propagates():
    schema = Schema(columns=(Column("v", "integer", (0, 9)),))
    d = Dataset(schema=schema, rows=((4,),))
    q = Query(kind="avg", target="v").validated(schema)
    proj = project_query_attributes(d, q)
    with pytest.raises(EmptyAverageError, match="only matching record"):
        per_instance_sensitivity(proj, q, L1)
