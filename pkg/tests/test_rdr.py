import math
import random

import pytest

from riskscope import (
    GAUSSIAN,
    L1,
    L2,
    LAPLACE,
    NO_DP,
    MechanismSpec,
    ParameterError,
    QueryError,
    QueryOutput,
    evaluate_query,
    ex_post_loss,
    neighbor_outputs,
    output_dependent_rdr,
    per_instance_sensitivity,
    project_query_attributes,
    rdr_profile,
    signed_log_likelihood_ratio,
)
from riskscope.mechanisms import RngStream, apply_mechanism, noise_params
from riskscope.rdr import profile_stats

from test_queries import RANDOM_QUERIES, random_dataset

# A Gaussian spec with sigma^2 exactly 2: delta solves ln(1.25/delta) = 1.
SIGMA2_TWO = MechanismSpec(GAUSSIAN, 1.0, 1.25 / math.e)


def patient_pis(patient, patient_query, norm=L1):
    proj = project_query_attributes(patient, patient_query)
    return per_instance_sensitivity(proj, patient_query, norm)


# ---------------------------------------------------------------------------
# Output-dependent risk


def test_output_dependent_rdr_patient_example():
    assert output_dependent_rdr(
        QueryOutput(values=(1.3,)), QueryOutput(values=(0.0,)), L1
    ) == pytest.approx(1.3)


def test_output_dependent_rdr_zero_on_equal_outputs():
    o = QueryOutput(values=(2.0, 3.0))
    assert output_dependent_rdr(o, o, L1) == 0.0


def test_output_dependent_rdr_l2():
    assert output_dependent_rdr(
        QueryOutput(values=(3.0, 4.0)), QueryOutput(values=(0.0, 0.0)), L2
    ) == 5.0


def test_output_dependent_rdr_dimension_mismatch():
    with pytest.raises(QueryError, match="dimension"):
        output_dependent_rdr(QueryOutput(values=(1.0,)), QueryOutput(values=(1.0, 2.0)), L1)


# ---------------------------------------------------------------------------
# Profiles


def test_patient_profile_across_epsilons(patient, patient_query):
    pis = patient_pis(patient, patient_query)
    expected = {
        NO_DP: [0.0, 0.0, 1.0],
        1.0: [1.0, 1.0, 2.0],
        0.1: [10.0, 10.0, 11.0],
        0.01: [100.0, 100.0, 101.0],
    }
    for eps, rows in expected.items():
        profile = rdr_profile(pis, MechanismSpec(LAPLACE, eps), patient_query.k, 1.0)
        assert list(profile.per_row) == rows


def test_patient_ratios_exact(patient, patient_query):
    pis = patient_pis(patient, patient_query)
    for eps, expected in [(1.0, 0.5), (0.1, 10 / 11), (0.01, 100 / 101)]:
        profile = rdr_profile(pis, MechanismSpec(LAPLACE, eps), patient_query.k, 1.0)
        assert abs(profile.ratio() - expected) < 1e-12


def test_gaussian_profile_reduces_to_noise_term_when_pis_zero():
    schema_rows = ((3,),) * 5
    from riskscope import Column, Dataset, Leaf, Query, Schema

    d = Dataset(schema=Schema(columns=(Column("v", "integer", (0, 5)),)), rows=schema_rows)
    q = Query(kind="count", predicate=Leaf("v", "==", 99)).validated(d.schema)
    proj = project_query_attributes(d, q)
    pis = per_instance_sensitivity(proj, q, L2)
    spec = MechanismSpec(GAUSSIAN, 1.0, 1e-5)
    profile = rdr_profile(pis, spec, 1, 1.0)
    sigma2 = noise_params(spec, 1.0).variance_sigma2
    assert set(profile.per_row) == {math.sqrt(sigma2)}


def test_profile_norm_family_mismatch(patient, patient_query):
    pis = patient_pis(patient, patient_query, L1)
    with pytest.raises(QueryError, match="needs l2"):
        rdr_profile(pis, MechanismSpec(GAUSSIAN, 1.0, 1e-5), 1, 1.0)


def test_profile_converges_to_pis_as_epsilon_grows(patient, patient_query):
    pis_l1 = patient_pis(patient, patient_query, L1)
    at_inf = rdr_profile(pis_l1, MechanismSpec(LAPLACE, NO_DP), 1, 1.0)
    assert list(at_inf.per_row) == list(pis_l1.per_row)

    pis_l2 = patient_pis(patient, patient_query, L2)
    near_inf = rdr_profile(pis_l2, MechanismSpec(GAUSSIAN, 1e6, 1e-5), 1, 1.0)
    for got, want in zip(near_inf.per_row, pis_l2.per_row):
        assert got == pytest.approx(want, rel=1e-3, abs=1e-3)


def test_laplace_ratio_monotone_in_epsilon(patient, patient_query):
    pis = patient_pis(patient, patient_query)
    grid = [10.0, 5.0, 1.0, 0.5, 0.1, 0.05, 0.01, 0.001]
    ratios = [
        rdr_profile(pis, MechanismSpec(LAPLACE, eps), 1, 1.0).ratio() for eps in grid
    ]
    # grid is descending, so ratios must be non-decreasing
    for a, b in zip(ratios, ratios[1:]):
        assert a <= b + 1e-15


def test_profile_stats_shape(patient, patient_query):
    pis = patient_pis(patient, patient_query)
    stats = profile_stats(rdr_profile(pis, MechanismSpec(LAPLACE, 0.1), 1, 1.0))
    assert stats["rdr_min"] == 10.0
    assert stats["rdr_max"] == 11.0
    assert stats["ratio"] == pytest.approx(10 / 11, abs=1e-12)
    assert stats["norm_variance"] == pytest.approx(2 / 1089, abs=1e-15)
    assert len(stats["histogram"]) == 16
    assert sum(stats["histogram"]) == 3
    assert stats["histogram"][0] == 2 and stats["histogram"][15] == 1


def test_degenerate_histogram_single_bucket():
    from riskscope import Column, Dataset, Query, Schema

    d = Dataset(schema=Schema(columns=(Column("v", "integer", (0, 5)),)), rows=((1,),) * 4)
    q = Query(kind="count").validated(d.schema)
    proj = project_query_attributes(d, q)
    pis = per_instance_sensitivity(proj, q, L1)
    profile = rdr_profile(pis, MechanismSpec(LAPLACE, 1.0), 1, 1.0)
    hist = profile.histogram()
    assert hist[0] == 4 and sum(hist) == 4


# ---------------------------------------------------------------------------
# Ex-post loss


def test_ex_post_loss_laplace_hand_computed():
    loss = ex_post_loss(
        QueryOutput(values=(1.3,)),
        QueryOutput(values=(1.0,)),
        QueryOutput(values=(0.0,)),
        MechanismSpec(LAPLACE, 1.0),
        1.0,
    )
    assert loss == pytest.approx(1.0, abs=1e-12)


def test_ex_post_loss_zero_when_neighbor_equals_full():
    o = QueryOutput(values=(5.0,))
    full = QueryOutput(values=(2.0,))
    assert ex_post_loss(o, full, full, MechanismSpec(LAPLACE, 1.0), 1.0) == 0.0


def test_ex_post_loss_gaussian_hand_computed():
    loss = ex_post_loss(
        QueryOutput(values=(2.0,)),
        QueryOutput(values=(1.0,)),
        QueryOutput(values=(0.0,)),
        SIGMA2_TWO,
        1.0,
    )
    assert loss == pytest.approx(0.75, abs=1e-12)


def test_ex_post_loss_rejects_sentinel():
    o = QueryOutput(values=(1.0,))
    with pytest.raises(ParameterError):
        ex_post_loss(o, o, o, MechanismSpec(LAPLACE, NO_DP), 1.0)


def _random_triple(rnd, family):
    """Random (dataset, query, sampled output) with the neighbor outputs."""
    spec = (
        MechanismSpec(LAPLACE, rnd.choice([0.01, 0.1, 1.0, 5.0]))
        if family == LAPLACE
        else MechanismSpec(GAUSSIAN, rnd.choice([0.01, 0.1, 1.0, 5.0]), 1e-5)
    )
    while True:
        d = random_dataset(rnd, max_rows=50)
        q = rnd.choice(RANDOM_QUERIES).validated(d.schema)
        proj = project_query_attributes(d, q)
        try:
            full = evaluate_query(proj, q)
            neighbors = neighbor_outputs(proj, q)
        except Exception:
            continue
        from riskscope import global_sensitivity

        sens = global_sensitivity(q, d.schema, d.n, spec.norm)
        o = apply_mechanism(full, spec, sens, RngStream.from_seed(rnd.randrange(2**32)))
        return spec, sens, full, neighbors, o


def test_signed_loss_ordering_matches_risk_ordering():
    """The signed log-likelihood ratio orders exactly like the realized risk."""
    rnd = random.Random(99)
    for family in (LAPLACE, GAUSSIAN):
        checked = 0
        for _ in range(400):
            spec, sens, full, neighbors, o = _random_triple(rnd, family)
            pairs = [
                (
                    output_dependent_rdr(o, nb, spec.norm),
                    signed_log_likelihood_ratio(o, full, nb, spec, sens),
                )
                for nb in neighbors
            ]
            for i in range(len(pairs)):
                for j in range(len(pairs)):
                    if pairs[i][0] > pairs[j][0]:
                        assert pairs[i][1] > pairs[j][1]
                        checked += 1
        assert checked > 100


def test_ex_post_loss_table_invariants():
    """Losses are non-negative and zero exactly when the output is equidistant
    from the full and neighbor outputs."""
    rnd = random.Random(55)
    for _ in range(60):
        d = random_dataset(rnd, max_rows=25)
        q = rnd.choice(RANDOM_QUERIES).validated(d.schema)
        spec = MechanismSpec(LAPLACE, rnd.choice([0.1, 1.0]))
        proj = project_query_attributes(d, q)
        try:
            full = evaluate_query(proj, q)
            neighbors = neighbor_outputs(proj, q)
            from riskscope import global_sensitivity

            sens = global_sensitivity(q, d.schema, d.n, spec.norm)
        except Exception:
            continue
        o = apply_mechanism(full, spec, sens, RngStream.from_seed(rnd.randrange(2**31)))
        from riskscope.rdr import ex_post_loss_table

        table = ex_post_loss_table(o, proj, q, spec, sens)
        assert len(table.per_row) == d.n
        for unique_idx, loss in enumerate(table.per_unique_values):
            assert loss >= 0.0
            nb = neighbors[unique_idx]
            equidistant = output_dependent_rdr(o, nb, spec.norm) == output_dependent_rdr(
                o, full, spec.norm
            )
            assert (loss == 0.0) == equidistant


def test_absolute_loss_ordering_has_a_counterexample(patient, patient_query):
    """With the absolute value, risk ordering can invert: the record whose
    removal leaves the output unchanged carries zero loss yet can sit farther
    from the realized output than the record that caused the change."""
    proj = project_query_attributes(patient, patient_query)
    full = evaluate_query(proj, patient_query)  # (1.0,)
    nb_c = QueryOutput(values=(0.0,))  # neighbor without the diseased patient
    nb_a = QueryOutput(values=(1.0,))  # neighbor without a healthy patient
    spec = MechanismSpec(LAPLACE, 1.0)
    o = QueryOutput(values=(0.2,))  # a realized output below the true count

    rdr_c = output_dependent_rdr(o, nb_c, L1)
    rdr_a = output_dependent_rdr(o, nb_a, L1)
    loss_c = ex_post_loss(o, full, nb_c, spec, 1.0)
    loss_a = ex_post_loss(o, full, nb_a, spec, 1.0)
    assert rdr_a > rdr_c and loss_a < loss_c
