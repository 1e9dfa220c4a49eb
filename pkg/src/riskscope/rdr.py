"""Relative disclosure risk: per-record profiles and realized privacy loss.

A profile holds, for one candidate epsilon, the closed-form risk value of
every individual:

  Laplace:   pis_i + k * sensitivity / epsilon
  Gaussian:  sqrt(pis_i^2 + k * sigma^2)

where pis_i is the per-instance sensitivity. At the no-DP sentinel
(epsilon = inf) the noise term vanishes and the profile reduces to the raw
per-instance sensitivities. Values are computed once per unique projected
record and fanned out to rows through the projection multiplicity.

Profiles and per-instance sensitivities are controller-side data. Nothing in
this module may leak into analyst-facing payloads; the service layer enforces
that boundary and the test suite audits it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError, QueryError
from .mechanisms import GAUSSIAN, LAPLACE, MechanismSpec, noise_params
from .queries import (
    L1,
    L2,
    PerRowView,
    PisTable,
    Query,
    QueryOutput,
    evaluate_query,
    neighbor_outputs,
    norm_diff,
)
from .tabular import ProjectedDataset

HISTOGRAM_BUCKETS = 16


def output_dependent_rdr(output: QueryOutput, neighbor_out: QueryOutput, norm: str) -> float:
    """Realized-output disclosure risk ||o - q(x_{-i})||; zero iff o sits on the neighbor."""
    return norm_diff(output.values, neighbor_out.values, norm)


@dataclass(frozen=True)
class RdrProfile:
    spec: MechanismSpec
    k: int
    sensitivity: float
    pis: PisTable
    per_unique_values: tuple[float, ...]

    @property
    def epsilon(self) -> float:
        return self.spec.epsilon

    @property
    def per_row(self) -> PerRowView:
        return PerRowView(self.per_unique_values, self.pis.projection.row_to_unique)

    @property
    def rdr_min(self) -> float:
        return min(self.per_unique_values)

    @property
    def rdr_max(self) -> float:
        return max(self.per_unique_values)

    def ratio(self) -> float:
        """min/max risk ratio in [0, 1]; 1 when all values are equal (incl. all-zero)."""
        lo, hi = self.rdr_min, self.rdr_max
        if hi == 0.0:
            return 1.0
        return lo / hi

    def _weights(self) -> tuple[int, ...]:
        return self.pis.projection.counts()

    def normalized_variance(self) -> float:
        """Population variance of risks normalized by the maximum, over all n rows."""
        hi = self.rdr_max
        n = self.pis.n
        if hi == 0.0:
            return 0.0
        weights = self._weights()
        scaled = [v / hi for v in self.per_unique_values]
        mean = sum(w * s for w, s in zip(weights, scaled)) / n
        return sum(w * (s - mean) ** 2 for w, s in zip(weights, scaled)) / n

    def histogram(self, buckets: int = HISTOGRAM_BUCKETS) -> list[int]:
        """Equal-width row counts over [rdr_min, rdr_max]; degenerate range -> bucket 0."""
        lo, hi = self.rdr_min, self.rdr_max
        counts = [0] * buckets
        weights = self._weights()
        if hi == lo:
            counts[0] = self.pis.n
            return counts
        span = hi - lo
        for w, v in zip(weights, self.per_unique_values):
            idx = int((v - lo) / span * buckets)
            counts[min(idx, buckets - 1)] += w
        return counts


def rdr_profile(
    pis: PisTable, spec: MechanismSpec, k: int, sensitivity: float
) -> RdrProfile:
    """Closed-form risk profile for one candidate epsilon; no sampling involved."""
    if k < 1:
        raise ParameterError(f"output dimension must be >= 1, got {k}")
    if not sensitivity > 0:
        raise ParameterError(f"sensitivity must be positive, got {sensitivity}")
    expected_norm = L1 if spec.family == LAPLACE else L2
    if pis.norm != expected_norm:
        raise QueryError(
            f"per-instance sensitivities use {pis.norm}, but {spec.family} needs {expected_norm}"
        )
    if spec.family == LAPLACE:
        noise = 0.0 if math.isinf(spec.epsilon) else k * sensitivity / spec.epsilon
        values = tuple(p + noise for p in pis.per_unique_values)
    else:
        sigma2 = (
            0.0
            if math.isinf(spec.epsilon)
            else noise_params(spec, sensitivity).variance_sigma2
        )
        values = tuple(math.sqrt(p * p + k * sigma2) for p in pis.per_unique_values)
    return RdrProfile(
        spec=spec, k=k, sensitivity=sensitivity, pis=pis, per_unique_values=values
    )


def _loss_terms(
    output: QueryOutput,
    full_out: QueryOutput,
    neighbor_out: QueryOutput,
    spec: MechanismSpec,
    sensitivity: float,
) -> float:
    if math.isinf(spec.epsilon):
        raise ParameterError("realized privacy loss is undefined at the no-DP sentinel")
    if spec.family == LAPLACE:
        to_neighbor = norm_diff(output.values, neighbor_out.values, L1)
        to_full = norm_diff(output.values, full_out.values, L1)
        return spec.epsilon * (to_neighbor - to_full) / sensitivity
    sigma2 = noise_params(spec, sensitivity).variance_sigma2
    to_neighbor = norm_diff(output.values, neighbor_out.values, L2)
    to_full = norm_diff(output.values, full_out.values, L2)
    return (to_neighbor**2 - to_full**2) / (2.0 * sigma2)


def ex_post_loss(
    output: QueryOutput,
    full_out: QueryOutput,
    neighbor_out: QueryOutput,
    spec: MechanismSpec,
    sensitivity: float,
) -> float:
    """Realized per-instance privacy loss |ln(Pr[M(x)=o] / Pr[M(x_{-i})=o])|.

    Laplace:  | eps * (||o - q(x_{-i})||_1 - ||o - q(x)||_1) / sensitivity |
    Gaussian: | (||o - q(x_{-i})||_2^2 - ||o - q(x)||_2^2) / (2 sigma^2) |
    """
    return abs(_loss_terms(output, full_out, neighbor_out, spec, sensitivity))


def signed_log_likelihood_ratio(
    output: QueryOutput,
    full_out: QueryOutput,
    neighbor_out: QueryOutput,
    spec: MechanismSpec,
    sensitivity: float,
) -> float:
    """ln(Pr[M(x)=o] / Pr[M(x_{-i})=o]) without the absolute value.

    Unlike `ex_post_loss`, this is strictly increasing in the realized-output
    risk ||o - q(x_{-i})|| for any fixed o, which is what makes that risk a
    faithful relative indicator.
    """
    return _loss_terms(output, full_out, neighbor_out, spec, sensitivity)


@dataclass(frozen=True)
class ExPostLossTable:
    """Realized per-instance loss of every individual for one released output.

    Verification-side companion to the profile: values are non-negative and a
    record's loss is zero exactly when the output sits equidistant from the
    full and neighbor outputs.
    """

    output: QueryOutput
    spec: MechanismSpec
    sensitivity: float
    projection: ProjectedDataset
    per_unique_values: tuple[float, ...]

    @property
    def per_row(self) -> PerRowView:
        return PerRowView(self.per_unique_values, self.projection.row_to_unique)


def ex_post_loss_table(
    output: QueryOutput,
    projection: ProjectedDataset,
    query: Query,
    spec: MechanismSpec,
    sensitivity: float,
) -> ExPostLossTable:
    """Per-row realized loss for a released output, via one neighbor evaluation
    per unique projected record."""
    full = evaluate_query(projection, query)
    values = tuple(
        ex_post_loss(output, full, nb, spec, sensitivity)
        for nb in neighbor_outputs(projection, query)
    )
    return ExPostLossTable(
        output=output,
        spec=spec,
        sensitivity=sensitivity,
        projection=projection,
        per_unique_values=values,
    )


def profile_stats(profile: RdrProfile) -> dict:
    """Report row for one candidate epsilon (controller-side only)."""
    return {
        "epsilon": profile.epsilon,
        "rdr_min": profile.rdr_min,
        "rdr_max": profile.rdr_max,
        "ratio": profile.ratio(),
        "norm_variance": profile.normalized_variance(),
        "histogram": profile.histogram(),
    }


def pis_summary(pis: PisTable) -> dict:
    """Controller-side summary of the per-instance sensitivity distribution."""
    values = pis.per_unique_values
    weights = pis.projection.counts()
    n = pis.n
    lo, hi = min(values), max(values)
    mean = sum(w * v for w, v in zip(weights, values)) / n
    counts = [0] * HISTOGRAM_BUCKETS
    if hi == lo:
        counts[0] = n
    else:
        span = hi - lo
        for w, v in zip(weights, values):
            idx = int((v - lo) / span * HISTOGRAM_BUCKETS)
            counts[min(idx, HISTOGRAM_BUCKETS - 1)] += w
    return {
        "pis_min": lo,
        "pis_max": hi,
        "pis_mean": mean,
        "unique_records": pis.projection.unique_count,
        "rows": n,
        "histogram": counts,
    }
