"""Preference-driven epsilon selection over a candidate grid.

Two selection routes share the same profile machinery:

* `find_epsilon_from_rdr` scans candidates from largest to smallest and picks
  the first whose risk profile satisfies a ratio preference. The choice is
  deterministic (profiles are closed-form); only the released output is
  randomized. The chosen epsilon stays controller-side.

* `find_and_release_epsilon` makes the threshold test itself differentially
  private with an above-threshold (sparse vector) primitive over the variance
  of max-normalized risks, so the chosen epsilon can be released. One pass
  consumes the fixed budget eps_svt regardless of how many candidates were
  tested; rerunning is an explicit controller action.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Iterator, Sequence

from .errors import ParameterError, QueryError
from .mechanisms import MechanismSpec, RngStream, apply_mechanism
from .queries import (
    PisTable,
    Query,
    QueryOutput,
    evaluate_query,
    global_sensitivity,
    per_instance_sensitivity,
)
from .rdr import RdrProfile, rdr_profile
from .tabular import Dataset, ProjectedDataset, project_query_attributes

FOUND = "found"
NO_SUITABLE_EPSILON = "no_suitable_epsilon"

#: Numerator share of the budget split eps1 : eps2 = 1 : 2^(2/3).
SVT_SPLIT_FRACTION = 1.0 / (1.0 + 2.0 ** (2.0 / 3.0))


@dataclass(frozen=True)
class EpsilonGrid:
    """Strictly descending positive candidate epsilons (possibly empty after truncation)."""

    values: tuple[float, ...]

    def __post_init__(self):
        for v in self.values:
            if not (v > 0) or math.isinf(v) or math.isnan(v):
                raise ParameterError(f"grid values must be finite and positive, got {v}")
        for a, b in zip(self.values, self.values[1:]):
            if not a > b:
                raise ParameterError(f"grid must be strictly descending ({a} before {b})")

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @classmethod
    def default37(cls) -> "EpsilonGrid":
        """10..1, 0.9..0.1, 0.09..0.01, 0.009..0.001 (37 candidates)."""
        values = [float(i) for i in range(10, 0, -1)]
        values += [i / 10 for i in range(9, 0, -1)]
        values += [i / 100 for i in range(9, 0, -1)]
        values += [i / 1000 for i in range(9, 0, -1)]
        return cls(values=tuple(values))

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "EpsilonGrid":
        return cls(values=tuple(float(v) for v in values))

    @classmethod
    def from_json(cls, text: str | bytes) -> "EpsilonGrid":
        doc = json.loads(text)
        if isinstance(doc, dict):
            doc = doc.get("values")
        if not isinstance(doc, list):
            raise ParameterError("grid JSON must be a list of values")
        return cls.from_values(doc)


# ---------------------------------------------------------------------------
# Controller preferences


@dataclass(frozen=True)
class MinMaxRatio:
    """Satisfied when rdr_min / rdr_max >= tau_p."""

    tau_p: float

    def __post_init__(self):
        if not (0.0 <= self.tau_p <= 1.0):
            raise ParameterError(f"tau_p must be in [0, 1], got {self.tau_p}")


@dataclass(frozen=True)
class GroupMedianRatio:
    """Satisfied when the worst pairwise ratio of group median risks >= tau_p.

    `groups` maps group names to row indices; together they must cover every
    row exactly once. Medians use the lower-median convention for even sizes.
    """

    groups: dict[str, tuple[int, ...]]
    tau_p: float

    def __post_init__(self):
        if not (0.0 <= self.tau_p <= 1.0):
            raise ParameterError(f"tau_p must be in [0, 1], got {self.tau_p}")
        if not self.groups:
            raise ParameterError("group preference requires at least one group")

    def validate_partition(self, n: int) -> None:
        seen: set[int] = set()
        total = 0
        for name, rows in self.groups.items():
            if len(rows) == 0:
                raise ParameterError(f"group {name!r} is empty")
            for r in rows:
                if not (0 <= r < n):
                    raise ParameterError(f"group {name!r} references row {r} outside 0..{n - 1}")
            total += len(rows)
            seen.update(rows)
        if len(seen) != total:
            raise ParameterError("groups overlap: partition must be disjoint")
        if len(seen) != n:
            raise ParameterError(f"groups cover {len(seen)} of {n} rows; partition must be total")


@dataclass(frozen=True)
class NormalizedVariance:
    """Deterministic preview form: satisfied when Var(risk / rdr_max) <= tau_var."""

    tau_var: float

    def __post_init__(self):
        if self.tau_var < 0:
            raise ParameterError(f"tau_var must be >= 0, got {self.tau_var}")


PrivacyPreference = MinMaxRatio | GroupMedianRatio | NormalizedVariance
RATIO_PREFERENCES = (MinMaxRatio, GroupMedianRatio)


def _lower_median(values: list[float]) -> float:
    values = sorted(values)
    return values[(len(values) - 1) // 2]


def evaluate_preference(
    profile: RdrProfile, preference: PrivacyPreference
) -> tuple[bool, float]:
    """(satisfied, statistic) for a profile; thresholds compare exactly, no slack."""
    if isinstance(preference, MinMaxRatio):
        ratio = profile.ratio()
        return ratio >= preference.tau_p, ratio
    if isinstance(preference, NormalizedVariance):
        var = profile.normalized_variance()
        return var <= preference.tau_var, var
    preference.validate_partition(profile.pis.n)
    per_row = profile.per_row
    medians = [
        _lower_median([per_row[r] for r in rows]) for rows in preference.groups.values()
    ]
    hi = max(medians)
    statistic = 1.0 if hi == 0.0 else min(medians) / hi
    return statistic >= preference.tau_p, statistic


# ---------------------------------------------------------------------------
# Results


@dataclass(frozen=True)
class SearchResult:
    """Outcome of one selection run. Controller-side object.

    `charged` is the (epsilon, delta) pair the odometer must record, held as
    exact decimals. Rejections charge nothing: when nothing is released the
    realized privacy loss is zero.
    """

    status: str
    chosen_epsilon: float | None
    chosen_index: int | None
    output: QueryOutput | None
    epsilon_released: bool
    charged: tuple[Decimal, Decimal]
    statistic: float | None = None
    evaluated: tuple[tuple[float, float], ...] = field(default=())

    @property
    def found(self) -> bool:
        return self.status == FOUND


def _rejected(evaluated: Sequence[tuple[float, float]] = ()) -> SearchResult:
    return SearchResult(
        status=NO_SUITABLE_EPSILON,
        chosen_epsilon=None,
        chosen_index=None,
        output=None,
        epsilon_released=False,
        charged=(Decimal(0), Decimal(0)),
        evaluated=tuple(evaluated),
    )


def _prepare(
    dataset: Dataset,
    query: Query,
    family: MechanismSpec,
    workers: int,
    sensitivity_override: float | None,
    precomputed: tuple[ProjectedDataset, PisTable] | None,
) -> tuple[Query, ProjectedDataset, PisTable, float]:
    checked = query.validated(dataset.schema)
    sensitivity = global_sensitivity(
        checked, dataset.schema, dataset.n, family.norm, override=sensitivity_override
    )
    if precomputed is not None:
        projection, pis = precomputed
        if pis.norm != family.norm:
            raise QueryError(
                f"precomputed sensitivities use {pis.norm}, mechanism needs {family.norm}"
            )
    else:
        projection = project_query_attributes(dataset, checked)
        pis = per_instance_sensitivity(projection, checked, family.norm, workers)
    return checked, projection, pis, sensitivity


def find_epsilon_from_rdr(
    dataset: Dataset,
    query: Query,
    family: MechanismSpec,
    grid: EpsilonGrid,
    preference: MinMaxRatio | GroupMedianRatio,
    stream: RngStream,
    workers: int = 1,
    sensitivity_override: float | None = None,
    precomputed: tuple[ProjectedDataset, PisTable] | None = None,
) -> SearchResult:
    """Largest candidate whose profile satisfies a ratio preference, plus one release.

    The returned epsilon must never reach the analyst; callers expose only the
    noisy output. Exhausting the grid rejects with zero charge.
    """
    if len(grid) == 0:
        raise ParameterError("candidate grid is empty")
    if not isinstance(preference, RATIO_PREFERENCES):
        raise ParameterError(
            "this route takes ratio preferences only; variance thresholds go through "
            "the releasing variant (deterministic variance preview is controller-side)"
        )
    checked, projection, pis, sensitivity = _prepare(
        dataset, query, family, workers, sensitivity_override, precomputed
    )
    evaluated = []
    for index, epsilon in enumerate(grid.values):
        profile = rdr_profile(pis, family.with_epsilon(epsilon), checked.k, sensitivity)
        satisfied, statistic = evaluate_preference(profile, preference)
        evaluated.append((epsilon, statistic))
        if satisfied:
            spec = family.with_epsilon(epsilon)
            output = apply_mechanism(
                evaluate_query(projection, checked),
                spec,
                sensitivity,
                stream.child("release", index),
            )
            return SearchResult(
                status=FOUND,
                chosen_epsilon=epsilon,
                chosen_index=index,
                output=output,
                epsilon_released=False,
                charged=(Decimal(str(epsilon)), Decimal(str(spec.delta))),
                statistic=statistic,
                evaluated=tuple(evaluated),
            )
    return _rejected(evaluated)


# ---------------------------------------------------------------------------
# Private release of the chosen epsilon


@dataclass(frozen=True)
class SvtConfig:
    """Budget and threshold for the above-threshold pass.

    eps1 (threshold noise) and eps2 (per-candidate noise) split eps_svt in the
    ratio 1 : 2^(2/3); the statistic is the variance of max-normalized risks,
    whose one-record sensitivity is taken as 1/n.
    """

    eps_svt: float
    tau_var: float
    delta_svt: float

    def __post_init__(self):
        if not self.eps_svt > 0:
            raise ParameterError(f"eps_svt must be positive, got {self.eps_svt}")
        if self.tau_var < 0:
            raise ParameterError(f"tau_var must be >= 0, got {self.tau_var}")
        if not self.delta_svt > 0:
            raise ParameterError(f"delta_svt must be positive, got {self.delta_svt}")

    @property
    def eps1(self) -> float:
        return self.eps_svt * SVT_SPLIT_FRACTION

    @property
    def eps2(self) -> float:
        return self.eps_svt - self.eps1

    @classmethod
    def for_rows(cls, eps_svt: float, tau_var: float, n: int) -> "SvtConfig":
        if n < 1:
            raise ParameterError(f"dataset size must be >= 1, got {n}")
        return cls(eps_svt=eps_svt, tau_var=tau_var, delta_svt=1.0 / n)


def svt_above_threshold(
    values: Iterable[float], threshold: float, cfg: SvtConfig, stream: RngStream
) -> int | None:
    """Index of the first value whose noisy form clears the noisy threshold.

    The threshold noise rho ~ Lap(delta_svt / eps1) is drawn once up front;
    each value gets fresh Lap(2 delta_svt / eps2). Stops at the first pass
    (single positive answer); None when the stream exhausts.
    """
    rho = stream.child("rho").laplace(cfg.delta_svt / cfg.eps1)
    noisy_threshold = threshold + rho
    for index, value in enumerate(values):
        noise = stream.child("query", index).laplace(2.0 * cfg.delta_svt / cfg.eps2)
        if value + noise >= noisy_threshold:
            return index
    return None


def find_and_release_epsilon(
    dataset: Dataset,
    query: Query,
    family: MechanismSpec,
    grid: EpsilonGrid,
    cfg: SvtConfig,
    stream: RngStream,
    workers: int = 1,
    sensitivity_override: float | None = None,
    precomputed: tuple[ProjectedDataset, PisTable] | None = None,
) -> SearchResult:
    """Above-threshold scan over -Var(normalized risks), then release output and epsilon.

    A found candidate charges chosen epsilon + eps_svt; eps_svt is a fixed
    cost no matter how many candidates the scan consumed.
    """
    if len(grid) == 0:
        raise ParameterError("candidate grid is empty")
    expected = 1.0 / dataset.n
    if cfg.delta_svt != expected:
        raise ParameterError(
            f"delta_svt must be 1/n = {expected} for this dataset, got {cfg.delta_svt}"
        )
    checked, projection, pis, sensitivity = _prepare(
        dataset, query, family, workers, sensitivity_override, precomputed
    )

    evaluated: list[tuple[float, float]] = []

    def negated_variances() -> Iterator[float]:
        for epsilon in grid.values:
            profile = rdr_profile(pis, family.with_epsilon(epsilon), checked.k, sensitivity)
            variance = profile.normalized_variance()
            evaluated.append((epsilon, variance))
            yield -variance

    index = svt_above_threshold(
        negated_variances(), -cfg.tau_var, cfg, stream.child("svt")
    )
    if index is None:
        return _rejected(evaluated)

    epsilon = grid.values[index]
    spec = family.with_epsilon(epsilon)
    output = apply_mechanism(
        evaluate_query(projection, checked),
        spec,
        sensitivity,
        stream.child("release", index),
    )
    return SearchResult(
        status=FOUND,
        chosen_epsilon=epsilon,
        chosen_index=index,
        output=output,
        epsilon_released=True,
        charged=(
            Decimal(str(epsilon)) + Decimal(str(cfg.eps_svt)),
            Decimal(str(spec.delta)),
        ),
        statistic=evaluated[index][1],
        evaluated=tuple(evaluated),
    )
