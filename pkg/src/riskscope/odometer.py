"""Cumulative privacy-loss tracking with a dynamic bound instead of a fixed budget.

Charges are exact decimal amounts (the candidate grids are decimal-valued, and
binary-float accumulation would make eps_c comparisons order-dependent). The
journal is an append-only JSON-lines file per dataset; state is recomputed
from it on open, and replay reproduces eps_c digit for digit.

An incoming query only sees grid candidates strictly larger than the already
consumed eps_c, so every answer pushes the bound up and a query that cannot
satisfy the controller's preference above eps_c is rejected with no charge.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .errors import JournalError, OdometerError, ParameterError, RiskscopeError
from .mechanisms import MechanismSpec, RngStream
from .queries import PisTable, Query
from .search import (
    EpsilonGrid,
    MinMaxRatio,
    GroupMedianRatio,
    SvtConfig,
    find_and_release_epsilon,
    find_epsilon_from_rdr,
)
from .tabular import Dataset, ProjectedDataset

ALG_RDR = "rdr"
ALG_SVT = "svt"

INFINITY = Decimal("Infinity")


def _decimal(value, what: str) -> Decimal:
    try:
        d = Decimal(str(value))
    except InvalidOperation:
        raise OdometerError(f"{what} is not a decimal amount: {value!r}")
    if not d.is_finite():
        raise OdometerError(f"{what} must be finite, got {value!r}")
    return d


@dataclass(frozen=True)
class OdometerEntry:
    query_id: str
    eps: Decimal
    delta: Decimal
    algorithm: str
    ts: str

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "query_id": self.query_id,
                "eps": str(self.eps),
                "delta": str(self.delta),
                "alg": self.algorithm,
                "ts": self.ts,
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json_line(cls, line: str) -> "OdometerEntry":
        try:
            doc = json.loads(line)
            return cls(
                query_id=doc["query_id"],
                eps=Decimal(doc["eps"]),
                delta=Decimal(doc["delta"]),
                algorithm=doc["alg"],
                ts=doc["ts"],
            )
        except (json.JSONDecodeError, KeyError, TypeError, InvalidOperation) as exc:
            raise JournalError(f"corrupt journal line {line!r}: {exc}")


@dataclass(frozen=True)
class OdometerState:
    """Append-only charge log plus the controller's global delta budget."""

    dataset_id: str
    entries: tuple[OdometerEntry, ...] = ()
    delta_g: Decimal | None = None

    @property
    def eps_c(self) -> Decimal:
        return sum((e.eps for e in self.entries), Decimal(0))

    @property
    def delta_sum(self) -> Decimal:
        return sum((e.delta for e in self.entries), Decimal(0))

    def charge(
        self, query_id: str, eps, delta, algorithm: str, ts: str | None = None
    ) -> "OdometerState":
        eps_d = _decimal(eps, "charged epsilon")
        delta_d = _decimal(delta, "charged delta")
        if eps_d <= 0:
            raise OdometerError(f"charged epsilon must be positive, got {eps}")
        if delta_d < 0:
            raise OdometerError(f"charged delta must be >= 0, got {delta}")
        if any(e.query_id == query_id for e in self.entries):
            raise OdometerError(f"query id {query_id!r} was already charged")
        entry = OdometerEntry(
            query_id=query_id,
            eps=eps_d,
            delta=delta_d,
            algorithm=algorithm,
            ts=ts or _now(),
        )
        return replace(self, entries=self.entries + (entry,))

    def comp_bound(self) -> Decimal:
        """Running loss bound: sum of charged epsilons while delta_g covers the deltas."""
        delta_g = self.delta_g if self.delta_g is not None else Decimal(0)
        if delta_g < self.delta_sum:
            return INFINITY
        return self.eps_c


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def truncate_grid(grid: EpsilonGrid, state: OdometerState) -> EpsilonGrid:
    """Keep candidates strictly above the consumed eps_c; may come back empty."""
    eps_c = state.eps_c
    kept = tuple(v for v in grid.values if Decimal(str(v)) > eps_c)
    return EpsilonGrid(values=kept)


class Journal:
    """Append-only JSON-lines charge log for one dataset."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def load_entries(self) -> tuple[OdometerEntry, ...]:
        if not self.path.exists():
            return ()
        entries = []
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    entries.append(OdometerEntry.from_json_line(line))
        ids = [e.query_id for e in entries]
        if len(set(ids)) != len(ids):
            raise JournalError(f"journal {self.path} charges a query id twice")
        return tuple(entries)

    def append(self, entry: OdometerEntry) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(entry.to_json_line() + "\n")
            fh.flush()
            os.fsync(fh.fileno())


@dataclass(frozen=True)
class Decision:
    """Journaled outcome of one answer attempt (controller-side record)."""

    query_id: str
    algorithm: str
    status: str  # "answered" | "rejected"
    reason: str | None
    seed: int | None
    chosen_epsilon: float | None
    epsilon_released: bool
    output_values: tuple[float, ...] | None
    statistic: float | None
    charged_eps: str
    charged_delta: str
    eps_c_after: str
    candidates_considered: int

    @property
    def answered(self) -> bool:
        return self.status == "answered"


class Session:
    """Single-writer answering session over one registered dataset.

    All mutation funnels through one lock; concurrent sessions over different
    datasets are independent. The charge is journaled before the decision is
    returned, so a release can never outrun its accounting.
    """

    def __init__(
        self,
        dataset_id: str,
        dataset: Dataset,
        family: MechanismSpec,
        grid: EpsilonGrid,
        journal: Journal | None = None,
        delta_g: Decimal | str | None = None,
        workers: int = 1,
    ):
        self.dataset_id = dataset_id
        self.dataset = dataset
        self.family = family
        self.grid = grid
        self.journal = journal
        self.workers = workers
        self._lock = threading.Lock()
        entries = journal.load_entries() if journal is not None else ()
        self.state = OdometerState(
            dataset_id=dataset_id,
            entries=entries,
            delta_g=_decimal(delta_g, "delta_g") if delta_g is not None else None,
        )

    # Rebuilding from the journal must agree with the incrementally held state.
    def verify_replay(self) -> None:
        if self.journal is None:
            return
        replayed = OdometerState(
            dataset_id=self.dataset_id,
            entries=self.journal.load_entries(),
            delta_g=self.state.delta_g,
        )
        if replayed.eps_c != self.state.eps_c or replayed.delta_sum != self.state.delta_sum:
            raise JournalError(
                f"journal replay mismatch: eps_c {replayed.eps_c} vs {self.state.eps_c}"
            )

    def set_delta_g(self, delta_g) -> None:
        with self._lock:
            self.state = replace(self.state, delta_g=_decimal(delta_g, "delta_g"))

    def answer_query(
        self,
        query_id: str,
        query: Query,
        algorithm: str,
        seed: int,
        preference: MinMaxRatio | GroupMedianRatio | None = None,
        svt: SvtConfig | None = None,
        eps_svt: float | None = None,
        tau_var: float | None = None,
        sensitivity_override: float | None = None,
        precomputed: tuple[ProjectedDataset, PisTable] | None = None,
    ) -> Decision:
        """Truncate the grid, run the selected algorithm, charge on success.

        Rejections (exhausted grid, unsatisfied preference, evaluation errors)
        charge nothing: nothing is released, so the realized loss is zero.
        """
        if algorithm not in (ALG_RDR, ALG_SVT):
            raise ParameterError(f"unknown algorithm {algorithm!r}")
        with self._lock:
            if any(e.query_id == query_id for e in self.state.entries):
                raise OdometerError(f"query id {query_id!r} was already charged")
            if self.family.delta > 0 and self.state.delta_g is None:
                raise OdometerError(
                    "delta_g must be set before answering with a nonzero-delta mechanism"
                )

            truncated = truncate_grid(self.grid, self.state)
            if len(truncated) == 0:
                return self._rejected(query_id, algorithm, seed, "no candidates above eps_c", 0)

            stream = RngStream.from_seed(seed).child(query_id)
            try:
                if algorithm == ALG_RDR:
                    if preference is None:
                        raise ParameterError("the non-releasing route needs a ratio preference")
                    result = find_epsilon_from_rdr(
                        self.dataset,
                        query,
                        self.family,
                        truncated,
                        preference,
                        stream,
                        workers=self.workers,
                        sensitivity_override=sensitivity_override,
                        precomputed=precomputed,
                    )
                else:
                    cfg = svt
                    if cfg is None:
                        if eps_svt is None or tau_var is None:
                            raise ParameterError(
                                "the releasing route needs eps_svt and tau_var"
                            )
                        cfg = SvtConfig.for_rows(eps_svt, tau_var, self.dataset.n)
                    result = find_and_release_epsilon(
                        self.dataset,
                        query,
                        self.family,
                        truncated,
                        cfg,
                        stream,
                        workers=self.workers,
                        sensitivity_override=sensitivity_override,
                        precomputed=precomputed,
                    )
            except RiskscopeError as exc:
                if isinstance(exc, (OdometerError, ParameterError)):
                    raise
                return self._rejected(query_id, algorithm, seed, str(exc), len(truncated))

            if not result.found:
                return self._rejected(
                    query_id, algorithm, seed, "no suitable epsilon", len(truncated)
                )

            charged_eps, charged_delta = result.charged
            new_state = self.state.charge(query_id, charged_eps, charged_delta, algorithm)
            if self.journal is not None:
                self.journal.append(new_state.entries[-1])
            self.state = new_state
            return Decision(
                query_id=query_id,
                algorithm=algorithm,
                status="answered",
                reason=None,
                seed=seed,
                chosen_epsilon=result.chosen_epsilon,
                epsilon_released=result.epsilon_released,
                output_values=result.output.values,
                statistic=result.statistic,
                charged_eps=str(charged_eps),
                charged_delta=str(charged_delta),
                eps_c_after=str(new_state.eps_c),
                candidates_considered=len(truncated),
            )

    def _rejected(
        self, query_id: str, algorithm: str, seed: int, reason: str, considered: int
    ) -> Decision:
        return Decision(
            query_id=query_id,
            algorithm=algorithm,
            status="rejected",
            reason=reason,
            seed=seed,
            chosen_epsilon=None,
            epsilon_released=False,
            output_values=None,
            statistic=None,
            charged_eps="0",
            charged_delta="0",
            eps_c_after=str(self.state.eps_c),
            candidates_considered=considered,
        )
