"""Machine-readable report assembly (versioned, byte-stable under a fixed seed).

Reports are controller-side artifacts: they carry per-candidate risk
statistics and sensitivity summaries. Analyst payloads are built elsewhere
and never from these dicts.
"""

from __future__ import annotations

import json
from decimal import Decimal

from .mechanisms import MechanismSpec
from .odometer import Decision
from .queries import PisTable, Query
from .rdr import pis_summary, profile_stats, rdr_profile
from .search import EpsilonGrid

REPORT_VERSION = 1


def canonical_json(doc: dict) -> str:
    """Stable serialization: sorted keys, fixed separators, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def analysis_report(
    query: Query,
    family: MechanismSpec,
    grid: EpsilonGrid,
    pis: PisTable,
    sensitivity: float,
    dataset_id: str | None = None,
    eps_c: Decimal | None = None,
) -> dict:
    """Per-candidate risk statistics over an (already truncated) grid."""
    rows = [
        profile_stats(rdr_profile(pis, family.with_epsilon(eps), query.k, sensitivity))
        for eps in grid.values
    ]
    return {
        "report_version": REPORT_VERSION,
        "kind": "analysis",
        "dataset_id": dataset_id,
        "query": query.to_json(),
        "mechanism": {"family": family.family, "delta": family.delta},
        "sensitivity": sensitivity,
        "eps_c": str(eps_c) if eps_c is not None else "0",
        "candidates": list(grid.values),
        "no_candidates": len(grid) == 0,
        "pis_summary": pis_summary(pis),
        "rows": rows,
    }


def decision_report(decision: Decision, dataset_id: str | None = None) -> dict:
    doc = {
        "report_version": REPORT_VERSION,
        "kind": "decision",
        "dataset_id": dataset_id,
        "query_id": decision.query_id,
        "algorithm": decision.algorithm,
        "status": decision.status,
        "reason": decision.reason,
        "seed": decision.seed,
        "chosen_epsilon": decision.chosen_epsilon,
        "epsilon_released": decision.epsilon_released,
        "output": list(decision.output_values) if decision.output_values is not None else None,
        "statistic": decision.statistic,
        "charged_eps": decision.charged_eps,
        "charged_delta": decision.charged_delta,
        "eps_c_after": decision.eps_c_after,
        "candidates_considered": decision.candidates_considered,
    }
    return doc
