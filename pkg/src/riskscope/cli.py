"""Batch front-end: analyses, selection runs, session replay, fixtures, benchmarks.

Reports go to stdout or --report as versioned JSON; nothing is plotted
in-process. Exit codes: 0 success (including a no-suitable-epsilon decision),
2 usage, 3 data or config error, 4 internal error.
"""

from __future__ import annotations

import csv
import json
import sys
import time
from decimal import Decimal
from pathlib import Path

import click

from .errors import RiskscopeError
from .mechanisms import GAUSSIAN, LAPLACE, MechanismSpec, RngStream
from .odometer import ALG_RDR, ALG_SVT, Journal, OdometerState, Session
from .queries import Query, global_sensitivity, per_instance_sensitivity
from .reports import REPORT_VERSION, analysis_report, canonical_json, decision_report
from .search import (
    EpsilonGrid,
    GroupMedianRatio,
    MinMaxRatio,
    SvtConfig,
    find_and_release_epsilon,
    find_epsilon_from_rdr,
)
from .tabular import Schema, load_dataset, project_query_attributes
from . import fixtures as fx

EXIT_DATA_ERROR = 3
EXIT_INTERNAL = 4


@click.group()
def main():
    """Risk-profile-driven differentially private query answering."""


def run(func):
    """Map domain errors to exit 3 and anything unexpected to exit 4."""
    try:
        func()
    except click.ClickException:
        raise
    except (RiskscopeError, FileNotFoundError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA_ERROR)
    except Exception as exc:  # pragma: no cover - defensive
        click.echo(f"internal error: {exc}", err=True)
        sys.exit(EXIT_INTERNAL)


def load_inputs(data_path, schema_path, query_path):
    schema = Schema.from_json(Path(schema_path).read_text())
    dataset = load_dataset(Path(data_path).read_text(), schema)
    query = Query.from_json(json.loads(Path(query_path).read_text())).validated(schema)
    return dataset, query


def load_grid(grid_opt: str) -> EpsilonGrid:
    if grid_opt == "default37":
        return EpsilonGrid.default37()
    return EpsilonGrid.from_json(Path(grid_opt).read_text())


def mechanism_template(mechanism: str, delta: float) -> MechanismSpec:
    if mechanism == GAUSSIAN and delta == 0.0:
        delta = 1e-5
    return MechanismSpec(family=mechanism, epsilon=1.0, delta=delta)


def emit(doc: dict, report_path: str | None):
    text = canonical_json(doc)
    if report_path:
        Path(report_path).write_text(text)
    click.echo(text, nl=False)


data_opt = click.option("--data", required=True, help="dataset CSV path")
schema_opt = click.option("--schema", required=True, help="schema sidecar JSON path")
query_opt = click.option("--query", "query_path", required=True, help="query JSON path")
grid_opt = click.option("--grid", default="default37", show_default=True,
                        help='"default37" or a JSON file with grid values')
mechanism_opt = click.option("--mechanism", type=click.Choice([LAPLACE, GAUSSIAN]),
                             default=LAPLACE, show_default=True)
delta_opt = click.option("--delta", type=float, default=0.0,
                         help="failure parameter (Gaussian defaults to 1e-5)")
workers_opt = click.option("--workers", type=int, default=1, show_default=True)
override_opt = click.option("--sensitivity-override", type=float, default=None,
                            help="replace the derived global sensitivity")
report_opt = click.option("--report", "report_path", default=None,
                          help="also write the JSON report to this file")


@main.command()
@data_opt
@schema_opt
@query_opt
@grid_opt
@mechanism_opt
@delta_opt
@workers_opt
@override_opt
@report_opt
def analyze(data, schema, query_path, grid, mechanism, delta, workers,
            sensitivity_override, report_path):
    """Per-candidate risk statistics for one query (controller-side)."""

    def go():
        dataset, query = load_inputs(data, schema, query_path)
        family = mechanism_template(mechanism, delta)
        projection = project_query_attributes(dataset, query)
        pis = per_instance_sensitivity(projection, query, family.norm, workers)
        sensitivity = global_sensitivity(
            query, dataset.schema, dataset.n, family.norm, override=sensitivity_override
        )
        emit(
            analysis_report(
                query=query,
                family=family,
                grid=load_grid(grid),
                pis=pis,
                sensitivity=sensitivity,
            ),
            report_path,
        )

    run(go)


@main.command("find-eps")
@data_opt
@schema_opt
@query_opt
@click.option("--algorithm", type=click.Choice([ALG_RDR, ALG_SVT]), default=ALG_RDR,
              show_default=True)
@click.option("--tau-p", type=float, default=0.95, show_default=True)
@click.option("--tau-var", type=float, default=1e-5, show_default=True)
@click.option("--eps-svt", type=float, default=1.0, show_default=True)
@grid_opt
@mechanism_opt
@delta_opt
@click.option("--seed", type=int, default=0, show_default=True)
@workers_opt
@override_opt
@report_opt
def find_eps(data, schema, query_path, algorithm, tau_p, tau_var, eps_svt, grid,
             mechanism, delta, seed, workers, sensitivity_override, report_path):
    """Run one selection end to end and print the decision record."""

    def go():
        dataset, query = load_inputs(data, schema, query_path)
        family = mechanism_template(mechanism, delta)
        stream = RngStream.from_seed(seed).child("find-eps")
        if algorithm == ALG_RDR:
            result = find_epsilon_from_rdr(
                dataset, query, family, load_grid(grid), MinMaxRatio(tau_p), stream,
                workers=workers, sensitivity_override=sensitivity_override,
            )
        else:
            cfg = SvtConfig.for_rows(eps_svt, tau_var, dataset.n)
            result = find_and_release_epsilon(
                dataset, query, family, load_grid(grid), cfg, stream,
                workers=workers, sensitivity_override=sensitivity_override,
            )
        emit(
            {
                "report_version": REPORT_VERSION,
                "kind": "decision",
                "algorithm": algorithm,
                "status": result.status,
                "chosen_epsilon": result.chosen_epsilon,
                "epsilon_released": result.epsilon_released,
                "output": list(result.output.values) if result.output else None,
                "statistic": result.statistic,
                "charged_eps": str(result.charged[0]),
                "charged_delta": str(result.charged[1]),
                "seed": seed,
                "mechanism": {"family": family.family, "delta": family.delta},
            },
            report_path,
        )

    run(go)


@main.group()
def session():
    """Multi-query odometer sessions."""


@session.command()
@data_opt
@schema_opt
@click.option("--script", required=True, help="JSON list of answer requests")
@click.option("--journal", "journal_path", required=True, help="charge journal path")
@grid_opt
@mechanism_opt
@delta_opt
@click.option("--delta-g", default=None, help="global delta budget (decimal string)")
@workers_opt
@report_opt
def replay(data, schema, script, journal_path, grid, mechanism, delta, delta_g,
           workers, report_path):
    """Apply scripted (query, preference) pairs through the odometer."""

    def go():
        schema_obj = Schema.from_json(Path(schema).read_text())
        dataset = load_dataset(Path(data).read_text(), schema_obj)
        requests = json.loads(Path(script).read_text())
        if not isinstance(requests, list):
            raise click.ClickException("--script must hold a JSON list")
        sess = Session(
            dataset_id=Path(data).stem,
            dataset=dataset,
            family=mechanism_template(mechanism, delta),
            grid=load_grid(grid),
            journal=Journal(journal_path),
            delta_g=delta_g,
            workers=workers,
        )
        decisions = []
        for i, req in enumerate(requests):
            query = Query.from_json(req["query"]).validated(schema_obj)
            algorithm = req.get("algorithm", ALG_RDR)
            kwargs = {}
            if algorithm == ALG_RDR:
                pref = req.get("preference", {})
                if "groups" in pref:
                    kwargs["preference"] = GroupMedianRatio(
                        groups={k: tuple(v) for k, v in pref["groups"].items()},
                        tau_p=float(pref["tau_p"]),
                    )
                else:
                    kwargs["preference"] = MinMaxRatio(float(pref.get("tau_p", 0.95)))
            else:
                kwargs["eps_svt"] = float(req.get("eps_svt", 1.0))
                kwargs["tau_var"] = float(req.get("tau_var", 1e-5))
            decision = sess.answer_query(
                req.get("id", f"q-{i + 1}"),
                query,
                algorithm,
                int(req.get("seed", i)),
                **kwargs,
            )
            decisions.append(decision_report(decision, dataset_id=sess.dataset_id))
        state = sess.state
        bound = state.comp_bound()
        emit(
            {
                "report_version": REPORT_VERSION,
                "kind": "session",
                "decisions": decisions,
                "odometer": {
                    "eps_c": str(state.eps_c),
                    "delta_sum": str(state.delta_sum),
                    "comp_bound": "infinity" if bound.is_infinite() else str(bound),
                    "entries": len(state.entries),
                },
            },
            report_path,
        )

    run(go)


@main.group()
def odometer():
    """Inspect charge journals."""


@odometer.command()
@click.option("--journal", "journal_path", required=True)
@click.option("--delta-g", default=None, help="global delta budget (decimal string)")
def show(journal_path, delta_g):
    """Recompute and print the running totals from a journal."""

    def go():
        state = OdometerState(
            dataset_id=Path(journal_path).stem,
            entries=Journal(journal_path).load_entries(),
            delta_g=None if delta_g is None else Decimal(delta_g),
        )
        bound = state.comp_bound()
        emit(
            {
                "report_version": REPORT_VERSION,
                "kind": "odometer",
                "dataset_id": state.dataset_id,
                "eps_c": str(state.eps_c),
                "delta_sum": str(state.delta_sum),
                "comp_bound": "infinity" if bound.is_infinite() else str(bound),
                "entries": [
                    {"query_id": e.query_id, "eps": str(e.eps), "delta": str(e.delta),
                     "alg": e.algorithm, "ts": e.ts}
                    for e in state.entries
                ],
            },
            None,
        )

    run(go)


@main.group()
def fixtures():
    """Generate the bundled example datasets."""


def _parse_sizes(raw: str) -> list[int]:
    sizes = []
    for part in raw.split(","):
        part = part.strip().lower()
        factor = 1
        if part.endswith("k"):
            factor, part = 1000, part[:-1]
        elif part.endswith("m"):
            factor, part = 1_000_000, part[:-1]
        sizes.append(int(float(part) * factor))
    return sizes


@fixtures.command()
@click.option("--out", "out_dir", required=True, help="output directory")
@click.option("--sizes", default="1k,10k", show_default=True,
              help="comma-separated census-style dataset sizes (supports k/m)")
@click.option("--seed", type=int, default=7, show_default=True)
def gen(out_dir, sizes, seed):
    """Write the patient fixture plus census-style CSVs at the given sizes."""

    def go():
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "patient.csv").write_text(fx.patient_csv())
        (out / "patient.schema.json").write_text(
            canonical_json(fx.PATIENT_SCHEMA.to_json())
        )
        (out / "patient.query.json").write_text(
            canonical_json(fx.patient_count_query().to_json())
        )
        (out / "adult.schema.json").write_text(canonical_json(fx.ADULT_SCHEMA.to_json()))
        for name, query in fx.benchmark_queries().items():
            (out / f"{name}.query.json").write_text(canonical_json(query.to_json()))
        written = []
        for n in _parse_sizes(sizes):
            path = out / f"adult_{n}.csv"
            fx.dataset_to_csv_file(fx.adult_style_dataset(n, seed=seed), path)
            written.append({"path": str(path), "rows": n})
        emit({"report_version": REPORT_VERSION, "kind": "fixtures", "written": written}, None)

    run(go)


@main.command()
@click.option("--sizes", default="1000,10000,100000", show_default=True)
@click.option("--workers", default="1,8", show_default=True,
              help="comma-separated worker counts")
@click.option("--runs", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out", "out_path", default=None, help="CSV output path (default stdout)")
def bench(sizes, workers, runs, seed, out_path):
    """Time per-instance sensitivity across sizes and worker counts."""

    def go():
        query = fx.scaling_query()
        rows = [("size", "unique_records", "workers", "run", "seconds")]
        for n in _parse_sizes(sizes):
            dataset = fx.adult_style_dataset(n, seed=seed)
            checked = query.validated(dataset.schema)
            projection = project_query_attributes(dataset, checked)
            for w in (int(x) for x in workers.split(",")):
                for r in range(runs):
                    start = time.perf_counter()
                    per_instance_sensitivity(projection, checked, "l1", w)
                    rows.append(
                        (n, projection.unique_count, w, r, round(time.perf_counter() - start, 6))
                    )
        if out_path:
            with open(out_path, "w", newline="") as fh:
                csv.writer(fh).writerows(rows)
        else:
            writer = csv.writer(sys.stdout)
            writer.writerows(rows)

    run(go)


@main.command()
@click.option("--config", "config_path", required=True, help="service config JSON")
def serve(config_path):
    """Run the HTTP service."""

    def go():
        import uvicorn

        from .service import ServiceConfig, create_app

        config = ServiceConfig.from_file(config_path)
        uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="warning")

    run(go)


if __name__ == "__main__":
    main()
