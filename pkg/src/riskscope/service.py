"""HTTP JSON service separating analyst and controller dataflows.

Analysts submit queries and, after the controller approves a release, read
noisy outputs. Controllers see per-instance sensitivities, per-candidate risk
statistics, and the odometer, and make the release decisions. Analyst-facing
payloads are built from an explicit allowlist; risk values, sensitivities,
raw outputs, and (for the non-releasing algorithm) the chosen epsilon never
appear in them, regardless of ticket state.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Depends, FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .errors import RiskscopeError
from .mechanisms import GAUSSIAN, LAPLACE, MechanismSpec
from .odometer import ALG_RDR, ALG_SVT, Journal, Session, truncate_grid
from .queries import Query, global_sensitivity, per_instance_sensitivity
from .reports import analysis_report, decision_report
from .search import EpsilonGrid, GroupMedianRatio, MinMaxRatio
from .tabular import Dataset, Schema, load_dataset, project_query_attributes

ROLE_ANALYST = "analyst"
ROLE_CONTROLLER = "controller"

SUBMITTED = "submitted"
ANALYZED = "analyzed"
ANSWERED = "answered"
REJECTED = "rejected"


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


@dataclass
class ServiceConfig:
    tokens: dict[str, str]
    data_dir: Path
    grid: EpsilonGrid = field(default_factory=EpsilonGrid.default37)
    host: str = "127.0.0.1"
    port: int = 8788
    workers: int = 1
    console_dir: Path | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        doc = json.loads(Path(path).read_text())
        grid_doc = doc.get("grid", "default37")
        if grid_doc == "default37":
            grid = EpsilonGrid.default37()
        else:
            grid = EpsilonGrid.from_values(grid_doc)
        console_dir = doc.get("console_dir")
        return cls(
            tokens=doc["tokens"],
            data_dir=Path(doc.get("data_dir", "riskscope-data")),
            grid=grid,
            host=doc.get("listen", {}).get("host", "127.0.0.1"),
            port=int(doc.get("listen", {}).get("port", 8788)),
            workers=int(doc.get("workers", 1)),
            console_dir=Path(console_dir) if console_dir else None,
        )


@dataclass
class Ticket:
    id: str
    dataset_id: str
    query: Query
    state: str = SUBMITTED
    analyst_view: dict | None = None
    decision: dict | None = None
    analysis_cache: dict = field(default_factory=dict)
    pis_cache: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass
class RegisteredDataset:
    id: str
    dataset: Dataset
    session: Session


def _mechanism_from_doc(doc: dict | None) -> MechanismSpec:
    doc = doc or {}
    family = doc.get("family", LAPLACE)
    delta = float(doc.get("delta", 0.0 if family == LAPLACE else 1e-5))
    # epsilon is chosen per answer; the template only carries family and delta
    return MechanismSpec(family=family, epsilon=1.0, delta=delta)


def _preference_from_doc(doc: dict) -> MinMaxRatio | GroupMedianRatio:
    kind = doc.get("type", "min_max_ratio")
    if kind == "min_max_ratio":
        return MinMaxRatio(tau_p=float(doc["tau_p"]))
    if kind == "group_median_ratio":
        groups = {name: tuple(rows) for name, rows in doc["groups"].items()}
        return GroupMedianRatio(groups=groups, tau_p=float(doc["tau_p"]))
    raise ApiError(422, "bad_preference", f"unknown preference type {kind!r}")


def analyst_payload(ticket: Ticket) -> dict:
    """Everything an analyst may ever see about a ticket. Allowlist only."""
    return {
        "ticket_id": ticket.id,
        "dataset_id": ticket.dataset_id,
        "state": ticket.state,
        "result": ticket.analyst_view,
    }


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="riskscope", docs_url=None, redoc_url=None)
    datasets: dict[str, RegisteredDataset] = {}
    tickets: dict[str, Ticket] = {}
    counters = {"dataset": 0, "ticket": 0}
    registry_lock = threading.Lock()

    config.data_dir.mkdir(parents=True, exist_ok=True)

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.exception_handler(RiskscopeError)
    async def handle_domain_error(request: Request, exc: RiskscopeError):
        return JSONResponse(
            status_code=422,
            content={"error": {"code": type(exc).__name__, "message": str(exc)}},
        )

    def role_of(request: Request) -> str:
        header = request.headers.get("authorization", "")
        if not header.startswith("Bearer "):
            raise ApiError(401, "unauthorized", "missing bearer token")
        role = config.tokens.get(header[len("Bearer "):])
        if role is None:
            raise ApiError(401, "unauthorized", "unknown token")
        return role

    def require(role: str):
        def guard(request: Request) -> str:
            actual = role_of(request)
            if actual != role:
                raise ApiError(403, "forbidden", f"this endpoint is {role}-only")
            return actual

        return Depends(guard)

    def get_dataset(dataset_id: str) -> RegisteredDataset:
        entry = datasets.get(dataset_id)
        if entry is None:
            raise ApiError(404, "not_found", f"unknown dataset {dataset_id!r}")
        return entry

    def get_ticket(ticket_id: str) -> Ticket:
        ticket = tickets.get(ticket_id)
        if ticket is None:
            raise ApiError(404, "not_found", f"unknown ticket {ticket_id!r}")
        return ticket

    async def read_json(request: Request) -> dict:
        try:
            doc = await request.json()
        except Exception:
            raise ApiError(400, "bad_request", "body must be JSON")
        if not isinstance(doc, dict):
            raise ApiError(400, "bad_request", "body must be a JSON object")
        return doc

    # -- datasets ---------------------------------------------------------

    @app.post("/datasets", status_code=201)
    async def register_dataset(request: Request, _: str = require(ROLE_CONTROLLER)):
        doc = await read_json(request)
        try:
            schema = Schema.from_json(doc["schema"])
            dataset = load_dataset(doc["csv"], schema)
        except KeyError as exc:
            raise ApiError(400, "bad_request", f"missing field {exc}")
        except RiskscopeError as exc:
            raise ApiError(400, "bad_dataset", str(exc))
        with registry_lock:
            counters["dataset"] += 1
            dataset_id = f"ds-{counters['dataset']}"
        session = Session(
            dataset_id=dataset_id,
            dataset=dataset,
            family=_mechanism_from_doc(doc.get("mechanism")),
            grid=config.grid,
            journal=Journal(config.data_dir / f"{dataset_id}.jsonl"),
            delta_g=doc.get("delta_g"),
            workers=config.workers,
        )
        datasets[dataset_id] = RegisteredDataset(id=dataset_id, dataset=dataset, session=session)
        return {"dataset_id": dataset_id, "n": dataset.n}

    # -- tickets ----------------------------------------------------------

    @app.post("/queries", status_code=201)
    async def submit_query(request: Request, _: str = require(ROLE_ANALYST)):
        doc = await read_json(request)
        dataset_id = doc.get("dataset_id")
        entry = get_dataset(dataset_id)
        try:
            query = Query.from_json(doc.get("query")).validated(entry.dataset.schema)
        except RiskscopeError as exc:
            raise ApiError(422, "bad_query", str(exc))
        with registry_lock:
            counters["ticket"] += 1
            ticket_id = f"t-{counters['ticket']}"
        tickets[ticket_id] = Ticket(id=ticket_id, dataset_id=dataset_id, query=query)
        return {"ticket_id": ticket_id, "state": SUBMITTED}

    @app.get("/queries/{ticket_id}")
    async def ticket_status(ticket_id: str, request: Request):
        role = role_of(request)
        ticket = get_ticket(ticket_id)
        if role == ROLE_ANALYST:
            return analyst_payload(ticket)
        return {
            "ticket_id": ticket.id,
            "dataset_id": ticket.dataset_id,
            "state": ticket.state,
            "query": ticket.query.to_json(),
            "decision": ticket.decision,
        }

    def pis_for_ticket(ticket: Ticket, entry: RegisteredDataset):
        family = entry.session.family
        cached = ticket.pis_cache.get(family.norm)
        if cached is None:
            projection = project_query_attributes(entry.dataset, ticket.query)
            pis = per_instance_sensitivity(
                projection, ticket.query, family.norm, config.workers
            )
            cached = (projection, pis)
            ticket.pis_cache[family.norm] = cached
        return cached

    @app.get("/queries/{ticket_id}/analysis")
    async def ticket_analysis(ticket_id: str, _: str = require(ROLE_CONTROLLER)):
        ticket = get_ticket(ticket_id)
        entry = get_dataset(ticket.dataset_id)
        session = entry.session
        eps_c = session.state.eps_c
        cache_key = (str(eps_c), session.family.family, session.family.delta)
        report = ticket.analysis_cache.get(cache_key)
        if report is None:
            truncated = truncate_grid(config.grid, session.state)
            projection, pis = pis_for_ticket(ticket, entry)
            sensitivity = global_sensitivity(
                ticket.query, entry.dataset.schema, entry.dataset.n, session.family.norm
            )
            report = analysis_report(
                query=ticket.query,
                family=session.family,
                grid=truncated,
                pis=pis,
                sensitivity=sensitivity,
                dataset_id=entry.id,
                eps_c=eps_c,
            )
            ticket.analysis_cache[cache_key] = report
        if ticket.state == SUBMITTED:
            ticket.state = ANALYZED
        return report

    @app.post("/queries/{ticket_id}/answer")
    async def answer_ticket(
        ticket_id: str, request: Request, _: str = require(ROLE_CONTROLLER)
    ):
        doc = await read_json(request)
        ticket = get_ticket(ticket_id)
        entry = get_dataset(ticket.dataset_id)
        with ticket.lock:
            if ticket.state in (ANSWERED, REJECTED):
                raise ApiError(409, "already_decided", f"ticket is {ticket.state}")
            algorithm = doc.get("algorithm", ALG_RDR)
            seed = int(doc.get("seed", 0))
            kwargs = {}
            if algorithm == ALG_RDR:
                kwargs["preference"] = _preference_from_doc(doc.get("preference", {}))
            elif algorithm == ALG_SVT:
                kwargs["eps_svt"] = float(doc.get("eps_svt", 1.0))
                kwargs["tau_var"] = float(doc.get("tau_var", 1e-5))
            else:
                raise ApiError(422, "bad_algorithm", f"unknown algorithm {algorithm!r}")
            kwargs["precomputed"] = pis_for_ticket(ticket, entry)

            # The charge is journaled inside answer_query, before any analyst
            # view exists; a crash after the journal write loses the release,
            # never the accounting.
            decision = entry.session.answer_query(
                ticket.id, ticket.query, algorithm, seed, **kwargs
            )

            if decision.answered:
                result: dict = {"values": list(decision.output_values)}
                if decision.epsilon_released:
                    result["epsilon"] = decision.chosen_epsilon
                ticket.analyst_view = result
                ticket.state = ANSWERED
            else:
                ticket.analyst_view = None
                ticket.state = REJECTED
            ticket.decision = decision_report(decision, dataset_id=entry.id)
        return {"state": ticket.state, "decision": ticket.decision}

    # -- odometer ---------------------------------------------------------

    @app.get("/odometer/{dataset_id}")
    async def odometer_state(dataset_id: str, _: str = require(ROLE_CONTROLLER)):
        entry = get_dataset(dataset_id)
        state = entry.session.state
        bound = state.comp_bound()
        return {
            "dataset_id": dataset_id,
            "eps_c": str(state.eps_c),
            "delta_sum": str(state.delta_sum),
            "delta_g": str(state.delta_g) if state.delta_g is not None else None,
            "comp_bound": "infinity" if bound.is_infinite() else str(bound),
            "entries": [
                {
                    "query_id": e.query_id,
                    "eps": str(e.eps),
                    "delta": str(e.delta),
                    "alg": e.algorithm,
                    "ts": e.ts,
                }
                for e in state.entries
            ],
        }

    @app.get("/health")
    async def health():
        return {"status": "ok"}

    if config.console_dir is not None and config.console_dir.is_dir():
        app.mount(
            "/console",
            StaticFiles(directory=str(config.console_dir), html=True),
            name="console",
        )

    return app
