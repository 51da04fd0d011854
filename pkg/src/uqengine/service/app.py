"""HTTP service wrapping the engine: submit runs, poll status, fetch results."""

from __future__ import annotations

import tempfile
from pathlib import Path

from fastapi import FastAPI, HTTPException

import uqengine
from uqengine.config import ConfigError, config_parse_text
from uqengine.core import Sandbox, rng_for
from uqengine.engine import Engine
from uqengine.io import Status, synthesize
from uqengine.models.base import initial_resolve
from uqengine.models.testing import run_model_checks
from uqengine.service.jobs import JobRegistry
from uqengine.service.schemas import (
    HealthResponse,
    ModelTestRequest,
    ModelTestResponse,
    ParametersResponse,
    ReportResponse,
    RunCreated,
    RunList,
    RunRequest,
    RunStatus,
    SynthesizeRequest,
    SynthesizeResponse,
)

__all__ = ["create_app"]


def _status_of(job) -> RunStatus:
    return RunStatus(
        id=job.id,
        mode=job.mode,
        state=job.state,
        created=job.created,
        finished=job.finished,
        error=job.error,
        outputdir=job.outputdir,
        summary=job.summary,
    )


def create_app(workdir: str | Path | None = None) -> FastAPI:
    if workdir is None:
        workdir = Path(tempfile.mkdtemp(prefix="uq-service-"))
    else:
        workdir = Path(workdir)
        workdir.mkdir(parents=True, exist_ok=True)
    registry = JobRegistry(workdir)
    app = FastAPI(title="uqengine service", version=uqengine.__version__)
    app.state.registry = registry
    app.state.workdir = workdir

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=uqengine.__version__)

    @app.post("/runs", response_model=RunCreated, status_code=201)
    def submit_run(request: RunRequest) -> RunCreated:
        try:
            job = registry.submit(
                request.config,
                request.mode,
                seed=request.seed,
                outputdir=request.outputdir,
                serial=request.serial,
            )
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return RunCreated(id=job.id, state=job.state)

    @app.get("/runs", response_model=RunList)
    def list_runs() -> RunList:
        return RunList(runs=[_status_of(job) for job in registry.list()])

    @app.get("/runs/{run_id}", response_model=RunStatus)
    def run_status(run_id: str) -> RunStatus:
        job = registry.get(run_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no such run: {run_id}")
        return _status_of(job)

    @app.delete("/runs/{run_id}", status_code=204)
    def remove_run(run_id: str) -> None:
        if not registry.remove(run_id):
            raise HTTPException(
                status_code=409, detail="run is missing or still executing"
            )

    @app.get("/runs/{run_id}/parameters", response_model=ParametersResponse)
    def run_parameters(run_id: str) -> ParametersResponse:
        job = registry.get(run_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no such run: {run_id}")
        if job.state != "done":
            raise HTTPException(status_code=409, detail=f"run is {job.state}")
        status = Status(job.outputdir)
        table = status.parameters
        return ParametersResponse(
            labels=status.labels,
            columns=list(table.columns),
            rows=table.to_numpy(dtype=float).tolist(),
        )

    @app.get("/runs/{run_id}/report", response_model=ReportResponse)
    def run_report(run_id: str) -> ReportResponse:
        job = registry.get(run_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no such run: {run_id}")
        if job.state != "done":
            raise HTTPException(status_code=409, detail=f"run is {job.state}")
        config = config_parse_text((workdir / run_id / "run.cfg").read_text(),
                                   basedir=workdir / run_id)
        config.outputdir = job.outputdir
        engine = Engine(config)
        result = engine.run("report")
        return ReportResponse(
            batches=result["batches"],
            burnin=result["burnin"],
            acceptance=result["acceptance"],
            ess=result["ess"],
            thin=result["thin"],
            metrics=result["metrics"],
            qq_slope=result["qq_slope"],
            report=result["report"],
        )

    @app.post("/synthesize", response_model=SynthesizeResponse)
    def synthesize_dataset(request: SynthesizeRequest) -> SynthesizeResponse:
        scratch = Path(tempfile.mkdtemp(prefix="uq-synthesize-", dir=workdir))
        try:
            config = config_parse_text(request.config, basedir=scratch)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if request.seed is not None:
            config.seed = request.seed
        snapshots = config.synthesize.get("snapshots")
        if not snapshots:
            raise HTTPException(status_code=400, detail="synthesize.snapshots required")
        engine = Engine(config)
        parameters = engine._test_parameters()
        initial, _ = initial_resolve(
            engine.build_initial(), parameters, rng_for([config.seed, 1])
        )
        error = engine.build_error(engine._synthesis_labels())
        exact, observed = synthesize(
            engine.model_factory(), parameters, snapshots,
            error=error, initial=initial, seed=config.seed,
            sandbox=Sandbox(scratch / "sandbox"),
        )
        return SynthesizeResponse(
            parameters={k: float(v) for k, v in parameters.items()},
            predictions=exact.to_frame().to_csv(sep=" ", index=False, na_rep="NA"),
            dataset=(
                observed.to_frame().to_csv(sep=" ", index=False, na_rep="NA")
                if observed is not None
                else None
            ),
        )

    @app.post("/models/test", response_model=ModelTestResponse)
    def model_test(request: ModelTestRequest) -> ModelTestResponse:
        scratch = Path(tempfile.mkdtemp(prefix="uq-test-", dir=workdir))
        try:
            config = config_parse_text(request.config, basedir=scratch)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if request.seed is not None:
            config.seed = request.seed
        engine = Engine(config)
        parameters = engine._test_parameters()
        initial, _ = initial_resolve(
            engine.build_initial(), parameters, rng_for([config.seed, 1])
        )
        try:
            times = engine._test_times()
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        reports = run_model_checks(
            engine.model_factory(), initial, parameters, times,
            Sandbox(scratch / "sandbox"), seed=config.seed,
        )
        checks = {r.name: r.passed for r in reports}
        return ModelTestResponse(passed=all(checks.values()), checks=checks)

    return app
