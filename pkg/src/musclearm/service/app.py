"""FastAPI service wrapping the experiment pipeline.

Stages run synchronously inside the request and write their artifacts
under the requested output directory, so a long-lived server can host
many experiment directories and serve model queries against them. The
CLI uses the same handlers in-process.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import ValidationError

from .. import __version__, experiment
from ..goalspace import DegenerateInput
from .schemas import (
    AbundanceRequest,
    EvaluateRequest,
    HealthResponse,
    PredictRequest,
    PredictResponse,
    StageRequest,
    StageResponse,
)

# stable application error codes, also used as CLI exit codes
CODE_CONFIG = 2
CODE_DEGENERATE_HULL = 3
CODE_MISSING_ARTIFACT = 4
CODE_GOAL_OUTSIDE = 5


def _error(status: int, code: int, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, "message": message})


def _run(stage: str, fn, request, **kwargs) -> StageResponse:
    try:
        summary = fn(request.config, request.out_dir, **kwargs)
    except DegenerateInput as exc:
        raise _error(422, CODE_DEGENERATE_HULL, str(exc))
    except experiment.GoalOutsideCut as exc:
        raise _error(422, CODE_GOAL_OUTSIDE, str(exc))
    except experiment.MissingArtifact as exc:
        raise _error(409, CODE_MISSING_ARTIFACT, str(exc))
    except (ValidationError, ValueError) as exc:
        raise _error(422, CODE_CONFIG, str(exc))
    return StageResponse(
        stage=stage,
        config_hash=summary["metadata"]["config_hash"],
        seed=summary["metadata"]["seed"],
        summary={k: v for k, v in summary.items() if k not in ("files", "metadata")},
        files=summary.get("files", []),
    )


def create_app() -> FastAPI:
    app = FastAPI(title="musclearm", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/goalspace", response_model=StageResponse)
    def goalspace(request: StageRequest) -> StageResponse:
        return _run("goalspace", experiment.run_goalspace, request)

    @app.post("/learn", response_model=StageResponse)
    def learn(request: StageRequest) -> StageResponse:
        return _run("learn", experiment.run_learn, request)

    @app.post("/evaluate", response_model=StageResponse)
    def evaluate(request: EvaluateRequest) -> StageResponse:
        return _run("evaluate", experiment.run_evaluate, request, use_feedback=request.use_feedback)

    @app.post("/abundance", response_model=StageResponse)
    def abundance(request: AbundanceRequest) -> StageResponse:
        return _run("abundance", experiment.run_abundance, request, goal_ids=request.goal_ids)

    @app.post("/cma-bench", response_model=StageResponse)
    def cma_bench(request: StageRequest) -> StageResponse:
        return _run("cma-bench", experiment.run_cma_bench, request)

    @app.post("/predict", response_model=PredictResponse)
    def predict(request: PredictRequest) -> PredictResponse:
        try:
            model = experiment._load_model(Path(request.out_dir))
        except experiment.MissingArtifact as exc:
            raise _error(409, CODE_MISSING_ARTIFACT, str(exc))
        pressures = model.predict(request.goal)
        return PredictResponse(
            goal=request.goal, pressures=[float(v) for v in pressures], units=model.n_units
        )

    return app


app = create_app()
