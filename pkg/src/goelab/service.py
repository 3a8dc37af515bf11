"""FastAPI service exposing the experiment commands.

Run with:  uvicorn goelab.service:app

Responses use the same envelope as the CLI JSON reports; sample dumps
stream back as text/csv.  Statistical failures are still HTTP 200 (the
verdict lives in the report); only invalid requests return 4xx.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse

from goelab import __version__
from goelab.runner import ConfigError, dispatch
from goelab.schemas import (
    CharacterizeRequest,
    IdentitiesRequest,
    ProbeCfRequest,
    ReportEnvelope,
    SampleRequest,
    VerifyForwardRequest,
)

app = FastAPI(
    title="goelab",
    version=__version__,
    description="Random-matrix invariance testing and affine-GOE characterization.",
)


def _run(request) -> ReportEnvelope:
    try:
        _, envelope, _ = dispatch(request.to_run_config())
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None
    return ReportEnvelope(**envelope)


@app.get("/v1/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/v1/identities", response_model=ReportEnvelope)
def identities(req: IdentitiesRequest) -> ReportEnvelope:
    return _run(req)


@app.post("/v1/verify-forward", response_model=ReportEnvelope)
def verify_forward(req: VerifyForwardRequest) -> ReportEnvelope:
    return _run(req)


@app.post("/v1/characterize", response_model=ReportEnvelope)
def characterize_endpoint(req: CharacterizeRequest) -> ReportEnvelope:
    return _run(req)


@app.post("/v1/probe-cf", response_model=ReportEnvelope)
def probe_cf(req: ProbeCfRequest) -> ReportEnvelope:
    return _run(req)


@app.post("/v1/sample", response_class=PlainTextResponse)
def sample(req: SampleRequest) -> PlainTextResponse:
    try:
        _, _, csv_text = dispatch(req.to_run_config())
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None
    return PlainTextResponse(csv_text, media_type="text/csv")
