"""HTTP facade: createBids/updateBids endpoints speaking the request wire format.

The service is a thin adapter over the library: request bodies go through
:func:`~bidsbuilder.request.parse_request`, results are the serialized
:class:`~bidsbuilder.dataset.DatasetReport`, and errors map onto a fixed
status table. No business logic lives here.
"""

from __future__ import annotations

from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool

from ._version import __version__
from .convert import ConverterHandle
from .dataset import DatasetReport, create_dataset, update_dataset
from .errors import (
    BodyTooLarge,
    Busy,
    ClassificationFailed,
    OutputNotEmpty,
    RequestError,
    SessionConflict,
    StateFileMissing,
    error_body,
)
from .request import parse_request

DEFAULT_BIND = "127.0.0.1:8080"
DEFAULT_MAX_BODY_BYTES = 1024 * 1024
DEFAULT_REQUEST_TIMEOUT_S = 3600.0


@dataclass
class ServiceConfig:
    converter: ConverterHandle
    parallelism: int = 1
    request_timeout_s: float = DEFAULT_REQUEST_TIMEOUT_S
    max_body_bytes: int = DEFAULT_MAX_BODY_BYTES
    ui_origin: str | None = None


def status_for(err: Exception) -> int:
    """The documented error-to-HTTP-status table."""
    if isinstance(err, RequestError):
        return 400
    if isinstance(err, StateFileMissing):
        return 404
    if isinstance(err, (OutputNotEmpty, SessionConflict, Busy)):
        return 409
    if isinstance(err, ClassificationFailed):
        return 422
    return 500


def _error_response(err: Exception) -> JSONResponse:
    return JSONResponse(error_body(err), status_code=status_for(err))


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="bidsbuilder", version=__version__)
    if config.ui_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[config.ui_origin],
            allow_methods=["POST", "GET"],
            allow_headers=["*"],
        )

    def run_operation(body: bytes, operation) -> JSONResponse:
        if len(body) > config.max_body_bytes:
            raise BodyTooLarge(
                f"request body exceeds the {config.max_body_bytes} byte limit"
            )
        req = parse_request(body)
        report: DatasetReport = operation(
            req,
            config.converter,
            parallelism=config.parallelism,
            timeout_s=config.request_timeout_s,
        )
        status = 201 if report.status == "created" else 200
        return JSONResponse(report.to_dict(), status_code=status)

    @app.post("/createBids")
    async def create_bids(request: Request) -> JSONResponse:
        body = await request.body()
        try:
            return await run_in_threadpool(run_operation, body, create_dataset)
        except Exception as err:
            return _error_response(err)

    @app.post("/updateBids")
    async def update_bids(request: Request) -> JSONResponse:
        body = await request.body()
        try:
            return await run_in_threadpool(run_operation, body, update_dataset)
        except Exception as err:
            return _error_response(err)

    @app.get("/health")
    async def health() -> dict:
        return {"status": "ok", "version": __version__}

    return app
