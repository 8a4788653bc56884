"""FastAPI application exposing SLE sampling and the warning example over HTTP."""
import logging
import uuid
from contextlib import asynccontextmanager
from typing import List

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import Response
from pydantic import BaseModel, Field

from loewnerlab import __version__
from loewnerlab.config import config
from loewnerlab.errors import InvalidInputError, LabError
from loewnerlab.experiments import run_warning_example
from loewnerlab.loewner import sample_sle, trace_in_disc
from loewnerlab.render import render_svg

# Configure logging
logging.basicConfig(
    level=getattr(logging, config.LOG_LEVEL.upper(), logging.INFO),
    format="%(asctime)s [%(levelname)s] %(name)s - %(message)s",
)
logger = logging.getLogger(__name__)

MAX_STEPS = 200_000


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Lifespan context manager for startup/shutdown."""
    logger.info("Starting loewnerlab service")
    try:
        config.validate()
        logger.info("Configuration validated successfully")
    except ValueError as e:
        logger.error(f"Configuration validation failed: {e}")
        raise
    yield
    logger.info("Shutting down loewnerlab service")


app = FastAPI(
    title="loewnerlab",
    description="Loewner chains, SLE traces and conformal-map experiments",
    version=__version__,
    lifespan=lifespan,
)


class SleRequest(BaseModel):
    """Request body for sampling an SLE trace."""

    kappa: float = Field(..., ge=0, lt=8)
    T: float = Field(1.0, gt=0)
    dt: float = Field(1e-3, gt=0)
    seed: int
    disc: bool = False


class WarningRequest(BaseModel):
    """Request body for the twist-map warning example."""

    alpha: float = Field(1.0, ge=0)
    n_values: List[int] = Field(default_factory=lambda: [16, 32, 64, 128, 256])


@app.middleware("http")
async def add_request_id(request: Request, call_next):
    """Add request_id to all requests for logging."""
    request_id = str(uuid.uuid4())
    request.state.request_id = request_id
    logger.info(f"[{request_id}] {request.method} {request.url.path}")

    response = await call_next(request)
    response.headers["X-Request-ID"] = request_id
    return response


def _http_error(request_id: str, what: str, e: Exception) -> HTTPException:
    logger.error(f"[{request_id}] {what} failed: {e}", exc_info=True)
    if isinstance(e, InvalidInputError):
        return HTTPException(status_code=422, detail=str(e))
    return HTTPException(status_code=500, detail=f"{what} failed: {e}")


@app.get("/")
async def root():
    """Service description."""
    return {"service": "loewnerlab", "status": "healthy", "version": __version__}


@app.get("/health")
async def health():
    """Kubernetes health check endpoint."""
    return {"status": "ok"}


@app.post("/sle")
def sle(body: SleRequest, request: Request):
    """Sample an SLE(kappa) trace with its driving function."""
    request_id = getattr(request.state, "request_id", "unknown")
    logger.info(f"[{request_id}] SLE kappa={body.kappa} T={body.T} dt={body.dt} seed={body.seed}")
    if body.T / body.dt > MAX_STEPS:
        raise HTTPException(status_code=422, detail=f"T/dt exceeds {MAX_STEPS} steps")
    try:
        hull = sample_sle(body.kappa, body.T, body.dt, body.seed)
        if body.disc:
            curve = trace_in_disc(hull)
            t, z = curve.t, curve.z
        else:
            t, z = hull.times, hull.tips
    except LabError as e:
        raise _http_error(request_id, "SLE sampling", e)
    return {
        "kappa": body.kappa,
        "seed": body.seed,
        "t": t.tolist(),
        "trace": [[float(p.real), float(p.imag)] for p in z],
        "driving": {"t": hull.driving.t.tolist(), "w": hull.driving.w.tolist()},
    }


@app.post("/warning")
def warning(body: WarningRequest, request: Request):
    """Rows of the twist-map warning example."""
    request_id = getattr(request.state, "request_id", "unknown")
    logger.info(f"[{request_id}] Warning example alpha={body.alpha} n={body.n_values}")
    try:
        report = run_warning_example(body.n_values, body.alpha)
    except LabError as e:
        raise _http_error(request_id, "Warning example", e)
    return {"rows": report.rows, "summary": report.summary, "config_hash": report.provenance["config_hash"]}


@app.get("/warning/preview")
def warning_preview(
    request: Request,
    alpha: float = Query(1.0, description="Twist angle"),
    n: int = Query(16, description="Resolution of the twist ring"),
):
    """SVG plot of γ^{(n)}, the diameter and the limit curve."""
    request_id = getattr(request.state, "request_id", "unknown")
    try:
        report = run_warning_example([n], alpha)
    except LabError as e:
        raise _http_error(request_id, "Warning preview", e)
    svg = render_svg(report.curves, title=f"twist alpha={alpha}, n={n}")
    logger.info(f"[{request_id}] Preview generated successfully")
    return Response(content=svg, media_type="image/svg+xml")


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=8000)
