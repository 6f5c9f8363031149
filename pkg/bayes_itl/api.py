#!/usr/bin/env python3
"""
Results API

Read-only HTTP service over experiment output directories, plus an endpoint
that describes the epsilon-ball structure of a posted MDP document.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .config import get_config
from .core import PlanningOptions, TabularMdp
from .envs import describe_env
from .errors import ContractViolation, PlanningConvergenceError
from .experiments.outputs import SUMMARY_JSON

logger = logging.getLogger("BayesITL.API")


class DescribeRequest(BaseModel):
    mdp: Dict[str, Any]
    epsilons: List[float] = Field(default_factory=lambda: [0.0, 3.0, 4.0], min_length=1)


class RunInfo(BaseModel):
    run_id: str
    config_hash: Optional[str] = None
    env_fingerprint: Optional[str] = None
    flagged_runs: Optional[int] = None


def _read_summary(run_dir: Path) -> Dict[str, Any]:
    with open(run_dir / SUMMARY_JSON, "r") as f:
        return json.load(f)


def create_app(results_root: Optional[Union[str, Path]] = None) -> FastAPI:
    """
    Build the service

    Args:
        results_root: Directory whose subdirectories are experiment runs
            (default: api.results_root from the config)
    """
    config = get_config()
    root = Path(results_root or config.get("api.results_root", "results"))
    options = PlanningOptions.from_config(config)

    app = FastAPI(title="Bayes ITL Results", version="1.0.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_credentials=True,
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )

    def run_dir_for(run_id: str) -> Path:
        if "/" in run_id or "\\" in run_id or run_id in ("", ".", ".."):
            raise HTTPException(status_code=404, detail=f"Unknown run '{run_id}'")
        run_dir = root / run_id
        if not (run_dir / SUMMARY_JSON).is_file():
            raise HTTPException(status_code=404, detail=f"No summary for run '{run_id}'")
        return run_dir

    @app.get("/")
    async def index():
        return {"status": "ok", "service": "bayes-itl", "results_root": str(root)}

    @app.get("/health")
    async def health():
        return {"status": "healthy"}

    @app.get("/runs", response_model=List[RunInfo])
    async def list_runs():
        """Run directories that contain a summary"""
        if not root.is_dir():
            return []

        runs = []
        for run_dir in sorted(p for p in root.iterdir() if (p / SUMMARY_JSON).is_file()):
            try:
                summary = _read_summary(run_dir)
            except (OSError, json.JSONDecodeError) as e:
                logger.warning(f"Skipping unreadable summary in {run_dir}: {e}")
                continue
            provenance = summary.get("provenance", {})
            runs.append(RunInfo(
                run_id=run_dir.name,
                config_hash=provenance.get("config_hash"),
                env_fingerprint=provenance.get("env_fingerprint"),
                flagged_runs=summary.get("flagged_runs"),
            ))
        return runs

    @app.get("/runs/{run_id}/summary")
    async def run_summary(run_id: str):
        run_dir = run_dir_for(run_id)
        try:
            return _read_summary(run_dir)
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Error reading summary for run {run_id}: {e}")
            raise HTTPException(status_code=500, detail=f"Unreadable summary for run '{run_id}'")

    @app.post("/envs/describe")
    async def describe(request: DescribeRequest):
        """Stochastic-policy state counts per epsilon for an MDP document"""
        try:
            mdp = TabularMdp.from_document(request.mdp)
            description = describe_env(mdp, request.epsilons, options)
        except (ContractViolation, TypeError, ValueError) as e:
            raise HTTPException(status_code=422, detail=str(e))
        except PlanningConvergenceError as e:
            logger.error(f"Planning failed for posted MDP: {e}")
            raise HTTPException(status_code=500, detail=str(e))

        document = description.to_document()
        document["fingerprint"] = mdp.fingerprint
        return document

    return app


def serve(host: Optional[str] = None, port: Optional[int] = None,
          results_root: Optional[Union[str, Path]] = None) -> None:
    """Run the service under uvicorn"""
    import uvicorn

    config = get_config()
    uvicorn.run(
        create_app(results_root),
        host=host or config.get("api.host", "127.0.0.1"),
        port=int(port or config.get("api.port", 8000)),
    )


if __name__ == "__main__":
    serve()
