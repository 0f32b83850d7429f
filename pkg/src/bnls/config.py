"""Validated run configuration; unknown keys are rejected before any compute."""

from __future__ import annotations

import json
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .energy import ModelParams
from .errors import ConfigInvalid
from .radial import MAX_DIM, MIN_NODES, RadialGrid, build_grid

TASKS = ("solve-scalar", "spectrum", "sobolev", "classify", "solve-system", "fibering-scan", "sweep", "verify")
SWEEP_AXES = ("beta", "lambda1", "lambda2", "mu1", "mu2", "R", "M")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ParamSpec(_Strict):
    lambda1: float = Field(1.0, gt=0)
    lambda2: float = Field(1.0, gt=0)
    mu1: float = Field(1.0, gt=0)
    mu2: float = Field(1.0, gt=0)
    beta: float = 0.0


class GridSpec(_Strict):
    N: int = Field(2, ge=1, le=MAX_DIM)
    R: float = Field(27.0, gt=0)
    M: int = Field(1024, ge=MIN_NODES)


class SolverSpec(_Strict):
    tol: float | None = Field(None, gt=0)
    max_iter: int = Field(5000, ge=1)
    seed: int | None = None
    beads: int = Field(17, ge=3)
    reparam_every: int = Field(10, ge=1)
    string_sweeps: int = Field(200, ge=1)
    gtol: float = Field(1e-6, gt=0)


class OutputSpec(_Strict):
    field: str | None = None
    report: str | None = None
    csv: str | None = None


class RunConfig(_Strict):
    task: Literal[TASKS] = "verify"
    params: ParamSpec = ParamSpec()
    grid: GridSpec = GridSpec()
    solver: SolverSpec = SolverSpec()
    output: OutputSpec = OutputSpec()
    mode: Literal["min", "mp"] = "min"
    count: int = Field(5, ge=1)
    axis: Literal[SWEEP_AXES] | None = None
    values: list[float] = []

    @model_validator(mode="after")
    def _sweep_axis(self):
        if self.task == "sweep" and self.axis is None:
            raise ValueError("task 'sweep' needs an axis")
        return self

    def model_params(self) -> ModelParams:
        q = self.params
        return ModelParams(q.lambda1, q.lambda2, q.mu1, q.mu2, q.beta, self.grid.N)

    def build_grid(self) -> RadialGrid:
        return build_grid(self.grid.N, self.grid.R, self.grid.M)


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        parts = [f"{'.'.join(str(x) for x in e['loc'])}: {e['msg']}" for e in exc.errors()]
        raise ConfigInvalid("; ".join(parts)) from exc


def load_config(path, **overrides) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigInvalid("config must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return parse_config(data)
