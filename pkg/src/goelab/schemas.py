"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator

from goelab.ensembles import SeedSpec
from goelab.runner import RunConfig, make_ensemble


class EnsembleModel(BaseModel):
    kind: Literal["goe", "affine-goe", "uniform-sym", "sym-haar"]
    dim: int = Field(ge=1)
    mu: float = 0.0
    scale2: float = Field(default=1.0, ge=0.0)


class SeedModel(BaseModel):
    seed: int = Field(default=0, ge=0)
    stream: int = Field(default=0, ge=0)

    def to_spec(self) -> SeedSpec:
        return SeedSpec(self.seed, self.stream)


class GridModel(BaseModel):
    t_max: float = Field(default=4.0, gt=0.0)
    points: int = Field(default=41, ge=1)


class SampleRequest(BaseModel):
    ensemble: EnsembleModel
    n: int = Field(default=1000, ge=2)
    seed: SeedModel = SeedModel()

    def to_run_config(self) -> RunConfig:
        return RunConfig(
            command="sample",
            ensemble=make_ensemble(
                self.ensemble.kind, self.ensemble.dim, self.ensemble.mu, self.ensemble.scale2
            ),
            n=self.n,
            seed=self.seed.to_spec(),
        )


class VerifyForwardRequest(BaseModel):
    ensemble: EnsembleModel
    n: int = Field(default=100_000, ge=10_000)
    seed: SeedModel = SeedModel()
    delta: float = Field(default=0.01, gt=0.0, lt=1.0)
    haar_count: int = Field(default=10, ge=0)
    grid: GridModel = GridModel()

    def to_run_config(self) -> RunConfig:
        return RunConfig(
            command="verify-forward",
            ensemble=make_ensemble(
                self.ensemble.kind, self.ensemble.dim, self.ensemble.mu, self.ensemble.scale2
            ),
            n=self.n,
            seed=self.seed.to_spec(),
            delta=self.delta,
            haar_count=self.haar_count,
            t_max=self.grid.t_max,
            grid_points=self.grid.points,
        )


class CharacterizeRequest(BaseModel):
    ensemble: Optional[EnsembleModel] = None
    samples_csv: Optional[str] = None
    n: int = Field(default=100_000, ge=2)
    seed: SeedModel = SeedModel()
    delta: float = Field(default=0.01, gt=0.0, lt=1.0)
    grid: GridModel = GridModel()

    @model_validator(mode="after")
    def _one_source(self) -> "CharacterizeRequest":
        if (self.ensemble is None) == (self.samples_csv is None):
            raise ValueError("provide exactly one of ensemble or samples_csv")
        return self

    def to_run_config(self) -> RunConfig:
        ensemble = None
        if self.ensemble is not None:
            ensemble = make_ensemble(
                self.ensemble.kind, self.ensemble.dim, self.ensemble.mu, self.ensemble.scale2
            )
        return RunConfig(
            command="characterize",
            ensemble=ensemble,
            input_text=self.samples_csv,
            n=self.n,
            seed=self.seed.to_spec(),
            delta=self.delta,
            t_max=self.grid.t_max,
            grid_points=self.grid.points,
        )


class ProbeCfRequest(BaseModel):
    ensemble: EnsembleModel
    probe: str
    n: int = Field(default=100_000, ge=2)
    seed: SeedModel = SeedModel()
    delta: float = Field(default=0.01, gt=0.0, lt=1.0)
    grid: GridModel = GridModel()

    def to_run_config(self) -> RunConfig:
        return RunConfig(
            command="probe-cf",
            ensemble=make_ensemble(
                self.ensemble.kind, self.ensemble.dim, self.ensemble.mu, self.ensemble.scale2
            ),
            probe=self.probe,
            n=self.n,
            seed=self.seed.to_spec(),
            delta=self.delta,
            t_max=self.grid.t_max,
            grid_points=self.grid.points,
        )


class IdentitiesRequest(BaseModel):
    fd_step: float = Field(default=1e-4, gt=0.0)
    seed: int = Field(default=0, ge=0)

    def to_run_config(self) -> RunConfig:
        return RunConfig(command="identities", fd_step=self.fd_step, seed=SeedSpec(self.seed))


class ReportEnvelope(BaseModel):
    schema_version: int
    command: str
    config: dict
    report: dict
    timing_ms: int
