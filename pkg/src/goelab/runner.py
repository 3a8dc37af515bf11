"""Shared execution layer behind the CLI and the HTTP service.

Every command is a pure function of its RunConfig: it returns an exit
code (0 = pass, 1 = statistical failure, 2 = usage or input error) and a
JSON-ready envelope {schema_version, command, config, report, timing_ms}.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass
from typing import Any

import numpy as np

from goelab.cf import (
    ECFEstimate,
    TGrid,
    cf_distance,
    ecf_trace,
    normal_cf,
    product_form_curve,
    uniform_cf,
)
from goelab.characterize import CharacterizeConfig, Verdict, characterize
from goelab.ensembles import (
    EnsembleSpec,
    SampleBatch,
    SeedSpec,
    load_samples_csv,
    samples_csv_text,
    SampleCsvError,
)
from goelab.invariance import test_conjugation_invariance
from goelab.symmetric import SymMatrix, probe_diag, probe_offdiag, run_identity_suite

SCHEMA_VERSION = 1

COMMANDS = ("sample", "verify-forward", "characterize", "probe-cf", "identities")


class ConfigError(ValueError):
    """Invalid run configuration or malformed input (exit code 2)."""


@dataclass
class RunConfig:
    command: str
    ensemble: EnsembleSpec | None = None
    input_path: str | None = None
    input_text: str | None = None
    n: int = 100_000
    seed: SeedSpec = SeedSpec(0)
    t_max: float = 4.0
    grid_points: int = 41
    delta: float = 0.01
    haar_count: int = 10
    probe: str | None = None
    fd_step: float = 1e-4
    threads: int | None = None

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        sources = sum(x is not None for x in (self.ensemble, self.input_path, self.input_text))
        if self.command in ("sample", "verify-forward", "probe-cf", "identities"):
            if self.command != "identities" and self.ensemble is None:
                raise ConfigError(f"{self.command} requires an ensemble spec")
        if self.command == "characterize" and sources != 1:
            raise ConfigError("characterize needs exactly one of an ensemble or an input file")
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if not (0.0 < self.delta < 1.0):
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")

    def grid(self) -> TGrid:
        try:
            return TGrid.symmetric(self.t_max, self.grid_points)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "command": self.command,
            "n": self.n,
            "seed": self.seed.to_dict(),
            "delta": self.delta,
            "grid": {"t_max": self.t_max, "points": self.grid_points},
        }
        if self.ensemble is not None:
            out["ensemble"] = self.ensemble.to_dict()
        if self.input_path is not None:
            out["input"] = self.input_path
        if self.input_text is not None:
            out["input"] = "<inline csv>"
        if self.command == "verify-forward":
            out["haar_count"] = self.haar_count
        if self.command == "probe-cf":
            out["probe"] = self.probe
        if self.command == "identities":
            out["fd_step"] = self.fd_step
        return out


def make_ensemble(kind: str, dim: int, mu: float = 0.0, scale2: float = 1.0) -> EnsembleSpec:
    try:
        scale = float(np.sqrt(scale2)) if scale2 >= 0 else -1.0
        return EnsembleSpec(kind=kind, dim=dim, mu=mu, scale=scale)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_probe(text: str, dim: int) -> tuple[str, SymMatrix]:
    """Parse 'offdiag:K,J[:t]' or 'diag:J[:t]' into a named probe matrix."""
    parts = text.split(":")
    try:
        kind = parts[0]
        t = float(parts[2]) if len(parts) > 2 else 1.0
        if kind == "offdiag":
            k, j = (int(v) for v in parts[1].split(","))
            return f"offdiag({k},{j})", probe_offdiag(dim, k, j, t)
        if kind == "diag":
            j = int(parts[1])
            return f"diag({j})", probe_diag(dim, j, t)
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"bad probe spec {text!r}: {exc}") from None
    raise ConfigError(f"bad probe spec {text!r}: expected 'offdiag:K,J' or 'diag:J'")


def entry_cfs(spec: EnsembleSpec):
    """Closed-form (diag_cf, offdiag_cf) for ensembles that have them."""
    if spec.kind == "goe":
        return (lambda t: normal_cf(0.0, 2.0, t), lambda t: normal_cf(0.0, 1.0, t))
    if spec.kind == "affine-goe":
        s2 = spec.scale**2
        return (
            lambda t: normal_cf(spec.mu, 2.0 * s2, t),
            lambda t: normal_cf(0.0, s2, t),
        )
    if spec.kind == "uniform-sym":
        return (lambda t: uniform_cf(np.sqrt(6.0), t), lambda t: uniform_cf(np.sqrt(3.0), t))
    return None


def _envelope(cfg: RunConfig, report: dict, t0: float) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": cfg.command,
        "config": cfg.to_dict(),
        "report": report,
        "timing_ms": int(round(1000.0 * (time.perf_counter() - t0))),
    }


def run_identities(cfg: RunConfig) -> tuple[int, dict]:
    t0 = time.perf_counter()
    checks = run_identity_suite(fd_step=cfg.fd_step, seed=cfg.seed.seed)
    passed = all(c["passed"] for c in checks)
    report = {"checks": checks, "overall_pass": passed}
    return (0 if passed else 1), _envelope(cfg, report, t0)


def run_sample(cfg: RunConfig) -> tuple[int, dict, str]:
    """Returns (exit, envelope, csv_text)."""
    t0 = time.perf_counter()
    batch = cfg.ensemble.sample(cfg.n, cfg.seed)
    text = samples_csv_text(batch)
    report = {"rows": batch.n, "dim": batch.dim, "columns": batch.packed.shape[1]}
    return 0, _envelope(cfg, report, t0), text


def run_verify_forward(cfg: RunConfig) -> tuple[int, dict]:
    t0 = time.perf_counter()
    if cfg.ensemble.dim < 2:
        raise ConfigError("verify-forward requires dim >= 2")
    if cfg.n < 10_000:
        raise ConfigError("verify-forward requires n >= 10000")
    report = test_conjugation_invariance(
        cfg.ensemble,
        cfg.n,
        delta=cfg.delta,
        seed=cfg.seed,
        haar_count=cfg.haar_count,
        threads=cfg.threads,
    )
    rd = report.to_dict()
    rd["failures"] = [
        {"probe": r.probe, "orthogonal": r.orthogonal} for r in report.failures()
    ]
    return (0 if report.overall_pass else 1), _envelope(cfg, rd, t0)


def _load_input(cfg: RunConfig) -> SampleBatch:
    try:
        if cfg.input_text is not None:
            return load_samples_csv(io.StringIO(cfg.input_text))
        return load_samples_csv(cfg.input_path)
    except SampleCsvError as exc:
        raise ConfigError(f"bad sample csv: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {cfg.input_path}: {exc}") from None


def run_characterize(cfg: RunConfig) -> tuple[int, dict]:
    t0 = time.perf_counter()
    ccfg = CharacterizeConfig(
        delta=cfg.delta, grid_t_max=cfg.t_max, grid_points=cfg.grid_points
    )
    try:
        if cfg.ensemble is not None:
            if cfg.ensemble.dim < 2:
                raise ConfigError("characterize requires dim >= 2")
            report = characterize(cfg.ensemble, ccfg, n=cfg.n, seed=cfg.seed)
        else:
            report = characterize(_load_input(cfg), ccfg)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    ok = report.verdict in (Verdict.AFFINE_GOE, Verdict.DEGENERATE_DIAGONAL)
    return (0 if ok else 1), _envelope(cfg, report.to_dict(), t0)


def run_probe_cf(cfg: RunConfig) -> tuple[int, dict]:
    t0 = time.perf_counter()
    if cfg.probe is None:
        raise ConfigError("probe-cf requires a probe spec")
    name, probe = parse_probe(cfg.probe, cfg.ensemble.dim)
    grid = cfg.grid()
    batch = cfg.ensemble.sample(cfg.n, cfg.seed)
    est = ecf_trace(batch, probe, grid, cfg.delta)
    report = {"probe": name, "ecf": est.to_dict()}
    exit_code = 0
    cfs = entry_cfs(cfg.ensemble)
    if cfs is not None:
        theory_vals = product_form_curve(cfs[0], cfs[1], probe, grid)
        theory = ECFEstimate(grid, theory_vals.real, theory_vals.imag, 0, 0.0, cfg.delta)
        dist = cf_distance(est, theory)
        report["theory"] = {"re": theory_vals.real.tolist(), "im": theory_vals.imag.tolist()}
        report["comparison"] = dist.to_dict()
        exit_code = 0 if dist.passed else 1
    return exit_code, _envelope(cfg, report, t0)


def dispatch(cfg: RunConfig) -> tuple[int, dict, str | None]:
    """Run a command; returns (exit_code, envelope, optional csv payload)."""
    if cfg.command == "identities":
        code, env = run_identities(cfg)
        return code, env, None
    if cfg.command == "sample":
        code, env, text = run_sample(cfg)
        return code, env, text
    if cfg.command == "verify-forward":
        code, env = run_verify_forward(cfg)
        return code, env, None
    if cfg.command == "characterize":
        code, env = run_characterize(cfg)
        return code, env, None
    code, env = run_probe_cf(cfg)
    return code, env, None
