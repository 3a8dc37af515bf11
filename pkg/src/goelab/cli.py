"""Command-line front end; a thin client over the runner layer.

Exit codes: 0 = pass, 1 = statistical failure, 2 = usage or input error,
so CI pipelines can gate directly on invariance suites.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from goelab import __version__
from goelab.ensembles import SeedSpec
from goelab.runner import ConfigError, RunConfig, dispatch, make_ensemble


def _add_ensemble_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument(
        "--ensemble",
        choices=("goe", "affine-goe", "uniform-sym", "sym-haar"),
        required=required,
        default=None,
    )
    p.add_argument("--dim", type=int, default=4, help="matrix dimension d")
    p.add_argument("--mu", type=float, default=0.0, help="diagonal shift (affine-goe)")
    p.add_argument(
        "--scale2", type=float, default=1.0, help="off-diagonal variance s^2 (affine-goe)"
    )


def _add_common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=100_000, help="sample count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0, help="substream index")
    p.add_argument("--delta", type=float, default=0.01, help="per-record confidence parameter")
    p.add_argument("--t-max", type=float, default=4.0)
    p.add_argument("--grid-points", type=int, default=41)
    p.add_argument("--out", type=Path, default=None, help="write the JSON report here")
    p.add_argument("--plot", type=Path, default=None, help="directory for SVG plots")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="goelab",
        description="Sample random-matrix ensembles, test conjugation invariance, "
        "and characterize affine Gaussian orthogonal ensembles.",
    )
    parser.add_argument("--version", action="version", version=f"goelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="dump ensemble samples as CSV")
    _add_ensemble_args(p)
    _add_common_args(p)

    p = sub.add_parser("verify-forward", help="test conjugation invariance of an ensemble")
    _add_ensemble_args(p)
    _add_common_args(p)
    p.add_argument("--haar-count", type=int, default=10, help="Haar draws in the family")

    p = sub.add_parser("characterize", help="run the affine-GOE characterization pipeline")
    _add_ensemble_args(p, required=False)
    _add_common_args(p)
    p.add_argument("--input", type=Path, default=None, help="sample CSV to ingest")

    p = sub.add_parser("probe-cf", help="ECF along a probe ray with closed-form overlay")
    _add_ensemble_args(p)
    _add_common_args(p)
    p.add_argument("--probe", required=True, help="'offdiag:K,J[:t]' or 'diag:J[:t]'")

    p = sub.add_parser("identities", help="deterministic closed-form identity checks")
    p.add_argument("--fd-step", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    ensemble = None
    if getattr(args, "ensemble", None) is not None:
        ensemble = make_ensemble(args.ensemble, args.dim, args.mu, args.scale2)
    return RunConfig(
        command=args.command,
        ensemble=ensemble,
        input_path=str(args.input) if getattr(args, "input", None) else None,
        n=getattr(args, "n", 100_000),
        seed=SeedSpec(getattr(args, "seed", 0), getattr(args, "stream", 0)),
        t_max=getattr(args, "t_max", 4.0),
        grid_points=getattr(args, "grid_points", 41),
        delta=getattr(args, "delta", 0.01),
        haar_count=getattr(args, "haar_count", 10),
        probe=getattr(args, "probe", None),
        fd_step=getattr(args, "fd_step", 1e-4),
    )


def _summary_line(envelope: dict, exit_code: int) -> str:
    cmd = envelope["command"]
    report = envelope["report"]
    if cmd == "identities":
        worst = max(c["max_residual"] for c in report["checks"])
        return f"identities: {'PASS' if exit_code == 0 else 'FAIL'} (max residual {worst:.3e})"
    if cmd == "sample":
        return f"sample: wrote {report['rows']} rows (dim={report['dim']})"
    if cmd == "verify-forward":
        status = "PASS" if report["overall_pass"] else "FAIL"
        line = f"verify-forward: {status} ({len(report['records'])} records)"
        if report["failures"]:
            f0 = report["failures"][0]
            line += f"; first failure: probe {f0['probe']} under {f0['orthogonal']}"
        return line
    if cmd == "characterize":
        v = report["verdict"]
        if v in ("AffineGOE", "DegenerateDiagonal"):
            return f"characterize: {v} (mu={report['mu']:.6g}, sigma2={report['sigma2']:.6g})"
        return f"characterize: {v} (failing: {', '.join(report['failing_gates']) or 'none'})"
    if cmd == "probe-cf":
        comp = report.get("comparison")
        if comp is None:
            return f"probe-cf: ECF computed for {report['probe']} (no closed form)"
        status = "PASS" if comp["pass"] else "FAIL"
        return (
            f"probe-cf: {status} sup|ecf-theory| = {comp['sup_dist']:.4g} "
            f"(threshold {comp['threshold']:.4g})"
        )
    return cmd


def _emit_plots(envelope: dict, plot_dir: Path) -> None:
    from goelab import plotting

    plot_dir.mkdir(parents=True, exist_ok=True)
    written = plotting.plot_envelope(envelope, plot_dir)
    for path in written:
        print(f"plot: {path}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        exit_code, envelope, csv_text = dispatch(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out = getattr(args, "out", None)
    if cfg.command == "sample":
        if out is None:
            sys.stdout.write(csv_text)
        else:
            Path(out).write_text(csv_text)
            print(_summary_line(envelope, exit_code))
    else:
        text = json.dumps(envelope, indent=2)
        if out is None:
            print(text)
        else:
            Path(out).write_text(text + "\n")
            print(_summary_line(envelope, exit_code))

    plot_dir = getattr(args, "plot", None)
    if plot_dir is not None:
        try:
            _emit_plots(envelope, Path(plot_dir))
        except ImportError:
            print("error: --plot requires matplotlib (pip install goelab[plots])", file=sys.stderr)
            return 2
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
