"""Optional SVG plots of CF curves (requires matplotlib).

Plots are presentation only and excluded from all acceptance gating.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _modulus_plot(ax, t, re, im, label: str, **kw) -> None:
    ax.plot(t, np.hypot(re, im), label=label, **kw)


def plot_cf_overlay(report: dict, path: Path, title: str) -> Path:
    """|ECF(t)| with radius band and, when present, the theoretical curve."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ecf = report["ecf"]
    t = np.asarray(ecf["t"])
    mod = np.hypot(np.asarray(ecf["re"]), np.asarray(ecf["im"]))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(t, mod, label=f"ECF (n={ecf['n']})", color="tab:blue")
    ax.fill_between(
        t, mod - ecf["radius"], mod + ecf["radius"], alpha=0.2, color="tab:blue", label="radius"
    )
    theory = report.get("theory")
    if theory is not None:
        _modulus_plot(ax, t, np.asarray(theory["re"]), np.asarray(theory["im"]),
                      "closed form", color="tab:orange", linestyle="--")
    ax.set_xlabel("t")
    ax.set_ylabel("|CF|")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def plot_envelope(envelope: dict, out_dir: Path) -> list[Path]:
    """Write the plots appropriate for a command envelope; returns paths."""
    command = envelope["command"]
    report = envelope["report"]
    written: list[Path] = []
    if command == "probe-cf":
        name = report["probe"].replace("(", "_").replace(")", "").replace(",", "_")
        written.append(plot_cf_overlay(report, out_dir / f"probe_cf_{name}.svg", report["probe"]))
    elif command == "characterize":
        for key, title in (("offdiag_cf", "pooled off-diagonal fit"), ("diag_cf", "pooled diagonal fit")):
            detail = report["step3"]["fit_details"].get(key)
            if detail is None:
                continue
        # CF curves are not embedded in the characterize report; plot the k-profile.
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        prof = [p for p in report["step3"]["k_profile"] if p["k"] is not None]
        if prof:
            fig, ax = plt.subplots(figsize=(6, 4))
            ax.plot([p["t"] for p in prof], [p["k"] for p in prof], "o-", label="k estimate")
            if report.get("sigma2") is not None:
                ax.axhline(2.0 * report["sigma2"], color="tab:orange", linestyle="--",
                           label="2 * fitted sigma2")
            ax.set_xlabel("t")
            ax.set_ylabel("k")
            ax.set_title("log-CF derivative profile")
            ax.legend()
            fig.tight_layout()
            path = out_dir / "k_profile.svg"
            fig.savefig(path, format="svg")
            plt.close(fig)
            written.append(path)
    return written
