"""Figure rendering for sweep results and training curves.

Each sweep CSV gets a companion PNG next to it: NMSE versus the axis, one
line per method with standard-error bars.  Rendering is headless (Agg).
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bench import METHODS, SweepResult

_STYLE = {
    "nsfm": {"marker": "o", "linestyle": "-", "color": "tab:blue", "label": "null-space FM"},
    "lmmse": {"marker": "s", "linestyle": "--", "color": "tab:orange", "label": "vanilla LMMSE"},
    "ls": {"marker": "^", "linestyle": ":", "color": "tab:green", "label": "LS"},
}

_AXIS_LABEL = {
    "snr_db": "SNR [dB]",
    "pilot_density": r"pilot density $\alpha$",
    "budget_ms": "coherence-time budget [ms]",
}


def plot_sweep(result: SweepResult, path, title: str = "") -> None:
    """Render one NMSE-versus-axis figure to ``path``."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for method in METHODS:
        rows = [p for p in result.rows_for(method) if p.mean_nmse_db is not None]
        if not rows:
            continue
        xs = [p.axis_value for p in rows]
        ys = [p.mean_nmse_db for p in rows]
        errs = [p.stderr_db or 0.0 for p in rows]
        ax.errorbar(xs, ys, yerr=errs, capsize=2.5, markersize=4.5, **_STYLE[method])
    if result.axis == "budget_ms":
        ax.set_xscale("log")
    ax.set_xlabel(_AXIS_LABEL.get(result.axis, result.axis))
    ax.set_ylabel("NMSE [dB]")
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(True, alpha=0.35)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_loss_curve(curve, path) -> None:
    """Render the epoch-mean training loss to ``path``."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.plot(range(len(curve)), curve, color="tab:blue")
    ax.set_xlabel("epoch")
    ax.set_ylabel("flow-matching loss")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.35)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
