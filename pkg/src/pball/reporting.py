"""Deterministic file outputs: CSV, JSON and companion matplotlib figures.

Every CSV uses '.' decimals and 17 significant digits; files are written
atomically (temp file + rename) so partial outputs never appear.  Figures are
rendered to PNG next to the delimited data they visualize.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .branch import Branch, LambdaBracket  # noqa: E402
from .operators import SolutionProfile  # noqa: E402
from .stability import ExponentReport  # noqa: E402

__all__ = [
    "write_text_atomic", "format_float", "write_profile_csv",
    "write_branch_csv", "write_bracket_json", "write_stability_csv",
    "write_estimate_csv", "write_norm_audit_csv", "write_exponents_json",
    "figure_profile", "figure_branch", "figure_stability", "figure_estimate",
]


def format_float(x) -> str:
    if x is None:
        return "nan"
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def write_text_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header: Sequence[str], rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- delimited outputs --------------------------------------------------------

def write_profile_csv(path: Path, profile: SolutionProfile) -> None:
    rows = ((format_float(r), format_float(u), format_float(ur))
            for r, u, ur in zip(profile.grid.nodes, profile.u, profile.u_r))
    write_text_atomic(path, _csv(("r", "u", "u_r"), rows))


def write_branch_csv(path: Path, branch: Branch) -> None:
    rows = ((format_float(pt.lam), format_float(pt.u_max),
             format_float(pt.mu1), str(pt.iters),
             format_float(pt.uniform_bounds[0]),
             format_float(pt.uniform_bounds[1]))
            for pt in branch.points)
    write_text_atomic(path, _csv(
        ("lambda", "u_max", "mu1", "iters", "l1_up", "l1_hu"), rows))


def write_bracket_json(path: Path, bracket: LambdaBracket) -> None:
    write_text_atomic(path, _json_text({"lambda_lo": bracket.lambda_lo,
                                        "lambda_hi": bracket.lambda_hi}))


def write_stability_csv(path: Path, rows: Sequence[dict]) -> None:
    out = ((format_float(r["lambda"]), format_float(r["mu1"]),
            "true" if r["semi_stable"] else "false") for r in rows)
    write_text_atomic(path, _csv(("lambda", "mu1", "semi_stable"), out))


def write_estimate_csv(path: Path, rows: Sequence[dict]) -> None:
    out = ((format_float(r["lambda"]), format_float(r["alpha"]),
            format_float(r["delta"]), format_float(r["lhs"]),
            format_float(r["ratio"])) for r in rows)
    write_text_atomic(path, _csv(
        ("lambda", "alpha", "delta", "lhs", "ratio"), out))


def write_norm_audit_csv(path: Path, rows: Sequence[dict]) -> None:
    header = ("lambda", "regime", "applicable", "norm_inf", "norm_p", "norm_1",
              "ratio_inf_p", "ratio_inf_max1p", "q_lebesgue", "ratio_q_p",
              "q_sobolev", "ratio_w1q_p")
    out = ((format_float(r["lambda"]), r["regime"],
            "true" if r["applicable"] else "false",
            format_float(r["norm_inf"]), format_float(r["norm_p"]),
            format_float(r["norm_1"]), format_float(r["ratio_inf_p"]),
            format_float(r["ratio_inf_max1p"]), format_float(r["q_lebesgue"]),
            format_float(r["ratio_q_p"]), format_float(r["q_sobolev"]),
            format_float(r["ratio_w1q_p"])) for r in rows)
    write_text_atomic(path, _csv(header, out))


def write_exponents_json(path: Path, report: ExponentReport) -> None:
    def enc(x):
        return "inf" if math.isinf(x) else x

    write_text_atomic(path, _json_text({
        "threshold": report.threshold, "regime": report.regime,
        "q0": enc(report.q0), "q1": enc(report.q1),
        "alpha_max": report.alpha_max}))


# -- figures -------------------------------------------------------------------

def _save(fig, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def figure_profile(path: Path, profile: SolutionProfile,
                   label: str = "u") -> None:
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    r = profile.grid.nodes
    ax1.plot(r, profile.u, lw=1.2)
    ax1.set_ylabel(label)
    ax2.plot(r, profile.u_r, lw=1.2, color="tab:red")
    ax2.set_ylabel(f"d{label}/dr")
    ax2.set_xlabel("r")
    for ax in (ax1, ax2):
        ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def figure_branch(path: Path, branch: Branch) -> None:
    have_mu = any(pt.mu1 is not None for pt in branch.points)
    nrows = 2 if have_mu else 1
    fig, axes = plt.subplots(nrows, 1, figsize=(6, 3 * nrows), sharex=True)
    axes = axes if nrows == 2 else [axes]
    lams = [pt.lam for pt in branch.points]
    umax = [pt.u_max for pt in branch.points]
    lo, hi = branch.lambda_star_bracket
    axes[0].plot(lams, umax, "o-", ms=3, lw=1.0)
    axes[0].axvspan(lo, hi, color="tab:orange", alpha=0.3,
                    label="lambda* bracket")
    axes[0].set_ylabel("sup |u|")
    axes[0].legend(loc="upper left", fontsize=8)
    if have_mu:
        mus = [pt.mu1 if pt.mu1 is not None else math.nan
               for pt in branch.points]
        axes[1].plot(lams, mus, "s-", ms=3, lw=1.0, color="tab:green")
        axes[1].axhline(0.0, color="k", lw=0.6)
        axes[1].set_ylabel("mu_1")
    axes[-1].set_xlabel("lambda")
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def figure_stability(path: Path, rows: Sequence[dict]) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot([r["lambda"] for r in rows], [r["mu1"] for r in rows],
            "o-", ms=3, lw=1.0)
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_xlabel("lambda")
    ax.set_ylabel("mu_1")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def figure_estimate(path: Path, rows: Sequence[dict]) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    alphas = sorted({r["alpha"] for r in rows})
    for a in alphas:
        pts = [(r["lambda"], r["ratio"]) for r in rows if r["alpha"] == a]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", ms=3, lw=1.0,
                label=f"alpha = {a:g}")
    ax.set_xlabel("lambda")
    ax.set_ylabel("weighted gradient ratio")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)
