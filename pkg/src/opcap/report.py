"""Tabular and graphical output for study results.

CSV values are written at full double precision (round-tripping through
`float(repr(x))` is exact); figures are rendered to PNG files next to the
delimited output.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .simharness import StudyResult  # noqa: E402

__all__ = [
    "STUDY_COLUMNS",
    "study_rows",
    "write_study_csv",
    "write_convexity_csv",
    "render_study_figure",
    "render_convexity_figure",
]

STUDY_COLUMNS = [
    "Dist", "Parm1", "Parm2", "Threshold", "Lambda", "Alpha", "TrueCap",
    "MLE_Mean", "MLE_Bias", "MLE_BiasPct",
    "RCE_Mean", "RCE_Bias", "RCE_BiasPct",
    "MLE_RMSE", "RCE_RMSE", "RMSE_Ratio",
    "MLE_StdDev", "RCE_StdDev", "StdDev_Ratio",
    "MLE_CI95", "RCE_CI95", "CI95_Ratio",
    "MLE_CV", "RCE_CV",
    "MLE_IQR", "RCE_IQR", "IQR_Ratio",
    "MLE_Skew", "RCE_Skew", "MLE_Kurtosis", "RCE_Kurtosis",
    "n_failed",
]


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def study_rows(result: StudyResult):
    """One row per alpha, mirroring the bias/RMSE table layout."""
    cfg = result.config
    truth = cfg.truth
    label = truth.family.value + ("-trunc" if truth.truncated else "")
    rows = []
    for alpha in cfg.alphas:
        mle = result.stats.get(("mle", alpha))
        rce = result.stats.get(("rce", alpha))

        def stat(est, attr):
            return getattr(est, attr) if est is not None else None

        def ratio(attr):
            if mle is None or rce is None:
                return None
            denom = getattr(mle, attr)
            return getattr(rce, attr) / denom if denom else None

        rows.append({
            "Dist": label,
            "Parm1": truth.p1,
            "Parm2": truth.p2,
            "Threshold": truth.threshold,
            "Lambda": cfg.freq.lam,
            "Alpha": alpha,
            "TrueCap": result.true_capital[alpha],
            "MLE_Mean": stat(mle, "mean"),
            "MLE_Bias": stat(mle, "bias"),
            "MLE_BiasPct": stat(mle, "bias_pct"),
            "RCE_Mean": stat(rce, "mean"),
            "RCE_Bias": stat(rce, "bias"),
            "RCE_BiasPct": stat(rce, "bias_pct"),
            "MLE_RMSE": stat(mle, "rmse"),
            "RCE_RMSE": stat(rce, "rmse"),
            "RMSE_Ratio": ratio("rmse"),
            "MLE_StdDev": stat(mle, "stddev"),
            "RCE_StdDev": stat(rce, "stddev"),
            "StdDev_Ratio": ratio("stddev"),
            "MLE_CI95": stat(mle, "ci95_width"),
            "RCE_CI95": stat(rce, "ci95_width"),
            "CI95_Ratio": ratio("ci95_width"),
            "MLE_CV": stat(mle, "cv"),
            "RCE_CV": stat(rce, "cv"),
            "MLE_IQR": stat(mle, "iqr"),
            "RCE_IQR": stat(rce, "iqr"),
            "IQR_Ratio": ratio("iqr"),
            "MLE_Skew": stat(mle, "skewness"),
            "RCE_Skew": stat(rce, "skewness"),
            "MLE_Kurtosis": stat(mle, "excess_kurtosis"),
            "RCE_Kurtosis": stat(rce, "excess_kurtosis"),
            "n_failed": result.n_failed,
        })
    return rows


def write_study_csv(result: StudyResult, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STUDY_COLUMNS)
        for row in study_rows(result):
            writer.writerow([_fmt(row[c]) for c in STUDY_COLUMNS])
    return path


def write_convexity_csv(rows, path) -> Path:
    """Rows of (param_value, p, var) triples."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param_value", "p", "var"])
        for pv, p, v in rows:
            writer.writerow([_fmt(float(pv)), _fmt(float(p)), _fmt(float(v))])
    return path


def render_study_figure(result: StudyResult, path) -> Path:
    """Histogram overlay of the capital-estimate distributions per alpha."""
    cfg = result.config
    alphas = cfg.alphas
    fig, axes = plt.subplots(1, len(alphas), figsize=(6 * len(alphas), 4),
                             squeeze=False)
    for ax, alpha in zip(axes[0], alphas):
        for est, color in (("mle", "tab:red"), ("rce", "tab:blue")):
            key = (est, alpha)
            if key not in result.raw:
                continue
            v = result.raw[key] / 1e6
            ax.hist(v, bins=60, alpha=0.5, color=color, label=est.upper())
        ax.axvline(result.true_capital[alpha] / 1e6, color="k", ls="--",
                   label="true")
        ax.set_xlabel("capital ($m)")
        ax.set_title(f"alpha = {alpha}")
        ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_convexity_figure(rows, path) -> Path:
    """VaR-vs-parameter curves, one line per quantile level."""
    rows = sorted(rows, key=lambda r: (r[1], r[0]))
    by_p = {}
    for pv, p, v in rows:
        by_p.setdefault(p, []).append((pv, v))
    fig, ax = plt.subplots(figsize=(6, 4))
    for p, pts in sorted(by_p.items()):
        xs, ys = zip(*pts)
        ax.plot(xs, np.asarray(ys) / 1e6, marker=".", label=f"p={p}")
    ax.set_xlabel("parameter value")
    ax.set_ylabel("severity VaR ($m)")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
