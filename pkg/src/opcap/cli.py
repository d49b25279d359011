"""Command-line interface.

Single-shot results are printed as JSON; study and scan outputs are CSV
tables with companion PNG figures written next to them.

Exit codes: 0 success, 2 input/validation error, 3 numeric failure,
4 study-quality failure under --strict.
"""

from __future__ import annotations

import csv
import json
import math
import sys
import warnings
from pathlib import Path

import click
import numpy as np
import tomli

from .capital import (
    CapitalSpec,
    InfiniteMeanError,
    TailDomainError,
    isla,
    mc_capital_oracle,
    sla_bk,
    sla_degen,
    tail_index,
    LOW_TAIL_POINT,
    HIGH_TAIL_POINT,
)
from .distributions import (
    FrequencyModel,
    ParameterDomainError,
    SeverityFamily,
    SeverityModel,
    quantile,
)
from .fisher import NumericInstabilityError, fisher_for_model, param_covariance
from .mle import (
    DegenerateSampleError,
    FitResult,
    InsufficientDataError,
    fit_poisson,
    fit_severity,
)
from .rce import RceError, rce_estimate
from .simharness import (
    ContaminationSpec,
    StudyConfig,
    calibrate_c,
    run_study,
)
from . import report

_VALIDATION, _NUMERIC, _QUALITY = 2, 3, 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _echo_json(payload):
    click.echo(json.dumps(payload, indent=2, default=_jsonable))


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    raise TypeError(f"not JSON serializable: {type(x)}")


def _read_losses(path: Path, threshold: float | None):
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "loss_amount" not in reader.fieldnames:
                _fail(_VALIDATION, "loss file must have a 'loss_amount' column")
            losses = []
            for i, row in enumerate(reader, start=2):
                try:
                    amt = float(row["loss_amount"])
                except (TypeError, ValueError):
                    _fail(_VALIDATION, f"line {i}: unparseable loss_amount")
                if amt <= 0.0:
                    _fail(_VALIDATION, f"line {i}: loss_amount must be positive")
                if threshold is not None and amt <= threshold:
                    _fail(_VALIDATION,
                          f"line {i}: loss {amt} is at or below the threshold {threshold}")
                losses.append(amt)
    except OSError as exc:
        _fail(_VALIDATION, f"cannot read {path}: {exc}")
    if not losses:
        _fail(_VALIDATION, "loss file contains no losses")
    return np.asarray(losses)


def _parse_family(name: str) -> SeverityFamily:
    try:
        return SeverityFamily.parse(name)
    except ParameterDomainError as exc:
        _fail(_VALIDATION, str(exc))


def _alpha_option(value: float) -> float:
    if not 0.0 < value < 1.0:
        _fail(_VALIDATION, "alpha must lie strictly inside (0, 1)")
    return value


@click.group()
def main():
    """Operational-risk capital estimation toolkit."""


@main.command("fit")
@click.argument("lossfile", type=click.Path(path_type=Path))
@click.option("--family", required=True, help="Severity family.")
@click.option("--threshold", type=float, default=None,
              help="Data-collection truncation threshold.")
@click.option("--years", type=int, default=None,
              help="Observation horizon for the frequency estimate.")
def cmd_fit(lossfile, family, threshold, years):
    """Fit a severity family to a loss file by MLE."""
    fam = _parse_family(family)
    losses = _read_losses(lossfile, threshold)
    try:
        fit = fit_severity(losses, fam, threshold)
    except (InsufficientDataError, DegenerateSampleError, ParameterDomainError) as exc:
        _fail(_VALIDATION, str(exc))
    payload = {
        "family": fam.value,
        "threshold": threshold,
        "p1": fit.model.p1,
        "p2": fit.model.p2,
        "loglik": fit.loglik,
        "n": fit.n,
        "converged": fit.converged,
        "iterations": fit.iterations,
    }
    try:
        fm = fisher_for_model(fit.model)
        payload["covariance"] = param_covariance(fm, fit.n)
        payload["correlation"] = fm.correlation
    except (NumericInstabilityError, ParameterDomainError) as exc:
        payload["covariance_error"] = str(exc)
    if years is not None:
        payload["lambda"] = fit_poisson(fit.n, years).lam
    _echo_json(payload)
    if not fit.converged:
        sys.exit(_NUMERIC)


def _model_from_flags(family, p1, p2, threshold):
    fam = _parse_family(family)
    try:
        return SeverityModel(fam, p1, p2, threshold)
    except ParameterDomainError as exc:
        _fail(_VALIDATION, str(exc))


@main.command("capital")
@click.option("--family", required=True)
@click.option("--p1", type=float, required=True)
@click.option("--p2", type=float, required=True)
@click.option("--threshold", type=float, default=None)
@click.option("--lambda", "lam", type=float, required=True)
@click.option("--alpha", type=float, default=0.999, show_default=True)
@click.option("--method", type=click.Choice(["bk", "degen", "isla", "mc"]),
              default="isla", show_default=True)
@click.option("--sims", type=int, default=1_000_000, show_default=True,
              help="Simulated years for --method mc.")
@click.option("--seed", type=int, default=0, show_default=True)
def cmd_capital(family, p1, p2, threshold, lam, alpha, method, sims, seed):
    """Aggregate-loss VaR for explicit severity/frequency parameters."""
    _alpha_option(alpha)
    if lam <= 0.0:
        _fail(_VALIDATION, "--lambda must be positive")
    model = _model_from_flags(family, p1, p2, threshold)
    spec = CapitalSpec(alpha, FrequencyModel(lam, 1))
    ti = tail_index(model)
    try:
        if method == "bk":
            cap = sla_bk(model, spec)
            branch = "first-order"
        elif method == "degen":
            cap = sla_degen(model, spec)
            branch = "light-tail" if ti < 1.0 else "heavy-tail"
        elif method == "isla":
            cap = isla(model, spec)
            if LOW_TAIL_POINT < ti < HIGH_TAIL_POINT:
                branch = "interpolated"
            else:
                branch = "light-tail" if ti < 1.0 else "heavy-tail"
        else:
            rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
            cap = mc_capital_oracle(model, spec, sims, rng)
            branch = f"monte-carlo({sims})"
    except (InfiniteMeanError, TailDomainError) as exc:
        _fail(_NUMERIC, str(exc))
    _echo_json({
        "capital": cap,
        "method": method,
        "branch": branch,
        "tail_index": ti,
        "interpolated": method == "isla" and LOW_TAIL_POINT < ti < HIGH_TAIL_POINT,
        "alpha": alpha,
        "lambda": lam,
        "severity_percentile": spec.severity_percentile,
    })


@main.command("rce")
@click.argument("lossfile", type=click.Path(path_type=Path), required=False)
@click.option("--family", required=True)
@click.option("--p1", type=float, default=None, help="Explicit parameter 1 (skip fitting).")
@click.option("--p2", type=float, default=None, help="Explicit parameter 2 (skip fitting).")
@click.option("--threshold", type=float, default=None)
@click.option("--lambda", "lam", type=float, default=None)
@click.option("--years", type=int, default=10, show_default=True)
@click.option("--alpha", type=float, default=0.999, show_default=True)
def cmd_rce(lossfile, family, p1, p2, threshold, lam, years, alpha):
    """Reduced-bias capital estimate from a loss file or explicit parameters."""
    _alpha_option(alpha)
    fam = _parse_family(family)
    if lossfile is not None:
        losses = _read_losses(lossfile, threshold)
        try:
            fit = fit_severity(losses, fam, threshold)
        except (InsufficientDataError, DegenerateSampleError,
                ParameterDomainError) as exc:
            _fail(_VALIDATION, str(exc))
        if lam is None:
            lam = fit_poisson(fit.n, years).lam
    elif p1 is not None and p2 is not None and lam is not None:
        model = _model_from_flags(family, p1, p2, threshold)
        n = max(int(round(lam * years)), 2)
        fit = FitResult(model=model, loglik=float("nan"), n=n, converged=True,
                        iterations=0, start_point=(p1, p2))
    else:
        _fail(_VALIDATION,
              "provide either a loss file or all of --p1, --p2, --lambda")
    if lam <= 0.0:
        _fail(_VALIDATION, "--lambda must be positive")
    freq = FrequencyModel(lam, years)
    spec = CapitalSpec(alpha, freq)
    try:
        res = rce_estimate(fit, freq, spec)
    except (RceError, NumericInstabilityError, TailDomainError,
            InfiniteMeanError) as exc:
        _fail(_NUMERIC, str(exc))
    _echo_json({
        "family": fam.value,
        "p1": fit.model.p1,
        "p2": fit.model.p2,
        "threshold": threshold,
        "lambda": lam,
        "n": fit.n,
        "alpha": alpha,
        "capital": res.capital,
        "plugin_capital": res.step1_capital,
        "median_of_medians": res.median_of_medians,
        "weighted_mean": res.weighted_mean,
        "ratio": res.ratio,
        "c": res.c,
        "discarded_ellipses": res.discarded_ellipses,
        "n_medians": res.n_medians,
    })


def _study_config_from_file(path: Path) -> tuple[StudyConfig, dict]:
    try:
        with path.open("rb") as fh:
            doc = tomli.load(fh)
    except (OSError, tomli.TOMLDecodeError) as exc:
        _fail(_VALIDATION, f"cannot parse study file: {exc}")
    try:
        fam = SeverityFamily.parse(doc["family"])
        truth = SeverityModel(fam, float(doc["p1"]), float(doc["p2"]),
                              doc.get("threshold"))
        freq = FrequencyModel(float(doc["lambda"]), int(doc.get("years", 10)))
        contamination = None
        if "contamination" in doc:
            cspec = doc["contamination"]
            contamination = ContaminationSpec(
                tail=cspec.get("tail", "right"),
                epsilon=float(cspec.get("epsilon", 0.05)),
                joint_p=float(cspec.get("joint_p", 0.90)),
            )
        config = StudyConfig(
            truth=truth,
            freq=freq,
            replications=int(doc.get("replications", 1000)),
            alphas=tuple(doc.get("alphas", [0.999, 0.9997])),
            estimators=tuple(doc.get("estimators", ["mle", "rce"])),
            contamination=contamination,
            lambda_only=bool(doc.get("lambda_only", False)),
            master_seed=int(doc.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError, ParameterDomainError) as exc:
        _fail(_VALIDATION, f"invalid study file: {exc!r}")
    return config, doc


@main.command("simulate")
@click.argument("studyfile", type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Output directory for CSV tables and figures.")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--strict", is_flag=True,
              help="Exit nonzero when study quality is degraded.")
def cmd_simulate(studyfile, out, jobs, strict):
    """Run a replication study described by a TOML study file."""
    config, _ = _study_config_from_file(studyfile)
    out.mkdir(parents=True, exist_ok=True)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            result = run_study(config, n_jobs=jobs)
        except RuntimeError as exc:
            _fail(_NUMERIC, str(exc))
    quality = [w for w in caught if "replications failed" in str(w.message)]
    csv_path = report.write_study_csv(result, out / "study.csv")
    fig_path = report.render_study_figure(result, out / "study.png")
    click.echo(f"wrote {csv_path} and {fig_path}")
    for warning in quality:
        click.echo(f"warning: {warning.message}", err=True)
    if strict and quality:
        sys.exit(_QUALITY)


@main.command("calibrate-c")
@click.option("--family", required=True)
@click.option("--n", type=int, required=True, help="Target sample size.")
@click.option("--p1", type=float, required=True)
@click.option("--p2", type=float, required=True)
@click.option("--threshold", type=float, default=None)
@click.option("--replications", type=int, default=1000, show_default=True)
@click.option("--alpha", type=float, default=0.999, show_default=True)
@click.option("--years", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--no-verify", is_flag=True)
def cmd_calibrate_c(family, n, p1, p2, threshold, replications, alpha, years,
                    seed, jobs, no_verify):
    """Search the convexity exponent that minimizes capital bias."""
    _alpha_option(alpha)
    model = _model_from_flags(family, p1, p2, threshold)
    try:
        rep = calibrate_c(model.family, n, model, replications=replications,
                          master_seed=seed, alpha=alpha, years=years,
                          n_jobs=jobs, verify=not no_verify)
    except (RuntimeError, ParameterDomainError) as exc:
        _fail(_NUMERIC, str(exc))
    _echo_json({
        "family": model.family.value,
        "n": n,
        "c": rep.c,
        "bias_pct": rep.bias_pct,
        "ok": rep.ok,
        "verification_bias_pct": rep.verification_bias_pct,
    })
    if not rep.ok:
        sys.exit(_NUMERIC)


@main.command("convexity-scan")
@click.option("--family", required=True)
@click.option("--p1", type=float, required=True)
@click.option("--p2", type=float, required=True)
@click.option("--threshold", type=float, default=None)
@click.option("--vary", type=click.Choice(["p1", "p2"]), required=True,
              help="Which parameter to sweep.")
@click.option("--param-min", type=float, required=True)
@click.option("--param-max", type=float, required=True)
@click.option("--param-steps", type=int, default=21, show_default=True)
@click.option("--p-grid", default="0.999,0.99997", show_default=True,
              help="Comma-separated quantile levels.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
def cmd_convexity_scan(family, p1, p2, threshold, vary, param_min, param_max,
                       param_steps, p_grid, out):
    """Severity VaR versus one parameter, with a convexity classification."""
    fam = _parse_family(family)
    try:
        levels = [float(tok) for tok in p_grid.split(",") if tok.strip()]
    except ValueError:
        _fail(_VALIDATION, "unparseable --p-grid")
    for p in levels:
        _alpha_option(p)
    if param_steps < 3:
        _fail(_VALIDATION, "--param-steps must be at least 3")
    values = np.linspace(param_min, param_max, param_steps)
    rows = []
    for p in levels:
        for pv in values:
            args = (pv, p2) if vary == "p1" else (p1, pv)
            try:
                model = SeverityModel(fam, *args, threshold)
                rows.append((pv, p, quantile(model, p)))
            except ParameterDomainError as exc:
                _fail(_VALIDATION, str(exc))
    out.mkdir(parents=True, exist_ok=True)
    csv_path = report.write_convexity_csv(rows, out / "convexity.csv")
    fig_path = report.render_convexity_figure(rows, out / "convexity.png")
    labels = {}
    for p in levels:
        var = np.array([v for pv, pp, v in rows if pp == p])
        second = np.diff(var, 2)
        band = 1e-6 * np.max(np.abs(var))
        if np.all(np.abs(second) <= band):
            labels[p] = "linear"
        elif np.all(second >= -band):
            labels[p] = "convex"
        elif np.all(second <= band):
            labels[p] = "concave"
        else:
            labels[p] = "mixed"
    click.echo(f"wrote {csv_path} and {fig_path}")
    _echo_json({"vary": vary, "classification": labels})


if __name__ == "__main__":
    main()
