"""Command-line front end: sweep, point, and validate subcommands.

Exit codes: 0 success, 1 config error, 2 convergence failure in any row when
--strict is set.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import replace

import click

from . import sweep as sweep_mod
from .analytic import OutageInputs
from .model import Method, Scenario, validate as validate_model
from .sweep import ConfigError, SweepSpec


def _read_config(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


@click.group()
def main():
    """Outage, ergodic-rate and spectrum-efficiency sweeps for a NOMA
    UAV downlink with randomly placed receivers."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_path", default=None, type=click.Path(),
              help="CSV output path (default: stdout); the summary JSON is "
                   "written next to it with a .summary.json suffix.")
@click.option("--jobs", default=None, type=int,
              help="Worker processes (default: machine parallelism).")
@click.option("--trials", default=None, type=int, help="Override config trials.")
@click.option("--seed", default=None, type=int, help="Override config masterSeed.")
@click.option("--strict", is_flag=True,
              help="Exit 2 if any row fails to converge.")
def sweep(config_path, out_path, jobs, trials, seed, strict):
    """Run the sweep described by a JSON config; emit CSV + summary JSON."""
    try:
        spec = sweep_mod.load_spec(_read_config(config_path))
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    if trials is not None:
        spec = replace(spec, trials=trials)
    if seed is not None:
        spec = replace(spec, master_seed=seed)
    if jobs is None:
        jobs = os.cpu_count() or 1
    rows, summary = sweep_mod.run_sweep(spec, jobs=jobs)
    text = sweep_mod.csv_text(rows)
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        with open(f"{out_path}.summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    else:
        click.echo(text, nl=False)
        click.echo(json.dumps(summary, indent=2), err=True)
    if strict and summary["flags"]["convergence_failures"] > 0:
        sys.exit(2)


def _estimate_json(est) -> dict:
    out = {"value": est.value, "method": est.method.value}
    if est.trials is not None:
        out["trials"] = est.trials
    if est.ci_half_width is not None:
        out["ci_half_width"] = est.ci_half_width
    if est.raw_value is not None:
        out["raw_unclamped"] = est.raw_value
    if est.diagnostics:
        out["diagnostics"] = {k: v for k, v in est.diagnostics.items()}
    return out


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--scenario", required=True,
              type=click.Choice([s.value for s in Scenario]))
@click.option("--metric", default="outage",
              type=click.Choice(["outage", "ergodic", "outage_sum_rate",
                                 "spectrum_efficiency"]))
@click.option("--method", "method_name", default="Exact",
              type=click.Choice([m.value for m in Method]))
@click.option("--trials", default=None, type=int, help="Override config trials.")
@click.option("--seed", default=None, type=int, help="Override config masterSeed.")
@click.option("--compare", is_flag=True,
              help="Run both Exact and MonteCarlo and report the z-score "
                   "of their difference.")
def point(config_path, scenario, metric, method_name, trials, seed, compare):
    """Evaluate one (scenario, metric, method) triple; print JSON."""
    try:
        geometry, channel, budget, rates, cfg_trials, cfg_seed = \
            sweep_mod.load_base(_read_config(config_path))
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    report = validate_model(geometry, channel, budget, rates)
    if not report.ok:
        click.echo("config error: " + "; ".join(report.violations), err=True)
        sys.exit(1)
    trials = trials if trials is not None else cfg_trials
    seed = seed if seed is not None else cfg_seed
    spec = SweepSpec(geometry, channel, budget, rates, "pu_dbm", (0.0,),
                     (Scenario(scenario),), (metric,), (Method(method_name),),
                     trials=trials, master_seed=seed)
    inputs = OutageInputs(geometry, channel, budget, rates, Scenario(scenario))

    if compare:
        exact = sweep_mod.evaluate_cell(spec, inputs, metric, Method.EXACT)
        mc = sweep_mod.evaluate_cell(spec, inputs, metric, Method.MONTE_CARLO)
        if exact is None or mc is None:
            click.echo("config error: --compare needs both an Exact and a "
                       "MonteCarlo route for this metric", err=True)
            sys.exit(1)
        sigma = (mc.ci_half_width or 0.0) / 1.96
        z = (exact.value - mc.value) / sigma if sigma > 0 else float("inf")
        click.echo(json.dumps({
            "exact": _estimate_json(exact),
            "monte_carlo": _estimate_json(mc),
            "z_score": z,
        }, indent=2))
        return

    est = sweep_mod.evaluate_cell(spec, inputs, metric, Method(method_name))
    if est is None:
        click.echo(f"config error: {method_name} is not defined for "
                   f"({scenario}, {metric})", err=True)
        sys.exit(1)
    click.echo(json.dumps(_estimate_json(est), indent=2))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
def validate(config_path):
    """Check the standing assumptions and print the feasibility report."""
    try:
        geometry, channel, budget, rates, _, _ = \
            sweep_mod.load_base(_read_config(config_path))
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    report = validate_model(geometry, channel, budget, rates)
    click.echo(json.dumps({
        "ok": report.ok,
        "violations": list(report.violations),
        "feasible": report.feasible,
    }, indent=2))
    if not report.feasible:
        click.echo("warning: NOMA far-user power split is infeasible; "
                   "its outage probability is identically 1", err=True)
    if not report.ok:
        sys.exit(1)


if __name__ == "__main__":
    main()
