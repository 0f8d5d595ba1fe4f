"""Parameter-sweep engine: JSON config in, CSV rows + summary JSON out.

A sweep evaluates every (axis value x scenario x metric x method) combination
that is defined, in deterministic order. The CSV is a pure function of the
config content (including the Monte-Carlo master seed); parallel execution
fans axis points out to a process pool and reassembles rows in order, so the
output is byte-identical for any worker count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from . import analytic, metrics, montecarlo
from .analytic import ErgodicSeriesControl, OutageInputs
from .model import (
    ChannelConfig,
    GeometryConfig,
    LinkBudget,
    LosMixture,
    Method,
    MetricEstimate,
    RateTargets,
    Scenario,
    dbm_to_watts,
    validate,
)
from .specfun import ConvergenceError

SCHEMA_VERSION = 1

CSV_COLUMNS = [
    "axis_name", "axis_value", "scenario", "metric", "method",
    "estimate", "raw_unclamped", "ci_low", "ci_high",
    "trials", "seed", "series_truncation_error",
]

_AXES = (
    "pu_dbm", "sigma2_dbm", "r0", "big_r", "big_d", "alpha", "m",
    "r_w", "r_v", "r_o", "r_ow", "r_ov",
)

_METRICS = ("outage", "ergodic", "outage_sum_rate", "spectrum_efficiency")


class ConfigError(ValueError):
    """Unusable sweep configuration; the message names the offending field."""


@dataclass(frozen=True)
class SweepSpec:
    geometry: GeometryConfig
    channel: ChannelConfig
    budget: LinkBudget
    rates: RateTargets
    axis: str
    values: tuple
    scenarios: tuple
    metrics: tuple
    methods: tuple
    trials: int = 0
    master_seed: int = 0
    config_sha256: str = ""


def _take(obj: dict, field: str, default=None, required=False):
    if field in obj:
        return obj.pop(field)
    if required:
        raise ConfigError(f"missing required field {field!r}")
    return default


def _parse_base(base: dict):
    geo = _take(base, "geometry", {}) or {}
    ch = _take(base, "channel", {}) or {}
    bud = _take(base, "budget", {}) or {}
    rt = _take(base, "rates", {}) or {}
    if base:
        raise ConfigError(f"unknown base sections: {sorted(base)}")
    try:
        geometry = GeometryConfig(**geo)
        mix = ch.pop("los_mix", None)
        channel = ChannelConfig(
            los_mix=LosMixture(**mix) if mix is not None else None, **ch
        )
        budget = LinkBudget(
            pu=dbm_to_watts(float(_take(bud, "pu_dbm", 30.0))),
            sigma2=dbm_to_watts(float(_take(bud, "sigma2_dbm", -90.0))),
            **bud,
        )
        rates = RateTargets(**rt)
    except TypeError as exc:
        raise ConfigError(f"bad base parameter: {exc}") from exc
    return geometry, channel, budget, rates


def load_spec(text: str) -> SweepSpec:
    """Parse and validate a sweep config JSON document."""
    sha = hashlib.sha256(text.encode()).hexdigest()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    schema = doc.pop("schema", None)
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"field 'schema' must be {SCHEMA_VERSION}, got {schema!r}")

    geometry, channel, budget, rates = _parse_base(doc.pop("base", {}) or {})

    axis = doc.pop("axis", None)
    if axis not in _AXES:
        raise ConfigError(f"field 'axis' must be one of {_AXES}, got {axis!r}")
    values = doc.pop("values", None)
    if not isinstance(values, list) or not values:
        raise ConfigError("field 'values' must be a nonempty list")
    values = tuple(float(v) for v in values)
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("field 'values' must be strictly increasing")

    try:
        scenarios = tuple(Scenario(s) for s in doc.pop("scenarios", ()))
        methods = tuple(Method(m) for m in doc.pop("methods", ()))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not scenarios:
        raise ConfigError("field 'scenarios' must be a nonempty list")
    if not methods:
        raise ConfigError("field 'methods' must be a nonempty list")
    mets = tuple(doc.pop("metrics", ()))
    bad = [m for m in mets if m not in _METRICS]
    if bad or not mets:
        raise ConfigError(f"field 'metrics' must be a nonempty subset of {_METRICS}")

    has_seed = "masterSeed" in doc
    trials = int(doc.pop("trials", 0))
    master_seed = int(doc.pop("masterSeed", 0))
    if Method.MONTE_CARLO in methods:
        if trials <= 0:
            raise ConfigError("MonteCarlo runs require a positive 'trials' field")
        if not has_seed:
            raise ConfigError("MonteCarlo runs require a 'masterSeed' field")
    if doc:
        raise ConfigError(f"unknown config fields: {sorted(doc)}")

    report = validate(geometry, channel, budget, rates)
    if not report.ok:
        raise ConfigError("; ".join(report.violations))
    return SweepSpec(
        geometry, channel, budget, rates, axis, values,
        scenarios, mets, methods, trials, master_seed, sha,
    )


def load_base(text: str):
    """Base parameters + (trials, masterSeed) from a config document.

    Accepts full sweep configs (axis and row-selection fields are ignored);
    used by the single-point and validate commands.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if doc.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"field 'schema' must be {SCHEMA_VERSION}")
    geometry, channel, budget, rates = _parse_base(dict(doc.get("base") or {}))
    return geometry, channel, budget, rates, int(doc.get("trials", 0)), int(doc.get("masterSeed", 0))


def inputs_at(spec: SweepSpec, value: float, scenario: Scenario) -> OutageInputs:
    """Base parameters with the swept axis overridden to ``value``."""
    g, ch, bud, rt = spec.geometry, spec.channel, spec.budget, spec.rates
    ax = spec.axis
    if ax == "pu_dbm":
        bud = replace(bud, pu=dbm_to_watts(value))
    elif ax == "sigma2_dbm":
        bud = replace(bud, sigma2=dbm_to_watts(value))
    elif ax in ("r0", "big_r", "big_d"):
        g = replace(g, **{ax: value})
    elif ax in ("alpha", "m"):
        ch = replace(ch, **{ax: value})
    else:
        rt = replace(rt, **{ax: value})
    return OutageInputs(g, ch, bud, rt, scenario)


_CTL = ErgodicSeriesControl()


def _exact_outage(inputs: OutageInputs) -> MetricEstimate:
    if inputs.channel.los_mix is not None:
        return analytic.outage_los_mixture(inputs)
    return analytic.outage_exact(inputs, diagnostics=True)


def evaluate_cell(spec: SweepSpec, inputs: OutageInputs, metric: str,
                  method: Method):
    """One (scenario, metric, method) evaluation; None when undefined."""
    s = inputs.scenario
    noma = s in (Scenario.NOMA_FAR, Scenario.NOMA_NEAR)
    if metric == "outage":
        if method is Method.EXACT:
            return _exact_outage(inputs)
        if method is Method.ASYMPTOTIC:
            return analytic.outage_asymptotic(inputs) if noma else None
        if method is Method.NO_FADING_LIMIT:
            return analytic.outage_no_fading(inputs) if noma else None
        return montecarlo.estimate(
            inputs, "outage", spec.trials, montecarlo.SeedPolicy(spec.master_seed)
        )
    if metric == "ergodic":
        if method is Method.EXACT:
            if inputs.channel.los_mix is not None or s is Scenario.NOMA_FAR:
                return None
            if s is Scenario.NOMA_NEAR:
                return analytic.ergodic_near_noma(inputs, _CTL)
            return analytic.ergodic_oma(inputs, _CTL)
        if method is Method.ASYMPTOTIC:
            return analytic.ergodic_far_noma(inputs) if s is Scenario.NOMA_FAR else None
        if method is Method.MONTE_CARLO:
            return montecarlo.estimate(
                inputs, "ergodic", spec.trials, montecarlo.SeedPolicy(spec.master_seed)
            )
        return None
    if metric == "outage_sum_rate":
        if method is Method.EXACT:
            pv = _exact_outage(replace(inputs, scenario=Scenario.NOMA_FAR))
            pw = _exact_outage(replace(inputs, scenario=Scenario.NOMA_NEAR))
            value = metrics.outage_sum_rate(pv.value, pw.value, inputs.rates)
            return MetricEstimate(
                value, Method.EXACT,
                diagnostics={"p_far": pv.value, "p_near": pw.value},
            )
        if method is Method.MONTE_CARLO:
            return montecarlo.estimate(
                inputs, "outage_sum_rate", spec.trials,
                montecarlo.SeedPolicy(spec.master_seed),
            )
        return None
    if metric == "spectrum_efficiency":
        if method is not Method.EXACT or inputs.channel.los_mix is not None:
            return None
        tau, gap1, gap2 = analytic.spectrum_efficiency(inputs, _CTL)
        return MetricEstimate(
            tau, Method.EXACT,
            diagnostics={"gap_vs_oma1": gap1, "gap_vs_oma2": gap2},
        )
    raise ConfigError(f"unknown metric {metric!r}")


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _row(spec: SweepSpec, value: float, scenario: Scenario, metric: str,
         method: Method, est: MetricEstimate, error: str = "") -> dict:
    mc = est is not None and est.method is Method.MONTE_CARLO
    diag = est.diagnostics if est is not None else {}
    trunc = diag.get("series_truncation_error")
    if trunc is None and "converged" in diag:
        trunc = 0.0
    row = {
        "axis_name": spec.axis,
        "axis_value": _fmt(value),
        "scenario": scenario.value,
        "metric": metric,
        "method": method.value,
        "estimate": "" if est is None else _fmt(est.value),
        "raw_unclamped": "" if est is None else _fmt(est.raw),
        "ci_low": _fmt(est.value - est.ci_half_width) if mc else "",
        "ci_high": _fmt(est.value + est.ci_half_width) if mc else "",
        "trials": str(spec.trials) if mc else "",
        "seed": str(spec.master_seed) if mc else "",
        "series_truncation_error": _fmt(trunc) if trunc is not None else "",
    }
    row["_diag"] = diag
    row["_error"] = error
    return row


def rows_for_value(spec: SweepSpec, value: float) -> list:
    """All defined rows at one axis point, in deterministic order."""
    out = []
    for scenario in spec.scenarios:
        inputs = inputs_at(spec, value, scenario)
        for metric in spec.metrics:
            for method in spec.methods:
                try:
                    est = evaluate_cell(spec, inputs, metric, method)
                except ConvergenceError as exc:
                    out.append(_row(spec, value, scenario, metric, method,
                                    None, error=str(exc)))
                    continue
                if est is not None:
                    out.append(_row(spec, value, scenario, metric, method, est))
    return out


def _summarize(spec: SweepSpec, rows: list, wall_time: float) -> dict:
    flags = {
        "infeasible_rows": 0,
        "clamped_rows": 0,
        "convergence_failures": 0,
        "printed_form_discrepancy_max": 0.0,
        "series_truncation_error_max": 0.0,
    }
    errors = []
    for r in rows:
        d = r["_diag"]
        if d.get("infeasible"):
            flags["infeasible_rows"] += 1
        if r["raw_unclamped"] and r["estimate"] and r["raw_unclamped"] != r["estimate"]:
            flags["clamped_rows"] += 1
        if r["_error"]:
            flags["convergence_failures"] += 1
            errors.append({k: r[k] for k in
                           ("axis_value", "scenario", "metric", "method")}
                          | {"error": r["_error"]})
        if d.get("converged") is False:
            flags["convergence_failures"] += 1
        disc = 0.0
        if "printed_vs_integral" in d:
            disc = abs(d["printed_vs_integral"])
        if "printed_half_prefactor_form" in d and r["estimate"]:
            disc = max(disc, abs(d["printed_half_prefactor_form"] - float(r["estimate"])))
        if "printed_form" in d and r["estimate"]:
            disc = max(disc, abs(d["printed_form"] - float(r["estimate"])))
        flags["printed_form_discrepancy_max"] = max(
            flags["printed_form_discrepancy_max"], disc
        )
        if r["series_truncation_error"]:
            flags["series_truncation_error_max"] = max(
                flags["series_truncation_error_max"],
                float(r["series_truncation_error"]),
            )
    summary = {
        "schema": SCHEMA_VERSION,
        "config_sha256": spec.config_sha256,
        "rows": len(rows),
        "wall_time_s": wall_time,
        "flags": flags,
    }
    if errors:
        summary["errors"] = errors
    return summary


def run_sweep(spec: SweepSpec, jobs: int = 1):
    """Evaluate the sweep; returns (rows, summary).

    ``jobs`` > 1 fans axis points out to a process pool; row order and values
    are identical for any worker count.
    """
    start = time.monotonic()
    if jobs > 1 and len(spec.values) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(rows_for_value,
                                   [spec] * len(spec.values), spec.values))
    else:
        chunks = [rows_for_value(spec, v) for v in spec.values]
    rows = [r for chunk in chunks for r in chunk]
    summary = _summarize(spec, rows, time.monotonic() - start)
    return rows, summary


def write_csv(rows: list, stream) -> None:
    writer = csv.DictWriter(stream, fieldnames=CSV_COLUMNS, extrasaction="ignore",
                            lineterminator="\r\n")
    writer.writeheader()
    writer.writerows(rows)


def csv_text(rows: list) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()
