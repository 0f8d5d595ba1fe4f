"""Secondary figures of merit derived from metric curves.

Diversity order and high-SNR slope are least-squares slope fits over the top
window of a curve; the outage sum rate combines the pair outage probabilities
with their target rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import analytic
from .analytic import ErgodicSeriesControl, OutageInputs
from .model import RateTargets, Scenario, dbm_to_watts

LOG2_10 = math.log2(10.0)


class SlopeWindowError(ValueError):
    """Raised when a fit window is too short or contains unusable values."""


@dataclass(frozen=True)
class MetricCurve:
    """Metric values sampled on a strictly increasing transmit-SNR grid (dB)."""

    x_db: tuple
    y: tuple
    kind: str  # "outage" or "rate"
    ci_half_width: tuple = None  # set for Monte-Carlo curves

    def __post_init__(self):
        if len(self.x_db) != len(self.y):
            raise ValueError("x and y must have the same length")
        if any(b <= a for a, b in zip(self.x_db, self.x_db[1:])):
            raise ValueError("SNR grid must be strictly increasing")
        if self.ci_half_width is not None and len(self.ci_half_width) != len(self.y):
            raise ValueError("ci_half_width must match y in length")


def diversity_order(curve: MetricCurve, window: int = 5) -> float:
    """Negative log-log slope of outage vs SNR over the last ``window`` points."""
    if window < 3 or len(curve.x_db) < window:
        raise SlopeWindowError("diversity fit needs at least 3 points in the window")
    y = np.asarray(curve.y[-window:], dtype=float)
    if np.any(y <= 0.0):
        raise SlopeWindowError(
            "outage underflows to zero in the fit window; lower the SNR ceiling or raise trials"
        )
    if curve.ci_half_width is not None:
        ci = np.asarray(curve.ci_half_width[-window:], dtype=float)
        if np.any(ci >= 0.1 * y):
            raise SlopeWindowError(
                "Monte-Carlo noise too large for a diversity fit; raise trials"
            )
    x = np.asarray(curve.x_db[-window:], dtype=float) / 10.0  # log10(SNR)
    slope = np.polyfit(x, np.log10(y), 1)[0]
    return -slope


def high_snr_slope(curve: MetricCurve, window: int = 5) -> float:
    """Slope of rate (BPCU) vs log2(SNR) over the last ``window`` points."""
    if window < 3 or len(curve.x_db) < window:
        raise SlopeWindowError("slope fit needs at least 3 points in the window")
    x = np.asarray(curve.x_db[-window:], dtype=float) / 10.0 * LOG2_10
    y = np.asarray(curve.y[-window:], dtype=float)
    return float(np.polyfit(x, y, 1)[0])


def outage_sum_rate(p_v: float, p_w: float, rates: RateTargets) -> float:
    """(1 - P_v) R_v + (1 - P_w) R_w in BPCU."""
    for p in (p_v, p_w):
        if not 0.0 <= p <= 1.0:
            raise ValueError("outage probabilities must lie in [0, 1]")
    return (1.0 - p_v) * rates.r_v + (1.0 - p_w) * rates.r_w


_EXPECTED = {
    Scenario.NOMA_NEAR: 1.0,
    Scenario.NOMA_FAR: 0.0,
    Scenario.OMA_PAIR_NEAR: 0.5,
    Scenario.OMA_PAIR_FAR: 0.5,
    Scenario.OMA_SINGLE: 1.0,
}


def _with_pu(inputs: OutageInputs, pu_dbm: float) -> OutageInputs:
    return replace(inputs, budget=replace(inputs.budget, pu=dbm_to_watts(pu_dbm)))


def outage_curve(inputs: OutageInputs, pu_grid_dbm: Sequence[float]) -> MetricCurve:
    vals = [analytic.outage_exact(_with_pu(inputs, p)).value for p in pu_grid_dbm]
    snr_db = tuple(p - 10.0 * math.log10(inputs.budget.sigma2) for p in pu_grid_dbm)
    return MetricCurve(tuple(snr_db), tuple(vals), "outage")


def rate_curve(inputs: OutageInputs, pu_grid_dbm: Sequence[float],
               ctl: ErgodicSeriesControl = ErgodicSeriesControl()) -> MetricCurve:
    vals = []
    for p in pu_grid_dbm:
        x = _with_pu(inputs, p)
        if x.scenario is Scenario.NOMA_NEAR:
            vals.append(analytic.ergodic_near_noma(x, ctl).value)
        elif x.scenario is Scenario.NOMA_FAR:
            vals.append(analytic.ergodic_far_noma(x).value)
        else:
            vals.append(analytic.ergodic_oma(x, ctl).value)
    snr_db = tuple(p - 10.0 * math.log10(inputs.budget.sigma2) for p in pu_grid_dbm)
    return MetricCurve(tuple(snr_db), tuple(vals), "rate")


def table_one(inputs: OutageInputs, pu_grid_dbm: Sequence[float],
              window: int = 5,
              ctl: ErgodicSeriesControl = ErgodicSeriesControl()) -> dict:
    """Estimated diversity order D and high-SNR slope S for all five scenarios.

    The grid must span at least 3 decades of SNR. Returns, per scenario,
    the fits alongside the reference values (D = m; S per access mode).
    """
    if len(pu_grid_dbm) < window or pu_grid_dbm[-1] - pu_grid_dbm[0] < 30.0:
        raise SlopeWindowError("table-one grids must span >= 3 decades of SNR")
    m = inputs.channel.m
    out = {}
    for scen in Scenario:
        base = replace(inputs, scenario=scen)
        d = diversity_order(outage_curve(base, pu_grid_dbm), window)
        s = high_snr_slope(rate_curve(base, pu_grid_dbm, ctl), window)
        out[scen.value] = {
            "D": d,
            "S": s,
            "D_expected": float(m),
            "S_expected": _EXPECTED[scen],
        }
    return out
