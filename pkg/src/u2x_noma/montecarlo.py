"""Monte-Carlo oracle: placement + fading sampling and per-trial decode logic.

Trials are organized in fixed-size blocks. Block b of a given scenario draws
from a Philox counter stream advanced as a pure function of
(master seed, scenario, b), so estimates are bit-identical regardless of
execution order or worker count. Draw order inside a block: distances first,
then gains (then the LoS branch picks when a mixture is configured).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .analytic import OutageInputs
from .model import (
    GeometryConfig,
    Method,
    MetricEstimate,
    Scenario,
)

BLOCK_SIZE = 1 << 16

_SCENARIO_CODE = {
    Scenario.NOMA_NEAR: 1,
    Scenario.NOMA_FAR: 2,
    Scenario.OMA_SINGLE: 3,
    Scenario.OMA_PAIR_NEAR: 4,
    Scenario.OMA_PAIR_FAR: 5,
}


@dataclass(frozen=True)
class SeedPolicy:
    master_seed: int
    block_size: int = BLOCK_SIZE

    def block_rng(self, scenario: Scenario, block: int) -> np.random.Generator:
        bg = np.random.Philox(key=self.master_seed & ((1 << 64) - 1))
        bg.advance(((_SCENARIO_CODE[scenario] << 32) + block) << 64)
        return np.random.Generator(bg)


@dataclass(frozen=True)
class TrialOutcome:
    dist_near: float
    dist_far: float
    gain_near: float
    gain_far: float
    outage_near: bool
    outage_far: bool
    rate_near: float
    rate_far: float


def sample_distance(geometry: GeometryConfig, region: str, u):
    """Inverse-CDF sample of the r^2-law distance; region is 'near' or 'far'."""
    if region == "near":
        a, b = geometry.r0, geometry.big_r
    elif region == "far":
        a, b = geometry.big_r, geometry.big_d
    else:
        raise ValueError(f"unknown region {region!r}")
    return (a ** 3 + np.asarray(u) * (b ** 3 - a ** 3)) ** (1.0 / 3.0)


def sample_gain(m: float, rng: np.random.Generator, size=None):
    """Unit-mean Nakagami-m power gain: Gamma(shape=m, scale=1/m)."""
    if m <= 0:
        raise ValueError("fading parameter must be positive")
    return rng.gamma(m, 1.0 / m, size)


def path_loss(d, r0: float, alpha: float):
    """Bounded path loss: d^-alpha clamped at the exclusion radius."""
    return np.maximum(np.asarray(d, dtype=float), r0) ** (-alpha)


def _sample_gains(inputs: OutageInputs, rng: np.random.Generator, n: int):
    mix = inputs.channel.los_mix
    if mix is None:
        return sample_gain(inputs.channel.m, rng, n)
    # draw order: branch picks, then both branch gains
    los = rng.random(n) < mix.p_los
    g_los = sample_gain(mix.m_los, rng, n)
    g_nlos = sample_gain(1.0, rng, n)
    return np.where(los, g_los, g_nlos)


def _block_outcomes(inputs: OutageInputs, rng: np.random.Generator, n: int):
    """(outage_bool, rate) arrays for one block of the scenario in inputs."""
    g, ch, bud, rt = inputs.geometry, inputs.channel, inputs.budget, inputs.rates
    s = inputs.scenario
    region = {
        Scenario.NOMA_NEAR: "near",
        Scenario.OMA_PAIR_NEAR: "near",
        Scenario.NOMA_FAR: "far",
        Scenario.OMA_PAIR_FAR: "far",
    }.get(s)
    if region is None:  # OMA single: whole sphere r0..D
        u = rng.random(n)
        d = (g.r0 ** 3 + u * (g.big_d ** 3 - g.r0 ** 3)) ** (1.0 / 3.0)
    else:
        d = sample_distance(g, region, rng.random(n))
    gain = _sample_gains(inputs, rng, n)
    rho = bud.pu * gain * path_loss(d, g.r0, ch.alpha) / bud.sigma2

    if s is Scenario.NOMA_FAR:
        sinr = bud.a_v2 * rho / (1.0 + bud.a_w2 * rho)
        rate = np.log2(1.0 + sinr)
        return rate < rt.r_v, rate
    if s is Scenario.NOMA_NEAR:
        sinr_sic = bud.a_v2 * rho / (1.0 + bud.a_w2 * rho)
        sinr_own = bud.a_w2 * rho
        outage = (sinr_sic < rt.eps_v) | (sinr_own < rt.eps_w)
        return outage, np.log2(1.0 + sinr_own)
    if s is Scenario.OMA_SINGLE:
        # outage compares the half-rate TDMA share against r_o (SNR < eps_o);
        # the recorded rate is the full-slot log2(1+SNR)
        return rho < rt.eps_o, np.log2(1.0 + rho)
    if s is Scenario.OMA_PAIR_NEAR:
        return rho < rt.eps_ow, 0.5 * np.log2(1.0 + rho)
    if s is Scenario.OMA_PAIR_FAR:
        return rho < rt.eps_ov, 0.5 * np.log2(1.0 + rho)
    raise ValueError(f"unknown scenario {s}")


def run_trial(inputs: OutageInputs, rng: np.random.Generator) -> TrialOutcome:
    """One NOMA pair trial; reference semantics for the vectorized engine."""
    g, ch, bud, rt = inputs.geometry, inputs.channel, inputs.budget, inputs.rates
    d_w = float(sample_distance(g, "near", rng.random()))
    d_v = float(sample_distance(g, "far", rng.random()))
    g_w = float(_sample_gains(inputs, rng, 1)[0])
    g_v = float(_sample_gains(inputs, rng, 1)[0])
    rho_w = bud.pu * g_w * float(path_loss(d_w, g.r0, ch.alpha)) / bud.sigma2
    rho_v = bud.pu * g_v * float(path_loss(d_v, g.r0, ch.alpha)) / bud.sigma2
    sinr_v = bud.a_v2 * rho_v / (1.0 + bud.a_w2 * rho_v)
    sinr_sic = bud.a_v2 * rho_w / (1.0 + bud.a_w2 * rho_w)
    sinr_w = bud.a_w2 * rho_w
    return TrialOutcome(
        dist_near=d_w,
        dist_far=d_v,
        gain_near=g_w,
        gain_far=g_v,
        outage_far=bool(sinr_v < rt.eps_v),
        outage_near=bool(sinr_sic < rt.eps_v or sinr_w < rt.eps_w),
        rate_near=math.log2(1.0 + sinr_w),
        rate_far=math.log2(1.0 + sinr_v),
    )


def _ci_half_width(p_hat: float, n: int) -> float:
    # normal approximation; Wilson for rare events so the width never
    # degenerates to zero at p_hat == 0
    if p_hat >= 1e-3 and (1.0 - p_hat) >= 1e-3:
        return 1.96 * math.sqrt(p_hat * (1.0 - p_hat) / n)
    z = 1.96
    denom = 1.0 + z * z / n
    center = (p_hat + z * z / (2 * n)) / denom
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4 * n * n)) / denom
    return half + abs(center - p_hat)


def estimate(
    inputs: OutageInputs,
    metric: str,
    trials: int,
    seeds: SeedPolicy,
) -> MetricEstimate:
    """Monte-Carlo estimate of 'outage', 'ergodic' or 'outage_sum_rate'.

    Deterministic for fixed (master seed, trials), independent of execution
    order and worker count.
    """
    if trials < 1000:
        raise ValueError("at least 1000 trials are required")
    if metric == "outage_sum_rate":
        pv = estimate(replace(inputs, scenario=Scenario.NOMA_FAR), "outage", trials, seeds)
        pw = estimate(replace(inputs, scenario=Scenario.NOMA_NEAR), "outage", trials, seeds)
        rt = inputs.rates
        value = (1.0 - pv.value) * rt.r_v + (1.0 - pw.value) * rt.r_w
        half = math.hypot(rt.r_v * (pv.ci_half_width or 0.0), rt.r_w * (pw.ci_half_width or 0.0))
        return MetricEstimate(
            value, Method.MONTE_CARLO, trials=trials, ci_half_width=half,
            diagnostics={"p_far": pv.value, "p_near": pw.value},
        )
    if metric not in ("outage", "ergodic"):
        raise ValueError(f"unknown metric {metric!r}")

    total = 0.0
    total_sq = 0.0
    done = 0
    block = 0
    while done < trials:
        n = min(seeds.block_size, trials - done)
        rng = seeds.block_rng(inputs.scenario, block)
        outage, rate = _block_outcomes(inputs, rng, n)
        x = outage.astype(float) if metric == "outage" else rate
        total += float(x.sum())
        total_sq += float((x * x).sum())
        done += n
        block += 1

    mean = total / trials
    if metric == "outage":
        half = _ci_half_width(mean, trials)
    else:
        var = max(total_sq / trials - mean * mean, 0.0)
        half = 1.96 * math.sqrt(var / trials)
    return MetricEstimate(
        mean, Method.MONTE_CARLO, trials=trials, ci_half_width=half, raw_value=mean
    )
