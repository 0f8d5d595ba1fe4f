"""Domain parameters, derived thresholds and feasibility checks.

All power quantities are stored in watts; the CLI converts dBm on ingestion.
Every type is an immutable dataclass and every function here is pure, so the
whole module is safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0:
        raise ValueError("power must be positive")
    return 10.0 * math.log10(watts) + 30.0


class Scenario(Enum):
    """The five receiver roles: NOMA pair, single-user OMA, two-user OMA."""

    NOMA_NEAR = "NomaNear"
    NOMA_FAR = "NomaFar"
    OMA_SINGLE = "OmaSingle"
    OMA_PAIR_NEAR = "OmaPairNear"
    OMA_PAIR_FAR = "OmaPairFar"


class Method(Enum):
    EXACT = "Exact"
    ASYMPTOTIC = "Asymptotic"
    NO_FADING_LIMIT = "NoFadingLimit"
    MONTE_CARLO = "MonteCarlo"


@dataclass(frozen=True)
class GeometryConfig:
    """Sphere radii: exclusion radius r0, near-ball radius big_r, outer radius big_d.

    Near receivers live in the ball r0 < r < big_r, far receivers in the
    shell big_r < r < big_d, both with density proportional to r^2.
    """

    r0: float = 1.0
    big_r: float = 50.0
    big_d: float = 100.0


@dataclass(frozen=True)
class LosMixture:
    """Bernoulli mixture of a LoS fading branch (m = m_los) and NLoS (m = 1)."""

    p_los: float
    m_los: float


@dataclass(frozen=True)
class ChannelConfig:
    alpha: float = 4.0          # path-loss exponent
    m: float = 1.0              # Nakagami fading shape (1 = Rayleigh)
    los_mix: Optional[LosMixture] = None


@dataclass(frozen=True)
class LinkBudget:
    pu: float                   # UAV transmit power, watts
    sigma2: float               # AWGN power, watts
    a_w2: float = 0.4           # near-user power fraction
    a_v2: float = 0.6           # far-user power fraction


@dataclass(frozen=True)
class RateTargets:
    """Target rates in BPCU. OMA thresholds carry the TDMA factor 2 in the exponent."""

    r_w: float = 1.5
    r_v: float = 1.0
    r_o: float = 1.0
    r_ow: float = 1.5
    r_ov: float = 1.0

    @property
    def eps_w(self) -> float:
        return 2.0 ** self.r_w - 1.0

    @property
    def eps_v(self) -> float:
        return 2.0 ** self.r_v - 1.0

    @property
    def eps_o(self) -> float:
        return 2.0 ** (2.0 * self.r_o) - 1.0

    @property
    def eps_ow(self) -> float:
        return 2.0 ** (2.0 * self.r_ow) - 1.0

    @property
    def eps_ov(self) -> float:
        return 2.0 ** (2.0 * self.r_ov) - 1.0


@dataclass(frozen=True)
class MetricEstimate:
    """A metric value tagged with how it was produced.

    ``value`` is clamped to [0, 1] for probabilities; the pre-clamp number is
    kept in ``raw_value``. Monte-Carlo estimates carry the trial count and a
    95% confidence half-width.
    """

    value: float
    method: Method
    trials: Optional[int] = None
    ci_half_width: Optional[float] = None
    raw_value: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def raw(self) -> float:
        return self.value if self.raw_value is None else self.raw_value


def clamp_probability(raw: float, method: Method, **kwargs) -> MetricEstimate:
    value = min(1.0, max(0.0, raw))
    return MetricEstimate(value=value, method=method, raw_value=raw, **kwargs)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple
    feasible: bool

    def __bool__(self) -> bool:
        return self.ok


def is_feasible(budget: LinkBudget, rates: RateTargets) -> bool:
    """NOMA far-user decodability: a_v2 - eps_v * a_w2 must be positive."""
    return budget.a_v2 - rates.eps_v * budget.a_w2 > 0.0


def validate(
    geometry: GeometryConfig,
    channel: ChannelConfig,
    budget: LinkBudget,
    rates: RateTargets,
) -> ValidationReport:
    """Check the standing assumptions; infeasibility is reported, not an error."""
    bad = []
    g = geometry
    if not (0.0 < g.r0 < g.big_r < g.big_d):
        bad.append("geometry requires 0 < r0 < R < D")
    if not all(map(math.isfinite, (g.r0, g.big_r, g.big_d))):
        bad.append("geometry radii must be finite")
    if channel.alpha < 2.0:
        bad.append("path-loss exponent must be >= 2")
    if channel.m < 1.0:
        bad.append("fading parameter m must be >= 1")
    if channel.los_mix is not None:
        mix = channel.los_mix
        if not (0.0 <= mix.p_los <= 1.0):
            bad.append("LoS probability must lie in [0, 1]")
        if mix.m_los < 1.0:
            bad.append("LoS fading parameter must be >= 1")
    if budget.pu <= 0.0:
        bad.append("transmit power must be positive")
    if budget.sigma2 <= 0.0:
        bad.append("noise power must be positive")
    if budget.a_w2 <= 0.0 or budget.a_v2 <= 0.0:
        bad.append("power fractions must be positive")
    elif abs(budget.a_w2 + budget.a_v2 - 1.0) > 1e-9:
        bad.append("power fractions must sum to 1")
    elif budget.a_v2 <= budget.a_w2:
        bad.append("far user must receive the larger power share")
    for name in ("r_w", "r_v", "r_o", "r_ow", "r_ov"):
        if getattr(rates, name) <= 0.0:
            bad.append(f"target rate {name} must be positive")
    return ValidationReport(
        ok=not bad,
        violations=tuple(bad),
        feasible=is_feasible(budget, rates),
    )


def noma_threshold_scale(budget: LinkBudget, rates: RateTargets, which: str) -> Optional[float]:
    """Threshold scale M for the NOMA outage events.

    ``which`` is "far" (M_v) or "near" (M_w* = max(M_v, M_w)). Returns None
    when the far-user power split is infeasible, in which case outage is
    identically one.
    """
    denom = budget.a_v2 - rates.eps_v * budget.a_w2
    if denom <= 0.0:
        return None
    m_v = rates.eps_v / (budget.pu * denom)
    if which == "far":
        return m_v
    if which == "near":
        m_w = rates.eps_w / (budget.pu * budget.a_w2)
        return max(m_v, m_w)
    raise ValueError(f"unknown threshold kind: {which!r}")


def rician_k_to_nakagami_m(k: float) -> float:
    """Map a Rician K-factor to the matching Nakagami shape (k+1)^2/(2k+1)."""
    if k < 0.0:
        raise ValueError("Rician K-factor must be nonnegative")
    return (k + 1.0) ** 2 / (2.0 * k + 1.0)


def require_integer_m(m: float) -> int:
    """Closed-form evaluators sum n = 0..m-1 and need an integer shape."""
    mi = round(m)
    if abs(m - mi) > 1e-9 or mi < 1:
        raise ValueError(f"closed-form evaluation requires a positive integer m, got {m}")
    return int(mi)
