import numpy as np
import pytest

from u2x_noma import metrics
from u2x_noma.analytic import ErgodicSeriesControl, OutageInputs
from u2x_noma.metrics import MetricCurve, SlopeWindowError
from u2x_noma.model import (
    ChannelConfig,
    GeometryConfig,
    LinkBudget,
    RateTargets,
    Scenario,
    dbm_to_watts,
)


def make_inputs(scenario, m=2):
    return OutageInputs(
        geometry=GeometryConfig(),
        channel=ChannelConfig(m=m),
        budget=LinkBudget(pu=1.0, sigma2=dbm_to_watts(-90.0)),
        rates=RateTargets(),
        scenario=scenario,
    )


def power_law_curve(order, scale=1.0):
    x = tuple(np.arange(60.0, 81.0, 2.0))
    y = tuple(scale * (10.0 ** (xi / 10.0)) ** (-order) for xi in x)
    return MetricCurve(x, y, "outage")


def test_diversity_on_synthetic_power_law():
    assert metrics.diversity_order(power_law_curve(2.0)) == pytest.approx(2.0, abs=1e-9)
    assert metrics.diversity_order(power_law_curve(1.0)) == pytest.approx(1.0, abs=1e-9)


def test_slope_estimators_scale_invariant():
    a = metrics.diversity_order(power_law_curve(2.0, scale=1.0))
    b = metrics.diversity_order(power_law_curve(2.0, scale=37.5))
    assert a == pytest.approx(b, abs=1e-12)


def test_diversity_rejects_nonpositive_window():
    x = (10.0, 20.0, 30.0, 40.0, 50.0)
    curve = MetricCurve(x, (1e-3, 1e-4, 1e-5, 0.0, 0.0), "outage")
    with pytest.raises(SlopeWindowError):
        metrics.diversity_order(curve, window=5)


def test_diversity_rejects_noisy_mc_curve():
    x = (10.0, 20.0, 30.0, 40.0, 50.0)
    y = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    curve = MetricCurve(x, y, "outage", ci_half_width=(1e-3,) * 5)
    with pytest.raises(SlopeWindowError):
        metrics.diversity_order(curve, window=5)


def test_window_too_short_rejected():
    curve = power_law_curve(1.0)
    with pytest.raises(SlopeWindowError):
        metrics.diversity_order(curve, window=2)


def test_high_snr_slope_synthetic():
    # rate = log2(SNR) has slope exactly 1
    x = tuple(np.arange(40.0, 61.0, 2.0))
    y = tuple(xi / 10.0 * metrics.LOG2_10 for xi in x)
    assert metrics.high_snr_slope(MetricCurve(x, y, "rate")) == pytest.approx(1.0)


def test_outage_sum_rate_reference_points():
    rt = RateTargets()
    assert metrics.outage_sum_rate(0.0, 0.0, rt) == pytest.approx(2.5)
    assert metrics.outage_sum_rate(1.0, 1.0, rt) == 0.0
    assert metrics.outage_sum_rate(0.5, 0.25, RateTargets(r_v=1.0, r_w=1.5)) == \
        pytest.approx(1.625)
    with pytest.raises(ValueError):
        metrics.outage_sum_rate(-0.1, 0.0, rt)


def test_outage_sum_rate_monotone():
    rt = RateTargets()
    base = metrics.outage_sum_rate(0.2, 0.2, rt)
    assert metrics.outage_sum_rate(0.3, 0.2, rt) < base
    assert metrics.outage_sum_rate(0.2, 0.3, rt) < base


def test_metric_curve_validation():
    with pytest.raises(ValueError):
        MetricCurve((1.0, 2.0), (0.1,), "outage")
    with pytest.raises(ValueError):
        MetricCurve((2.0, 1.0), (0.1, 0.2), "outage")


def test_table_one_rejects_degenerate_grid():
    with pytest.raises(SlopeWindowError):
        metrics.table_one(make_inputs(Scenario.NOMA_FAR), [30.0])
    with pytest.raises(SlopeWindowError):
        metrics.table_one(make_inputs(Scenario.NOMA_FAR),
                          [10.0, 15.0, 20.0, 25.0, 30.0])  # only 2 decades


@pytest.mark.slow
def test_table_one_full_grid_m1():
    grid = list(np.arange(10.0, 51.0, 2.0))
    ctl = ErgodicSeriesControl(k_max=500_000, rel_tol=1e-8)
    table = metrics.table_one(make_inputs(Scenario.NOMA_FAR, m=1), grid, ctl=ctl)
    assert set(table) == {s.value for s in Scenario}
    for row in table.values():
        assert row["D"] == pytest.approx(row["D_expected"], abs=0.3)
        assert row["S"] == pytest.approx(row["S_expected"], abs=0.05)
