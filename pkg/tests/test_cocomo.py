import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rtfx.cocomo import PRESETS, CocomoParams, advantage, estimate, from_actuals, present

EMBEDDED = PRESETS["embedded"]


def test_standard_estimate_table():
    est = estimate(16, EMBEDDED, monthly_rate=18000)
    # independent arithmetic: 3.6 * 16^1.2, then 2.5 * effort^0.32
    effort = 3.6 * math.exp(1.2 * math.log(16))
    assert est.effort_pm == pytest.approx(effort, rel=1e-14)
    assert est.tdev_months == pytest.approx(2.5 * math.exp(0.32 * math.log(effort)), rel=1e-14)
    assert est.table() == {
        "effort_pm": "100.287",
        "tdev_months": "10.922",
        "productivity_loc_pm": "159.54",
        "avg_staff": "9.18",
        "billed_months": "11",
        "cost": "198000",
    }


def test_half_up_differs_only_in_tdev():
    t = estimate(16, EMBEDDED, 18000).table("half-up")
    assert t["tdev_months"] == "10.923"
    assert t["effort_pm"] == "100.287" and t["avg_staff"] == "9.18"


def test_actuals_table():
    act = from_actuals(16, 8, 2, monthly_rate=18000)
    assert act.cost == 36000
    assert act.productivity_loc_pm == 2000
    assert act.avg_staff == 4


def test_advantage_ratios():
    adv = advantage(estimate(16, EMBEDDED, 18000), from_actuals(16, 8, 2, 18000))
    assert adv["cost"] == pytest.approx(5.5)
    assert adv["tdev"] == pytest.approx(5.46, abs=0.01)
    assert adv["effort"] == pytest.approx(12.54, abs=0.01)


def test_identity_constants():
    est = estimate(7.5, CocomoParams(1, 1, 1, 1))
    assert est.effort_pm == 7.5 and est.tdev_months == 7.5 and est.avg_staff == 1


def test_presets():
    assert PRESETS["organic"].a == 2.4 and PRESETS["organic"].B_exp == 0.38
    assert PRESETS["semidetached"].A_exp == 1.12
    assert {p.project_class for p in PRESETS.values()} == set(PRESETS)


@pytest.mark.parametrize("kloc", [0, -1, float("nan"), float("inf")])
def test_invalid_kloc(kloc):
    with pytest.raises(ValueError):
        estimate(kloc, EMBEDDED)


def test_invalid_params():
    with pytest.raises(ValueError):
        CocomoParams(0, 1, 1, 1)
    with pytest.raises(ValueError):
        estimate(1, EMBEDDED, monthly_rate=0)
    with pytest.raises(ValueError):
        from_actuals(16, 0, 2)


def test_present_modes():
    assert present(1.23456, 3) == "1.234"
    assert present(1.23456, 3, "half-up") == "1.235"
    assert present(2.5, 0, "half-up") == "3"
    with pytest.raises(KeyError):
        present(1.0, 1, "banker")


@given(st.floats(0.1, 1e4), st.floats(0.1, 1e4), st.sampled_from(sorted(PRESETS)))
def test_monotone_in_size(k1, k2, name):
    lo, hi = sorted((k1, k2))
    a, b = estimate(lo, PRESETS[name]), estimate(hi, PRESETS[name])
    assert a.effort_pm <= b.effort_pm and a.tdev_months <= b.tdev_months
    assert a.billed_months == math.ceil(a.tdev_months)
