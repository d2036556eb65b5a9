"""Basic COCOMO: effort = a * KLOC^A, development time = b * effort^B."""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_DOWN, ROUND_HALF_UP, Decimal


@dataclass(frozen=True)
class CocomoParams:
    a: float
    A_exp: float
    b: float
    B_exp: float
    project_class: str = "custom"

    def __post_init__(self):
        for name in ("a", "A_exp", "b", "B_exp"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")


# organic/semidetached are the textbook basic-model constants; embedded
# matches the project's own input table
PRESETS = {
    "organic": CocomoParams(2.4, 1.05, 2.5, 0.38, "organic"),
    "semidetached": CocomoParams(3.0, 1.12, 2.5, 0.35, "semidetached"),
    "embedded": CocomoParams(3.6, 1.20, 2.5, 0.32, "embedded"),
}


@dataclass(frozen=True)
class CocomoEstimate:
    kloc: float
    effort_pm: float
    tdev_months: float
    monthly_rate: float | None = None

    @property
    def productivity_loc_pm(self) -> float:
        return 1000.0 * self.kloc / self.effort_pm

    @property
    def avg_staff(self) -> float:
        return self.effort_pm / self.tdev_months

    @property
    def billed_months(self) -> int:
        return math.ceil(self.tdev_months)

    @property
    def cost(self) -> float | None:
        """Whole months of development billed at the monthly rate."""
        if self.monthly_rate is None:
            return None
        return self.billed_months * self.monthly_rate

    def table(self, rounding: str = "truncate") -> dict[str, str]:
        """Presentation values: effort/tdev to 3 places, the rest to 2."""
        row = {
            "effort_pm": present(self.effort_pm, 3, rounding),
            "tdev_months": present(self.tdev_months, 3, rounding),
            "productivity_loc_pm": present(self.productivity_loc_pm, 2, rounding),
            "avg_staff": present(self.avg_staff, 2, rounding),
            "billed_months": str(self.billed_months),
        }
        if self.cost is not None:
            row["cost"] = present(self.cost, 0, rounding)
        return row


def present(value: float, places: int, rounding: str = "truncate") -> str:
    """Format for display; ``truncate`` drops digits, ``half-up`` rounds away from zero."""
    mode = {"truncate": ROUND_DOWN, "half-up": ROUND_HALF_UP}[rounding]
    q = Decimal(1).scaleb(-places)
    return str(Decimal(repr(value)).quantize(q, rounding=mode))


def estimate(kloc: float, p: CocomoParams, monthly_rate: float | None = None) -> CocomoEstimate:
    if not (math.isfinite(kloc) and kloc > 0):
        raise ValueError(f"kloc must be positive, got {kloc!r}")
    if monthly_rate is not None and not monthly_rate > 0:
        raise ValueError(f"monthly rate must be positive, got {monthly_rate!r}")
    effort = p.a * kloc ** p.A_exp
    tdev = p.b * effort ** p.B_exp
    return CocomoEstimate(kloc, effort, tdev, monthly_rate)


def from_actuals(kloc: float, effort_pm: float, tdev_months: float,
                 monthly_rate: float | None = None) -> CocomoEstimate:
    """Wrap measured effort and schedule so they report like an estimate."""
    if min(kloc, effort_pm, tdev_months) <= 0:
        raise ValueError("kloc, effort and tdev must be positive")
    return CocomoEstimate(kloc, effort_pm, tdev_months, monthly_rate)


def advantage(standard: CocomoEstimate, actual: CocomoEstimate) -> dict[str, float]:
    """Reduction (or, for productivity, increase) factors of ``actual`` over ``standard``."""
    out = {
        "effort": standard.effort_pm / actual.effort_pm,
        "tdev": standard.tdev_months / actual.tdev_months,
        "avg_staff": standard.avg_staff / actual.avg_staff,
        "productivity": actual.productivity_loc_pm / standard.productivity_loc_pm,
    }
    if standard.cost is not None and actual.cost is not None:
        out["cost"] = standard.cost / actual.cost
    return out
