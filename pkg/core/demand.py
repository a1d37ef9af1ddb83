"""Daily demand generation and warehouse carryover accounting."""

from typing import NamedTuple

import numpy as np

from core.exceptions import DomainError
from models.schemas import ConstantDemand, DemandSpec, GaussianDemand, Warehouse
from utils.logger import get_logger

MODULE = "demand"
logger = get_logger(MODULE)


class DayOpening(NamedTuple):
    net_demand: float
    carry_consumed: float
    warehouse: Warehouse


def daily_demand(spec: DemandSpec, rng: np.random.Generator) -> float:
    """Constant amount, or a normal draw clamped at 0."""
    if isinstance(spec, ConstantDemand):
        return float(spec.amount)
    if isinstance(spec, GaussianDemand):
        if spec.sd == 0:
            return max(0.0, float(spec.mean))
        return max(0.0, float(rng.normal(spec.mean, spec.sd)))
    raise DomainError(MODULE, f"unknown demand model {spec!r}")


def begin_day(w: Warehouse, epsilon: float, total_demand: float) -> DayOpening:
    """Decay overnight stock by epsilon, then use it against today's demand."""
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(MODULE, f"epsilon must lie in [0, 1], got {epsilon}")
    if not w.enabled:
        return DayOpening(total_demand, 0.0, Warehouse(stock=0.0, enabled=False))
    decayed = epsilon * w.stock
    consumed = min(decayed, total_demand)
    net = max(0.0, total_demand - decayed)
    return DayOpening(net, consumed, Warehouse(stock=decayed - consumed, enabled=True))


def end_day(w: Warehouse, recovered: float, net_demand: float) -> Warehouse:
    """Add today's surplus to stock. Shortages leave stock untouched."""
    if not w.enabled:
        return w
    return Warehouse(stock=w.stock + max(0.0, recovered - net_demand), enabled=True)
