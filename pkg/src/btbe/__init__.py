"""Bivariate time-between-events (BTBE) control charts.

Modules
-------
numerics     special functions, quadrature, root finding, random streams
lifetimes    GBE, MOBE and MOBW models and their order-statistic laws
estimation   Phase-I fitting
chart        control limits and the monitoring engine
performance  ATS by closed form, renewal identity and Monte Carlo
mewma        the MEWMA comparator chart
scenarios    benchmark designs and reference values
cli          command-line interface
"""

from .chart import ChartConfig, ChartPoint, LimitPair, Side, alpha_from_ats0, monitor
from .lifetimes import EventVector, GbeParams, MobeParams, MobwParams, OrderBranch, OrderedEvent
from .numerics import BtbeError, ConvergenceError, DomainError, RngStream, Tolerance
from .performance import AtsEstimate, ShiftScenario

__version__ = "0.1.0"

__all__ = [
    "AtsEstimate",
    "BtbeError",
    "ChartConfig",
    "ChartPoint",
    "ConvergenceError",
    "DomainError",
    "EventVector",
    "GbeParams",
    "LimitPair",
    "MobeParams",
    "MobwParams",
    "OrderBranch",
    "OrderedEvent",
    "RngStream",
    "ShiftScenario",
    "Side",
    "Tolerance",
    "alpha_from_ats0",
    "monitor",
]
