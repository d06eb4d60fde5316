"""The benchmark scenario suite: in-control designs, shifts and reference ATS values.

Four in-control designs fix the marginal means ``(E[X1], E[X2])`` at
``(5, 5)`` or ``(5, 15)``, either independent or dependent.  Dependence
means ``delta = 0.5`` for GBE and a tie probability ``P[X1 = X2] = 0.1`` for
the Marshall-Olkin families.  Every shift rescales the means:

=========  ==================
label      new means
=========  ==================
IC         (E1, E2)
OC-I1      (1.5 E1, E2), (2 E1, E2)
OC-I2      (1.5 E1, 1.5 E2), (2 E1, 2 E2)
OC-D1      (0.5 E1, E2)
OC-D2      (0.5 E1, 0.5 E2)
=========  ==================

:func:`design_params` solves for exact parameters from the means and the
tie probability.  :data:`PRINTED_PARAMS` holds the rounded values of the
published parameter table; the exact values are needed to match the
published ATS to one decimal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .lifetimes import GbeParams, MobeParams, MobwParams
from .numerics import DomainError

__all__ = [
    "Row",
    "SHIFTS",
    "SCENARIO_MEANS",
    "design_params",
    "scenario_rows",
    "PUBLISHED_ATS",
    "PRINTED_PARAMS",
    "MEWMA_H",
    "MEWMA_ATS",
    "WORKED_MODEL",
    "WORKED_VECTORS",
    "WORKED_UCL1",
    "WORKED_UCL2",
    "WORKED_SIGNAL_EVENTS",
    "worked_alpha",
]

SCENARIO_MEANS = {1: (5.0, 5.0, False), 2: (5.0, 5.0, True), 3: (5.0, 15.0, False), 4: (5.0, 15.0, True)}

SHIFTS = (
    ("IC", 1.0, 1.0),
    ("OC-I1", 1.5, 1.0),
    ("OC-I1", 2.0, 1.0),
    ("OC-I2", 1.5, 1.5),
    ("OC-I2", 2.0, 2.0),
    ("OC-D1", 0.5, 1.0),
    ("OC-D2", 0.5, 0.5),
)

TIE_PROB = 0.1
GBE_DEPENDENT_DELTA = 0.5
MOBW_SHAPE = 2.0


def design_params(family: str, mean1: float, mean2: float, dependent: bool):
    """Parameters with the given marginal means.

    For MOBE/MOBW the margins are exponential/Weibull with rates
    ``lambda_i + lambda12`` on the ``x**eta`` scale, and ``lambda12`` is set
    so that ``lambda12 / Lambda`` equals the tie probability.
    """
    if family == "gbe":
        return GbeParams(mean1, mean2, GBE_DEPENDENT_DELTA if dependent else 1.0)
    p = TIE_PROB if dependent else 0.0
    if family == "mobe":
        r1, r2 = 1.0 / mean1, 1.0 / mean2
    elif family == "mobw":
        g = math.gamma(1.0 + 1.0 / MOBW_SHAPE)
        r1, r2 = (g / mean1) ** MOBW_SHAPE, (g / mean2) ** MOBW_SHAPE
    else:
        raise DomainError(f"unknown family {family!r}")
    l12 = p * (r1 + r2) / (1.0 + p)
    l1, l2 = r1 - l12, r2 - l12
    if l1 < 0 or l2 < 0:
        raise DomainError(f"means ({mean1}, {mean2}) cannot carry tie probability {p}")
    if family == "mobe":
        return MobeParams(l1, l2, l12)
    return MobwParams(l1, l2, l12, MOBW_SHAPE)


@dataclass(frozen=True)
class Row:
    scenario: int
    label: str
    means: tuple
    ic: object
    oc: object
    published: float | None


def scenario_rows(family: str, scenario: int, include_decreases: bool | None = None) -> list:
    """One :class:`Row` per shift, skipping shifts the design cannot realise.

    Decrease shifts are included by default only for MOBW, the only family
    with published values for them.
    """
    m1, m2, dep = SCENARIO_MEANS[scenario]
    if include_decreases is None:
        include_decreases = family == "mobw"
    ic = design_params(family, m1, m2, dep)
    pub = PUBLISHED_ATS.get((family, scenario), ())
    rows = []
    for i, (label, f1, f2) in enumerate(SHIFTS):
        if label.startswith("OC-D") and not include_decreases:
            continue
        try:
            oc = design_params(family, m1 * f1, m2 * f2, dep)
        except DomainError:
            oc = None
        rows.append(Row(scenario, label, (m1 * f1, m2 * f2), ic, oc, pub[i] if i < len(pub) else None))
    return rows


# Published ATS (in-control target 200), in SHIFTS order.
PUBLISHED_ATS = {
    ("gbe", 1): (200.0, 110.5, 79.4, 79.7, 54.8),
    ("mobe", 1): (200.0, 110.5, 79.4, 79.7, 54.8),
    ("mobw", 1): (200.0, 67.0, 35.9, 40.0, 21.4, 133.6, 50.6),
    ("gbe", 2): (199.2, 115.4, 79.9, 91.5, 63.4),
    ("mobe", 2): (200.0, 110.1, 78.6, 79.8, 54.9),
    ("mobw", 2): (200.0, 66.9, 35.4, 40.7, 21.9, 136.0, 50.6),
    ("gbe", 3): (200.0, 110.7, 78.4, 103.1, 80.6),
    ("mobe", 3): (200.0, 110.7, 78.4, 103.1, 80.6),
    ("mobw", 3): (200.0, 71.5, 37.3, 63.4, 40.5, 138.0, 51.5),
    ("gbe", 4): (192.8, 108.8, 73.7, 109.5, 83.2),
    ("mobe", 4): (200.0, 111.7, 79.1, 103.2, 80.7),
    ("mobw", 4): (200.0, 73.8, 38.4, 63.9, 41.1, 139.3, 51.5),
}

# Rounded parameters of the published table, in SHIFTS order (MOBW rates only; eta = 2).
PRINTED_PARAMS = {
    ("mobe", 1): ((0.2, 0.2, 0), (0.133, 0.2, 0), (0.1, 0.2, 0), (0.133, 0.133, 0), (0.1, 0.1, 0)),
    ("mobe", 2): ((0.164, 0.164, 0.036), (0.103, 0.170, 0.030), (0.073, 0.173, 0.027),
                  (0.109, 0.109, 0.024), (0.081, 0.081, 0.018)),
    ("mobe", 3): ((0.2, 0.067, 0), (0.133, 0.067, 0), (0.1, 0.067, 0), (0.133, 0.044, 0), (0.1, 0.033, 0)),
    ("mobe", 4): ((0.176, 0.042, 0.024), (0.115, 0.048, 0.018), (0.085, 0.052, 0.015),
                  (0.117, 0.028, 0.016), (0.088, 0.021, 0.012)),
    ("mobw", 1): ((0.0314, 0.0314, 0), (0.0140, 0.0314, 0), (0.0079, 0.0314, 0), (0.0140, 0.0140, 0),
                  (0.0079, 0.0079, 0), (0.1257, 0.0314, 0), (0.1257, 0.1257, 0)),
    ("mobw", 2): ((0.0257, 0.0257, 0.0057), (0.0098, 0.0273, 0.0041), (0.0043, 0.0278, 0.0036),
                  (0.0114, 0.0114, 0.0025), (0.0064, 0.0064, 0.0014), (0.1114, 0.0171, 0.0143),
                  (0.1028, 0.1028, 0.0228)),
    ("mobw", 3): ((0.0314, 0.0035, 0), (0.0140, 0.0035, 0), (0.0079, 0.0035, 0), (0.0140, 0.0016, 0),
                  (0.0079, 0.0009, 0), (0.1257, 0.0035, 0), (0.1257, 0.0140, 0)),
    ("mobw", 4): ((0.0282, 3.17e-04, 0.0032), (0.0124, 1.90e-03, 0.0016), (0.0068, 2.46e-03, 0.0010),
                  (0.0126, 1.41e-04, 0.0014), (0.0070, 7.93e-05, 0.0008), (0.1139, 8.25e-03, 0.0117),
                  (0.1130, 1.26e-03, 0.0127)),
}

# MEWMA thresholds for in-control ATS 200, by smoothing constant, scenarios 1-4.
MEWMA_H = {0.1: (3.60, 3.87, 2.09, 2.12), 1.0: (9.51, 11.40, 5.33, 5.86)}

# MEWMA ATS, scenario 3, r = 1: out-of-control GBE (theta1, theta2) with delta = 1.
MEWMA_ATS = {
    (3, 1.0): (((7.5, 15), 111.6), ((10, 15), 79.8), ((20, 15), 55.6),
               ((7.5, 22.5), 108.0), ((10, 30), 88.2), ((20, 60), 90.6)),
}

# Worked example: ten GBE(5, 15, 0.5) vectors with their printed limits.
WORKED_MODEL = (5.0, 15.0, 0.5)
WORKED_VECTORS = ((24, 10), (15, 22), (36, 15), (11, 8), (17, 27), (3, 2), (2, 1), (70, 49), (28, 56), (4, 2))
WORKED_UCL1 = 18.78
WORKED_UCL2 = (25.64, 85.05, 31.68, 23.02, 89.89, 12.85, 9.73, 67.99, 113.20, 12.85)
WORKED_SIGNAL_EVENTS = (6, 15, 16, 17)


def worked_alpha() -> float:
    """False alarm rate that puts the first-event limit of the worked example at its printed value."""
    m = GbeParams(*WORKED_MODEL)
    return math.exp(-WORKED_UCL1 * m.min_rate)
