"""
Comparison with a MEWMA chart
=============================

A MEWMA chart waits for both events of a vector and then updates a
smoothed mean.  Its threshold ``h`` is set by simulation so that the
in-control ATS is 200.

This demo uses 20 000 replications so it runs in seconds.  The
acceptance suite uses 1e5.
"""

from btbe.chart import alpha_from_ats0
from btbe.lifetimes import GbeParams
from btbe.mewma import MewmaConfig, calibrate_h, mewma_ats
from btbe.numerics import RngStream
from btbe.performance import ShiftScenario, ats_closed_form

ic = GbeParams(5, 15, 1)
reps = 20_000
h = calibrate_h(ic, 1.0, 200, reps, RngStream(1, 0))
print(f"MEWMA r=1: h = {h:.2f}")

#%%
# Both charts on the same shifts.

alpha = alpha_from_ats0(ic, 200)
cfg = MewmaConfig(1.0, h)
print(f"{'shift':>12} {'BTBE':>7} {'MEWMA':>7}")
for t1, t2 in ((7.5, 15), (10, 15), (20, 15), (7.5, 22.5), (10, 30), (20, 60)):
    oc = GbeParams(t1, t2, 1)
    btbe = ats_closed_form(ShiftScenario(ic, oc), alpha).value
    mw = mewma_ats(ic, oc, cfg, reps, RngStream(2, 0)).value
    print(f"({t1:4g},{t2:4g}) {btbe:7.1f} {mw:7.1f}")
