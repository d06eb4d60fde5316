"""
Monitoring ten event vectors by hand
====================================

Two event types are recorded per vector, and the chart plots each event
as it arrives.  The first event of a vector is compared with fixed
limits.  The second event gets limits that depend on the first one.

The in-control model is Gumbel's bivariate exponential with
``theta = (5, 15)`` and dependence ``delta = 0.5``.
"""

from btbe.chart import ChartConfig, first_event_limits, monitor
from btbe.lifetimes import GbeParams
from btbe.scenarios import WORKED_VECTORS, worked_alpha

model = GbeParams(5, 15, 0.5)
config = ChartConfig(model, alpha_override=worked_alpha())
print(f"alpha = {config.alpha:.6f}")
print(f"UCL for every first event: {first_event_limits(config).ucl:.2f}")

#%%
# Run the chart.  Points come out in time order: the first event of a
# vector, then its second.

print(f"{'event':>5} {'vector':>6} {'rank':>4} {'value':>6} {'UCL':>8}  signal")
for p in monitor(config, WORKED_VECTORS):
    print(f"{p.event_index:5d} {p.event.vector_index + 1:6d} {p.event.rank:4d} {p.event.value:6.1f} "
          f"{p.limits.ucl:8.2f}  {'*' if p.signal else ''}")

#%%
# Event 6 is the second event of vector 3, (36, 15).  Its first event
# was 15, so the second-event limit is 31.68, and 36 lies above it.
