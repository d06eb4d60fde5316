"""
Average time to signal across the benchmark scenarios
=====================================================

Each scenario fixes the in-control means of the two event times and
shifts one or both of them.  The chart is tuned to an in-control ATS of
200.  Smaller ATS after a shift means faster detection.
"""

from btbe.chart import alpha_from_ats0
from btbe.performance import ShiftScenario, ats_closed_form, ats_theorem3
from btbe.scenarios import scenario_rows

for family in ("gbe", "mobe", "mobw"):
    print(f"\n{family.upper()}")
    print(f"{'sc':>2} {'shift':>6} {'means':>11} {'ATS':>7} {'published':>9}")
    for sc in (1, 2, 3, 4):
        rows = scenario_rows(family, sc)
        ic = rows[0].ic
        alpha = alpha_from_ats0(ic, 200)
        for r in rows:
            if r.oc is None:
                print(f"{sc:2d} {r.label:>6} {r.means[0]:5g}/{r.means[1]:<5g} {'n/a':>7} {r.published:9.1f}")
                continue
            scen = ShiftScenario(ic, r.oc)
            # GBE with delta < 1 has no closed form; integrate instead
            closed = getattr(ic, "delta", 1.0) == 1
            ats = (ats_closed_form if closed else ats_theorem3)(scen, alpha).value
            print(f"{sc:2d} {r.label:>6} {r.means[0]:5g}/{r.means[1]:<5g} {ats:7.1f} {r.published:9.1f}")

#%%
# The dependent GBE rows (scenarios 2 and 4) above count plotted points.
# The published values for them are simulated elapsed times, which run
# lower because a signalling gap tends to be a long one.
# ``ats_monte_carlo`` reports both accountings.
