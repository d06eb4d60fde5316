"""
Synthetic stand-in for the AIDS case-study data
================================================

The real records (age at infection, time to AIDS) are not redistributed
here.  This script writes a deterministic stand-in with the same layout:
258 adults and 37 children, times in months, every row satisfying
``x1 < x2`` except one adult with a zero infection time, which the
loaders exclude.

Adults are drawn from the published fitted model.  Its parameters are
Weibull scales ``s`` with rate ``s**(-eta)``; :meth:`MobwParams.from_scales`
does that conversion.  Children use slightly different scales so the
monitoring demo has something to find.

Run from the repository root::

    python3 demos/make_case_study_standin.py
"""

import csv
from pathlib import Path

import numpy as np

from btbe.lifetimes import MobwParams, sample
from btbe.numerics import RngStream

OUT = Path(__file__).resolve().parent.parent / "data" / "aids_standin.csv"
SEED = 20240601
SHAPE = 4.31

adult = MobwParams.from_scales(0.574, 0.905, 1.12, SHAPE)
child = MobwParams.from_scales(0.66, 0.80, 1.0, SHAPE)


def i1_rows(model, n, stream):
    """``n`` vectors in months, rounded to 0.1, with ``x1 < x2`` after rounding."""
    out, got = [], 0
    while got < n:
        x = np.round(sample(model, RngStream(SEED, stream), 4 * n) * 100, 1)
        x = x[(x[:, 0] > 0) & (x[:, 0] < x[:, 1])]
        out.append(x)
        got += len(x)
        stream += 1
    return np.concatenate(out)[:n]


adults = i1_rows(adult, 257, 0)
children = i1_rows(child, 37, 1000)

#%%
# One adult record with a zero infection time, as in the original data.

rows = [("adult", a, b) for a, b in adults]
rows.insert(100, ("adult", 0.0, 63.0))
rows += [("child", a, b) for a, b in children]

with open(OUT, "w", newline="") as fh:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["x1", "x2", "group"])
    for g, a, b in rows:
        w.writerow([f"{a:.1f}", f"{b:.1f}", g])

print(f"wrote {len(rows)} rows to {OUT}")
for name, x in (("adults", adults), ("children", children)):
    print(f"{name:9s} mean x1 {x[:, 0].mean():6.1f}  mean x2 {x[:, 1].mean():6.1f}")
