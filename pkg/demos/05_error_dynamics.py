"""
Why cancellation converges, stalls or explodes.

The per-sample error of iterative cancellation follows a quadratic map.
Its parameter depends only on s = Ib + Qb, so the fate of a sample can be
predicted before iterating. Here the prediction is compared with
simulation, and the terminal-value table is printed for a few parameters.
"""

from ser_dsp import dynamics as dyn

cases = [(0.2, 0.1), (-1.0, 0.1), (0.7, 0.05), (0.95, 0.05), (0.2, 1.0), (-1.5, 0.0)]
for s, d0 in cases:
    e0, b, a_abs = dyn.map_parameters(s, d0)
    print(f"s={s:5.2f} d0={d0:4.2f} b={float(b):5.3f}  predicted {dyn.classify(s, d0)!s:28s}"
          f" simulated {dyn.observe(s, d0)}")

for b in (0.5, 1.0, 1.28, 1.8):
    rows = dyn.bifurcation(b, b, 1, 100)
    vals = sorted({round(v, 4) for _, v, _ in rows})
    shown = vals if len(vals) <= 4 else f"{len(vals)} distinct values in [{vals[0]}, {vals[-1]}]"
    print(f"b={b}: {shown}")
