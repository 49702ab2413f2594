"""Growth of a Turing pattern in the time-fractional Brusselator.

Starts from a small random perturbation of the homogeneous state and prints
the spatial variance of u as the pattern forms. A classical
Gierer-Meinhardt run below the instability threshold decays instead.
"""

from __future__ import annotations

from fastcq.reaction_diffusion import InitialCondition, preset, run

times = [1.0, 25.0, 50.0, 100.0, 200.0]
p = preset("fig8b", T=times[-1], cells=128, ic=InitialCondition(seed=1))
hist = run(p, save_times=times)
print(f"Brusselator alpha={p.alpha1}, d={p.d}")
for t, var in zip(hist.t, hist.variance("u")):
    print(f"  t={t:7.2f}  var(u)={var:.3e}")

q = preset("gm-classical", T=50.0, cells=128, ic=InitialCondition(seed=1))
hist = run(q, save_times=[1.0, 10.0, 25.0])
print(f"Gierer-Meinhardt alpha=1, d={q.d}")
for t, var in zip(hist.t, hist.variance("u")):
    print(f"  t={t:7.2f}  var(u)={var:.3e}")
