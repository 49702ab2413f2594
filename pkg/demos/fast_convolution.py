"""Compare the two fast convolution engines with direct summation.

Builds GNGF-2 weights for a half-order derivative, checks the real-line
quadrature weights against the exact table, then streams ``u = t + t^2``
through all three engines and prints the worst relative deviation.
"""

from __future__ import annotations

import time

import numpy as np

from fastcq import GNGF2, build_rule, convolution_weights, direct_convolution, make_convolver
from fastcq.realline import PhiIntegrand, rule_weights

alpha, tau, n_T, n0 = 0.5, 0.01, 20_000, 50
table = convolution_weights(GNGF2, alpha, 0.0, tau, n_T)

n = np.arange(n0, n_T + 1)
for Q in (32, 64, 128, 252):
    rule = build_rule(PhiIntegrand(GNGF2, alpha, tau), n0, n_T, Q)
    approx = rule_weights(rule, alpha, 0.0, tau, n)
    rel = np.max(np.abs(approx - table.weights[n]) / np.abs(table.weights[n]))
    print(f"Q={Q:4d}  x in [{rule.x_min:7.2f}, {rule.x_max:6.2f}]  max weight relerr {rel:.2e}")

t = tau * np.arange(n_T + 1)
u = t + t**2
ref = direct_convolution(table, u)
for engine, kw in (("realline", dict(Q=252)), ("talbot", dict(N=36, B=5))):
    start = time.perf_counter()
    conv = make_convolver(table, engine, n0=n0, **kw)
    out = np.array([conv.step(x) for x in u])
    elapsed = time.perf_counter() - start
    dev = np.max(np.abs(out[1:] - ref[1:]) / np.abs(ref[1:]))
    print(f"{engine:9s} max relative deviation {dev:.2e} in {elapsed:.2f} s")
