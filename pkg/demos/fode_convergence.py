"""Convergence of the corrected scheme for D^alpha u = -u, u(0) = 1.

The exact solution is the Mittag-Leffler function E_alpha(-t^alpha). Each
extra correction term lifts the observed order until the second-order limit
of the underlying generating function is reached.
"""

from __future__ import annotations

from fastcq import FodeProblem, convergence_table, linear_reference

alpha, sigma = 0.5, 0.0
taus = [2.0**-k for k in range(5, 10)]


def ref(t):
    return linear_reference(alpha, sigma, t)


for m in range(4):

    def make(tau, m=m):
        return FodeProblem(alpha=alpha, sigma=sigma, tau=tau, m=m, startup="exact", exact=ref)

    print(f"m={m}")
    for tau, err, order in convergence_table(make, taus, ref):
        print(f"  tau={tau:.6f}  max error {err:.4e}  order {order:.4f}")
