"""Implicit corrected scheme for the scalar tempered fractional ODE

.. math::

    D^{\\sigma,\\alpha}_{0,t}\\,(u(t) - u_0) = -u(t) + f(u, t),

plus the Mittag-Leffler reference solution of the linear case.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from fastcq.errors import NonlinearSolveFailure, UnsupportedOrder
from fastcq.operator import FlmmOperator
from fastcq.weights import GNGF2, GeneratingFunction, convolution_weights

__all__ = [
    "FodeProblem",
    "Trajectory",
    "convergence_table",
    "linear_reference",
    "mittag_leffler",
    "solve",
]

FINE_STEPS = 2**7
NEWTON_TOL = 1.0e-12
NEWTON_MAXITER = 50


# {{{ Mittag-Leffler


def _ml_series(alpha: float, z: float) -> float:
    terms = []
    k = 0
    while True:
        term = z**k * special.rgamma(k * alpha + 1)
        terms.append(term)
        if k > 5 and abs(term) < 1.0e-18 * max(abs(math.fsum(terms)), 1.0e-300):
            break
        k += 1
        if k > 1000:
            raise ArithmeticError("Mittag-Leffler series did not converge")
    return math.fsum(terms)


def _ml_integral(alpha: float, z: float) -> float:
    # E_a(-x) = x sin(pi a)/(a pi) * int_0^inf exp(-r^(1/a)) / (r^2 + 2 r x cos(pi a) + x^2) dr
    x = -z
    s, c = math.sin(math.pi * alpha), math.cos(math.pi * alpha)

    def integrand(r):
        return math.exp(-(r ** (1.0 / alpha))) / (r * r + 2.0 * r * x * c + x * x)

    val, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1.0e-13, limit=500)
    return x * s / (alpha * math.pi) * val


def mittag_leffler(alpha: float, z: float, method: str = "auto") -> float:
    """:math:`E_\\alpha(z) = \\sum_k z^k/\\Gamma(k\\alpha + 1)` for ``z <= 0``.

    ``method="auto"`` uses the power series (exactly summed) for ``|z| <= 1``
    and an integral representation beyond; ``alpha = 1`` is the exponential.
    """
    if not 0 < alpha <= 1:
        raise UnsupportedOrder(f"order must lie in (0, 1], got {alpha}")
    if z > 0:
        raise ValueError("only non-positive arguments are supported")
    if alpha == 1:
        return math.exp(z)
    if z == 0:
        return 1.0
    if method == "auto":
        method = "series" if z >= -1.0 else "integral"
    if method == "series":
        return _ml_series(alpha, z)
    if method == "integral":
        return _ml_integral(alpha, z)
    raise ValueError(f"unknown method {method!r}")


def linear_reference(alpha: float, sigma: float, t: np.ndarray) -> np.ndarray:
    """Exact solution :math:`E_\\alpha(-t^\\alpha)e^{-\\sigma t}` of the linear
    problem ``f = 0``, ``u_0 = 1``."""
    t = np.asarray(t, dtype=float)
    ml = np.array([mittag_leffler(alpha, -(ti**alpha)) for ti in t.ravel()])
    return ml.reshape(t.shape) * np.exp(-sigma * t)


# }}}


# {{{ problem and trajectory


@dataclass
class FodeProblem:
    """Tempered fractional ODE with an implicit corrected discretization.

    :arg f: nonlinear part ``f(u, t)``; ``None`` means zero.
    :arg dfdu: its derivative in *u*; finite differences are used when absent.
    :arg gamma: exponents of the correction terms, default ``k * alpha``.
    :arg engine: ``"direct"``, ``"talbot"`` or ``"realline"``.
    :arg anchor: ``"constant"`` discretizes :math:`D^{\\sigma,\\alpha}(u - u_0)`;
        ``"tempered"`` discretizes :math:`D^{\\sigma,\\alpha}(u - e^{-\\sigma t}u_0)`,
        the form whose linear solution is :math:`E_\\alpha(-t^\\alpha)e^{-\\sigma t}`.
    :arg startup: how ``U_1..U_m`` are obtained: ``"fine"`` runs the scheme with
        step ``tau / 128`` and at most one correction term; ``"exact"`` samples
        the callable *exact* (a reference solution ``u(t)``).
    """

    alpha: float
    sigma: float = 0.0
    f: Callable[[float, float], float] | None = None
    dfdu: Callable[[float, float], float] | None = None
    u0: float = 1.0
    T: float = 10.0
    tau: float = 2.0**-5
    m: int = 0
    gamma: Sequence[float] | None = None
    gf: GeneratingFunction = GNGF2
    engine: str = "realline"
    Q: int = 256
    N: int = 64
    B: int = 5
    n0: int = 50
    anchor: str = "constant"
    startup: str = "fine"
    exact: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if self.startup not in ("fine", "exact"):
            raise ValueError(f"unknown startup rule {self.startup!r}")
        if self.startup == "exact" and self.exact is None:
            raise ValueError("startup='exact' needs a reference solution")
        if not 0 < self.alpha <= 1:
            raise UnsupportedOrder(f"order must lie in (0, 1], got {self.alpha}")
        if self.tau <= 0 or self.T < self.tau:
            raise ValueError("need 0 < tau <= T")
        if self.sigma < 0:
            raise ValueError("tempering parameter must be non-negative")
        if self.m < 0:
            raise ValueError("number of correction terms must be non-negative")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.tau))

    def exponents(self, m: int | None = None) -> tuple[float, ...]:
        m = self.m if m is None else m
        if self.gamma is not None:
            return tuple(self.gamma)[:m]
        return tuple((k + 1) * self.alpha for k in range(m))


@dataclass
class Trajectory:
    t: np.ndarray
    u: np.ndarray
    newton_iters: np.ndarray
    residuals: np.ndarray = field(repr=False)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "u", "newton_iters"])
        for t, u, it in zip(self.t.tolist(), self.u.tolist(), self.newton_iters.tolist()):
            writer.writerow([repr(t), repr(u), it])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


# }}}


# {{{ solver


def _newton(known, coef, f, dfdu, t, guess, step):
    def residual(u):
        return known + coef * u + u - (f(u, t) if f is not None else 0.0)

    def derivative(u):
        if f is None:
            return coef + 1.0
        if dfdu is not None:
            return coef + 1.0 - dfdu(u, t)
        h = 1.0e-7 * (1.0 + abs(u))
        return coef + 1.0 - (f(u + h, t) - f(u - h, t)) / (2 * h)

    u = guess
    scale = 1.0 + abs(known)
    r = residual(u)
    for it in range(NEWTON_MAXITER + 1):
        if not math.isfinite(r):
            raise NonlinearSolveFailure(f"non-finite residual at step {step}", step)
        if abs(r) <= NEWTON_TOL * scale:
            return u, it, r
        if it == NEWTON_MAXITER:
            break
        du = -r / derivative(u)
        u += du
        r = residual(u)
        if abs(du) <= 1.0e-16 * (1.0 + abs(u)):
            return u, it + 1, r
    raise NonlinearSolveFailure(f"Newton did not converge at step {step} (residual {r:.3e})", step)


def _march(problem, tau, n_steps, m, starting_values, engine):
    table = convolution_weights(problem.gf, problem.alpha, problem.sigma, tau, n_steps)
    op = FlmmOperator.build(
        table,
        problem.u0,
        problem.exponents(m),
        engine,
        starting_values,
        problem.anchor,
        Q=problem.Q,
        N=problem.N,
        B=problem.B,
        n0=problem.n0,
        n_max=n_steps,
    )

    t = tau * np.arange(n_steps + 1)
    u = np.empty(n_steps + 1)
    iters = np.zeros(n_steps + 1, dtype=int)
    res = np.zeros(n_steps + 1)
    u[0] = problem.u0
    for n in range(1, n_steps + 1):
        if starting_values is not None and n <= m:
            u[n] = starting_values[n - 1]
            op.push(u[n])
            continue
        known, coef = op.split()
        u[n], iters[n], res[n] = _newton(known, coef, problem.f, problem.dfdu, t[n], u[n - 1], n)
        op.push(u[n])
    return Trajectory(t, u, iters, res)


def solve(problem: FodeProblem) -> Trajectory:
    """March the implicit scheme to ``T``.

    With ``m > 0`` and the default startup rule the values ``U_1..U_m`` come
    from a run with step ``tau / 128`` and at most one correction term,
    sampled every 128 fine steps.
    """
    n_steps = problem.steps
    m = min(problem.m, n_steps)
    starting_values = None
    if m and problem.startup == "exact":
        times = problem.tau * np.arange(1, m + 1)
        starting_values = np.asarray(problem.exact(times), dtype=float)
    elif m:
        fine_tau = problem.tau / FINE_STEPS
        fine = _march(problem, fine_tau, m * FINE_STEPS, min(m, 1), None, "direct")
        starting_values = fine.u[FINE_STEPS::FINE_STEPS][:m].copy()
    return _march(problem, problem.tau, n_steps, m, starting_values, problem.engine)


def convergence_table(
    make_problem: Callable[[float], FodeProblem],
    taus: Sequence[float],
    reference: Callable[[np.ndarray], np.ndarray],
    at_end: bool = False,
) -> list[tuple[float, float, float]]:
    """Rows ``(tau, error, order)``; the error is the maximum over the grid,
    or the error at the final time with ``at_end=True``. The order is
    ``log2(err(2 tau) / err(tau))`` (NaN in the first row)."""
    rows = []
    prev = None
    for tau in taus:
        traj = solve(make_problem(tau))
        if at_end:
            err = float(abs(traj.u[-1] - float(reference(traj.t[-1:])[0])))
        else:
            err = float(np.max(np.abs(traj.u[1:] - reference(traj.t[1:]))))
        order = math.log2(prev / err) if prev is not None else math.nan
        rows.append((tau, err, order))
        prev = err
    return rows


# }}}
