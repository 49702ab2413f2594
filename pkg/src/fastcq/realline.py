"""Fast history evaluation from a real-line integral representation of the
convolution weights.

For the supported generating functions each weight can be written as

.. math::

    \\omega_n^{(\\alpha,\\sigma)} = \\tau^{1+\\alpha} e^{-n\\sigma\\tau}
        \\int_{-\\infty}^{\\infty} (1 + \\tau e^x)^{-1-n} \\varphi(x)\\,dx,
    \\qquad
    \\varphi(x) = -\\frac{\\sin\\alpha\\pi}{\\pi} e^{(1+\\alpha)x} F_\\omega(-e^x).

One trapezoidal rule in :math:`x` serves every weight at once; the history
part of the convolution then reduces to *Q* scalar geometric recurrences.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from fastcq.convolution import Convolver, SampleBuffer
from fastcq.errors import UnsupportedForMethodII
from fastcq.weights import GeneratingFunction, WeightTable, newton_gregory_coeffs

__all__ = [
    "HistoryState",
    "PhiIntegrand",
    "RealLineConvolver",
    "RealLineRule",
    "build_rule",
    "history_step",
    "phi",
    "realline_convolver",
    "rule_weights",
    "support_window",
]


# {{{ integrand


@dataclass(frozen=True)
class PhiIntegrand:
    """The integrand :math:`\\varphi` and its weighted versions
    :math:`\\varphi_n(x) = (1 + \\tau e^x)^{-1-n}\\varphi(x)`."""

    gf: GeneratingFunction
    alpha: float
    tau: float

    def __post_init__(self) -> None:
        ok = self.gf.kind in ("gngf", "ftrap") or (self.gf.kind == "fbdf" and self.gf.p == 1)
        if not ok:
            raise UnsupportedForMethodII(
                f"{self.gf.name} has no real-line representation; use the contour engine"
            )
        if self.alpha == math.floor(self.alpha):
            raise UnsupportedForMethodII(f"the integrand vanishes for integer order {self.alpha}")
        if self.tau <= 0:
            raise ValueError("step size must be positive")

    @property
    def _prefactor(self) -> float:
        return -math.sin(self.alpha * math.pi) / math.pi

    def reduced_symbol(self, x: np.ndarray) -> np.ndarray:
        """:math:`F_\\omega(-e^x)` in real arithmetic."""
        s = self.tau * np.exp(x)
        if self.gf.kind == "gngf":
            g = newton_gregory_coeffs(self.alpha, self.gf.p)
            return np.polynomial.polynomial.polyval(-s, g)
        if self.gf.kind == "ftrap":
            return (2.0 / (2.0 + s)) ** self.alpha
        return np.ones_like(s)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self._prefactor * np.exp((1 + self.alpha) * x) * self.reduced_symbol(x)

    def phi_n(self, x, n: int):
        x = np.asarray(x, dtype=float)
        return self(x) * np.exp(-(1 + n) * np.log1p(self.tau * np.exp(x)))

    def log_abs_phi_n(self, x, n: int):
        """:math:`\\log|\\varphi_n(x)|`, finite far into both tails."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return (
                math.log(abs(self._prefactor))
                + (1 + self.alpha) * x
                + np.log(np.abs(self.reduced_symbol(x)))
                - (1 + n) * np.log1p(self.tau * np.exp(x))
            )

    def right_decay_rate(self, n: int) -> float:
        """Exponential decay rate of :math:`|\\varphi_n|` as :math:`x \\to \\infty`."""
        if self.gf.kind == "gngf":
            growth = self.gf.p - 1
        elif self.gf.kind == "ftrap":
            growth = -self.alpha
        else:
            growth = 0
        return (1 + n) - (1 + self.alpha) - growth


def phi(x, ctx: PhiIntegrand):
    """Evaluate :math:`\\varphi(x)`."""
    return ctx(x)


# }}}


# {{{ support window

_GRID_STEP = 0.05
_XTOL = 1.0e-3


def _single_window(ctx: PhiIntegrand, n: int, epsilon: float) -> tuple[float, float]:
    rate = ctx.right_decay_rate(n)
    if rate <= 0:
        raise ValueError(f"the integrand does not decay for n={n}; increase n0")
    log_eps = math.log(epsilon)

    # the peak of the dominant factor sits near log((1 + alpha) / (n tau))
    center = math.log((1 + ctx.alpha) / (max(n - ctx.alpha, 1.0) * ctx.tau))
    knee = -math.log(ctx.tau)  # where (1 + tau e^x)^(-1-n) starts to bite
    left = min(center, knee) - (60.0 - log_eps) / (1 + ctx.alpha)
    right = max(center, knee) + (60.0 - log_eps) / rate + 10.0
    x = np.arange(left, right + _GRID_STEP, _GRID_STEP)
    f = ctx.log_abs_phi_n(x, n)

    i = int(np.argmax(f))
    if not np.isfinite(f[i]):
        raise UnsupportedForMethodII("the integrand vanishes identically")
    lo, hi = x[max(i - 1, 0)], x[min(i + 1, x.size - 1)]
    res = optimize.minimize_scalar(
        lambda t: -float(ctx.log_abs_phi_n(t, n)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1.0e-8},
    )
    fmax = max(-res.fun, f[i])

    def level(t):
        return float(ctx.log_abs_phi_n(t, n)) - fmax - log_eps

    above = np.flatnonzero(f - fmax - log_eps >= 0)
    i_lo, i_hi = int(above[0]), int(above[-1])
    if i_lo == 0 or i_hi == x.size - 1:
        raise RuntimeError("support window search grid too narrow")
    x_min = optimize.bisect(level, x[i_lo - 1], x[i_lo], xtol=_XTOL)
    x_max = optimize.bisect(level, x[i_hi], x[i_hi + 1], xtol=_XTOL)
    return x_min, x_max


def support_window(
    ctx: PhiIntegrand, n0: int, nT: int, epsilon: float = 1.0e-20
) -> tuple[float, float]:
    """Interval outside of which :math:`|\\varphi_n| < \\epsilon \\max|\\varphi_n|`
    for both ``n = n0`` and ``n = nT``.

    The maximum is found on a coarse grid and refined by a bounded scalar
    search; the outermost crossings are then located on the grid and refined
    by bracketing root finding to about 1e-3 in *x*.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if nT < n0:
        raise ValueError("need n0 <= nT")
    a0, b0 = _single_window(ctx, n0, epsilon)
    if nT == n0:
        return a0, b0
    a1, b1 = _single_window(ctx, nT, epsilon)
    return min(a0, a1), max(b0, b1)


# }}}


# {{{ rule


@dataclass(frozen=True)
class RealLineRule:
    """Trapezoidal rule :math:`\\lambda_j = e^{x_j}`, :math:`w_j = \\Delta x\\,\\varphi(x_j)`."""

    Q: int
    x_min: float
    x_max: float
    x: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    epsilon: float = 1.0e-20

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.Q - 1)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["j", "x", "lambda", "w"])
        for j in range(self.Q):
            writer.writerow([j, repr(float(self.x[j])), repr(float(self.lam[j])), repr(float(self.w[j]))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def build_rule(
    ctx: PhiIntegrand, n0: int, nT: int, Q: int, epsilon: float = 1.0e-20
) -> RealLineRule:
    if Q < 2:
        raise ValueError("need at least two quadrature nodes")
    x_min, x_max = support_window(ctx, n0, nT, epsilon)
    x = np.linspace(x_min, x_max, Q)
    dx = (x_max - x_min) / (Q - 1)
    return RealLineRule(Q, x_min, x_max, x, np.exp(x), dx * ctx(x), epsilon)


def rule_weights(
    rule: RealLineRule, alpha: float, sigma: float, tau: float, n: np.ndarray | int
) -> np.ndarray:
    """Approximate weights
    :math:`\\tau^{1+\\alpha}e^{-n\\sigma\\tau}\\sum_j w_j(1+\\lambda_j\\tau)^{-1-n}`."""
    n = np.atleast_1d(np.asarray(n, dtype=float))
    log_decay = np.log1p(rule.lam * tau)
    terms = np.exp(-np.outer(1 + n, log_decay)) @ rule.w
    return tau ** (1 + alpha) * np.exp(-n * sigma * tau) * terms


# }}}


# {{{ history recurrence


@dataclass
class HistoryState:
    """States :math:`y^{(j)} = \\tau\\sum_{k<n}(e^{\\sigma\\tau}(1+\\lambda_j\\tau))^{-(n-k)}u_k`."""

    y: np.ndarray
    n_processed: int = 0


def history_step(
    state: HistoryState, rule: RealLineRule, sigma: float, tau: float, u_prev
) -> HistoryState:
    """Advance every state by one step of its geometric recurrence."""
    decay = np.exp(-sigma * tau) / (1 + rule.lam * tau)
    decay = decay.reshape(decay.shape + (1,) * (state.y.ndim - 1))
    state.y = decay * (state.y + tau * np.asarray(u_prev, dtype=float))
    state.n_processed += 1
    return state


class RealLineConvolver(Convolver):
    """Exact local window of ``n0 + 1`` weights plus a *Q*-node history.

    For ``n <= n0`` the result is the direct sum, computed with the same kernel
    and summation order as :class:`~fastcq.convolution.DirectConvolver`.
    """

    def __init__(
        self,
        table: WeightTable,
        rule: RealLineRule,
        n0: int = 50,
        shape: tuple[int, ...] = (),
    ):
        super().__init__(table, shape)
        if table.n_max < n0:
            raise ValueError("weight table shorter than the local window")
        self.rule = rule
        self.n0 = n0
        self.samples = SampleBuffer(self.shape, window=n0 + 1)
        self.state = HistoryState(np.zeros((rule.Q,) + self.shape))
        expand = (1,) * len(self.shape)
        tau, sigma = self.tau, self.sigma
        self._decay = (np.exp(-sigma * tau) / (1 + rule.lam * tau)).reshape((-1,) + expand)
        self._out = rule.w * np.exp(-n0 * sigma * tau - (n0 + 1) * np.log1p(rule.lam * tau))
        self.multiply_adds = 0

    def memory(self):
        n = self.n
        if n == 0:
            return np.zeros(self.shape)[()]
        if n <= self.n0:
            rev = self.table.weights[n:0:-1]
            self.multiply_adds += n
            return self.scale * self.samples.weighted_sum(rev, 0, n)
        rev = self.table.weights[self.n0 : 0 : -1]
        local = self.scale * self.samples.weighted_sum(rev, n - self.n0, n)
        history = np.tensordot(self._out, self.state.y, axes=(0, 0))
        self.multiply_adds += self.n0 + self.rule.Q
        return local + history

    def push(self, u) -> None:
        self.samples.append(u)
        k = self.n
        self.n += 1
        if k >= self.n0:
            u_old = self.samples[k - self.n0]
            self.state.y = self._decay * (self.state.y + self.tau * u_old)
            self.state.n_processed += 1
            self.multiply_adds += self.rule.Q


def realline_convolver(
    table: WeightTable,
    Q: int = 256,
    n0: int = 50,
    n_max: int | None = None,
    epsilon: float = 1.0e-20,
    shape: tuple[int, ...] = (),
) -> RealLineConvolver:
    """Build the rule for indices ``n0..n_max`` and wrap it in a convolver."""
    n_max = table.n_max if n_max is None else n_max
    ctx = PhiIntegrand(table.gf, table.alpha, table.tau)
    rule = build_rule(ctx, n0, max(n_max, n0), Q, epsilon)
    return RealLineConvolver(table, rule, n0, shape)


# }}}
