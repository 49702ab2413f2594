"""Convolution quadrature weights for (tempered) fractional linear multistep methods.

The weights :math:`\\omega_k^{(\\alpha,\\sigma)}` are the Taylor coefficients of
:math:`\\omega(z e^{-\\sigma\\tau})^\\alpha` for one of the generating-function
families below. They are generated from the untempered series with a
J.C.P. Miller type recurrence and then scaled by :math:`e^{-k\\tau\\sigma}`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import signal, special

from fastcq.errors import (
    DegenerateSeries,
    IllConditionedStartingSystem,
    InvalidGeneratingFunction,
    SeriesDivergence,
    UnsupportedOrder,
)

__all__ = [
    "GNGF2",
    "GeneratingFunction",
    "WeightTable",
    "StartingWeights",
    "series_power_coeffs",
    "rational_power_coeffs",
    "newton_gregory_coeffs",
    "convolution_weights",
    "tempered_power_derivative",
    "starting_weights",
    "starting_weight_table",
    "tempered_starting_weight_table",
    "binomial_alternating_sum",
    "kahan_cumsum",
]

# direct O(N^2) summation is used for the starting-weight right-hand sides up to
# this length, FFT convolution beyond it
_DIRECT_CONV_LIMIT = 20_000


# {{{ power series


def series_power_coeffs(g: Sequence[float], alpha: float, n_max: int) -> np.ndarray:
    r"""Taylor coefficients of :math:`g(z)^\alpha` up to :math:`z^{n_{max}}`.

    Uses the Miller recurrence

    .. math::

        c_n = \frac{1}{g_0} \sum_{k=1}^{n} \left(\frac{(\alpha + 1) k}{n} - 1\right)
            g_k c_{n - k},

    which costs :math:`O(n_{max} \deg g)`.

    :arg g: coefficients of the (polynomial) base, ascending powers.
    :arg alpha: real exponent.
    :arg n_max: index of the last coefficient returned.
    """
    g = np.asarray(g, dtype=float)
    if n_max < 0:
        raise ValueError(f"n_max must be non-negative: {n_max}")
    if g.size == 0 or g[0] == 0.0:
        raise DegenerateSeries("constant term of the base series vanishes")

    c = np.zeros(n_max + 1)
    c[0] = g[0] ** alpha
    deg = g.size - 1
    while deg > 0 and g[deg] == 0.0:
        deg -= 1

    if deg == 0 or n_max == 0:
        return c

    if deg == 1:
        # two-term recurrence, closed form as a cumulative product
        n = np.arange(1, n_max + 1, dtype=float)
        ratio = (g[1] / g[0]) * (alpha - n + 1.0) / n
        c[1:] = c[0] * np.cumprod(ratio)
        return c

    return rational_power_coeffs(g[: deg + 1], [1.0], alpha, n_max)


def rational_power_coeffs(
    p: Sequence[float], r: Sequence[float], alpha: float, n_max: int
) -> np.ndarray:
    r"""Taylor coefficients of :math:`(p(z) / r(z))^\alpha` for polynomials *p*, *r*.

    With :math:`h = (p/r)^\alpha` one has :math:`p r h' = \alpha (p' r - p r') h`,
    which gives a recurrence of length :math:`\deg p + \deg r` for the
    coefficients. For :math:`r \equiv 1` this is exactly the Miller recurrence.
    """
    p = np.polynomial.Polynomial(np.asarray(p, dtype=float))
    r = np.polynomial.Polynomial(np.asarray(r, dtype=float))
    if p.coef[0] == 0.0 or r.coef[0] == 0.0:
        raise DegenerateSeries("constant term of the base series vanishes")

    a = (p * r).coef
    b = (alpha * (p.deriv() * r - p * r.deriv())).coef
    if b.size < a.size:
        b = np.concatenate([b, np.zeros(a.size - b.size)])

    c = np.zeros(n_max + 1)
    c[0] = (p.coef[0] / r.coef[0]) ** alpha

    a = a.tolist()
    b = b.tolist()
    na, nb = len(a), len(b)
    a0 = a[0]
    cl = c.tolist()
    for n in range(n_max):
        # coefficient of z^n in  a h' - b h = 0, solved for c_{n+1}
        acc = 0.0
        for i in range(min(nb, n + 1)):
            acc += b[i] * cl[n - i]
        for i in range(1, min(na, n + 2)):
            acc -= a[i] * (n - i + 1) * cl[n - i + 1]
        cl[n + 1] = acc / (a0 * (n + 1))

    return np.array(cl)


def newton_gregory_coeffs(alpha: float, p: int) -> np.ndarray:
    r"""Coefficients :math:`g_0, \dots, g_{p-1}` of the generalized Newton--Gregory
    formula, i.e. the leading Taylor coefficients of
    :math:`(-\log(1 - x) / x)^\alpha`, so that :math:`g_0 = 1`,
    :math:`g_1 = \alpha / 2` and :math:`g_2 = \alpha (3\alpha + 5) / 24`.
    """
    base = 1.0 / np.arange(1, p + 1, dtype=float)
    return rational_power_coeffs(base, [1.0], alpha, p - 1)


def _poly_in_one_minus_z(coeffs: Sequence[float]) -> np.ndarray:
    """Expand sum_k coeffs[k] (1 - z)^k into ascending powers of z."""
    out = np.polynomial.Polynomial([0.0])
    one_minus_z = np.polynomial.Polynomial([1.0, -1.0])
    for k, ck in enumerate(coeffs):
        out = out + ck * one_minus_z**k
    return out.coef


# }}}


# {{{ generating functions

_FAMILIES = ("fbdf", "gngf", "ftrap", "custom")


@dataclass(frozen=True)
class GeneratingFunction:
    """Choice of FLMM family.

    ``kind`` is one of ``"fbdf"``, ``"gngf"``, ``"ftrap"`` or ``"custom"``. For the
    first two ``p`` is the order (1 to 6). A custom method is given by the
    characteristic polynomials of an implicit LMM in ascending powers of
    :math:`\\zeta`; its derivative symbol is :math:`\\hat\\rho(1/z)/\\hat\\sigma(1/z)`.
    """

    kind: str
    p: int = 1
    rho_hat: tuple[float, ...] = ()
    sigma_hat: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _FAMILIES:
            raise ValueError(f"unknown generating function family: {self.kind!r}")
        if self.kind in ("fbdf", "gngf") and not 1 <= self.p <= 6:
            raise UnsupportedOrder(f"order must be in 1..6, got {self.p}")
        if self.kind == "custom":
            self._check_custom()

    # constructors

    @classmethod
    def fbdf(cls, p: int) -> GeneratingFunction:
        return cls("fbdf", p)

    @classmethod
    def gngf(cls, p: int) -> GeneratingFunction:
        return cls("gngf", p)

    @classmethod
    def ftrap(cls) -> GeneratingFunction:
        return cls("ftrap", 2)

    @classmethod
    def custom(
        cls, rho_hat: Sequence[float], sigma_hat: Sequence[float]
    ) -> GeneratingFunction:
        return cls(
            "custom",
            0,
            tuple(float(x) for x in rho_hat),
            tuple(float(x) for x in sigma_hat),
        )

    @classmethod
    def parse(cls, name: str) -> GeneratingFunction:
        """Parse names like ``"gngf2"``, ``"fbdf1"`` or ``"ftrap"``."""
        name = name.strip().lower()
        if name == "ftrap":
            return cls.ftrap()
        for kind in ("fbdf", "gngf"):
            if name.startswith(kind):
                try:
                    p = int(name[len(kind) :])
                except ValueError:
                    break
                return cls(kind, p)
        raise ValueError(f"cannot parse generating function {name!r}")

    @property
    def name(self) -> str:
        if self.kind in ("fbdf", "gngf"):
            return f"{self.kind}{self.p}"
        return self.kind

    def _check_custom(self) -> None:
        rho = np.polynomial.Polynomial(self.rho_hat)
        sig = np.polynomial.Polynomial(self.sigma_hat)
        k = len(self.rho_hat) - 1
        if k < 1 or len(self.sigma_hat) - 1 > k:
            raise InvalidGeneratingFunction("need deg(sigma_hat) <= deg(rho_hat), deg >= 1")
        if self.rho_hat[-1] == 0.0:
            raise InvalidGeneratingFunction("leading coefficient of rho_hat vanishes")
        if len(self.sigma_hat) - 1 < k or self.sigma_hat[-1] == 0.0:
            raise InvalidGeneratingFunction("the LMM must be implicit")
        roots = sig.roots()
        if roots.size and np.max(np.abs(roots)) >= 1.0:
            raise InvalidGeneratingFunction("zeros of sigma_hat must lie inside the unit disk")
        if abs(rho(1.0)) > 1.0e-12 or abs(rho.deriv()(1.0) - sig(1.0)) > 1.0e-12:
            raise InvalidGeneratingFunction("the LMM is not consistent")

    # series

    def untempered_coeffs(self, alpha: float, n_max: int) -> np.ndarray:
        """Coefficients of :math:`\\omega(z)^\\alpha` (no tempering)."""
        if self.kind == "fbdf":
            base = _poly_in_one_minus_z([0.0] + [1.0 / k for k in range(1, self.p + 1)])
            return series_power_coeffs(base, alpha, n_max)
        if self.kind == "gngf":
            binom = series_power_coeffs([1.0, -1.0], alpha, n_max)
            poly = _poly_in_one_minus_z(newton_gregory_coeffs(alpha, self.p))
            return np.convolve(binom, poly)[: n_max + 1]
        if self.kind == "ftrap":
            return rational_power_coeffs([2.0, -2.0], [1.0, 1.0], alpha, n_max)
        # reversed polynomials z^k rho(1/z) and z^k sigma(1/z)
        k = len(self.rho_hat) - 1
        rho_rev = self.rho_hat[::-1]
        sig_rev = (tuple(self.sigma_hat) + (0.0,) * (k + 1 - len(self.sigma_hat)))[::-1]
        return rational_power_coeffs(rho_rev, sig_rev, alpha, n_max)

    def symbol(self, s: np.ndarray, alpha: float) -> np.ndarray:
        r"""Evaluate :math:`F_\omega(\lambda) = (\tau\lambda)^{-\alpha}
        \omega^{(\alpha,0)}(1 - \tau\lambda)` as a function of :math:`s = \tau\lambda`.

        Complex arguments use principal branches of the reduced base, so the
        result is analytic away from the negative real *s* axis.
        """
        s = np.asarray(s)
        if self.kind == "gngf":
            g = newton_gregory_coeffs(alpha, self.p)
            return np.polynomial.polynomial.polyval(s, g)
        if self.kind == "fbdf":
            coeffs = [1.0 / k for k in range(1, self.p + 1)]
            return np.polynomial.polynomial.polyval(s, coeffs) ** alpha
        if self.kind == "ftrap":
            return (2.0 / (2.0 - s)) ** alpha
        k = len(self.rho_hat) - 1
        rho_rev = np.polynomial.Polynomial(self.rho_hat[::-1])
        sig_rev = np.polynomial.Polynomial(
            (tuple(self.sigma_hat) + (0.0,) * (k + 1 - len(self.sigma_hat)))[::-1]
        )
        z = 1.0 - s
        return (rho_rev(z) / (s * sig_rev(z))) ** alpha


GNGF2 = GeneratingFunction.gngf(2)


# }}}


# {{{ weight tables


def kahan_cumsum(x: np.ndarray) -> np.ndarray:
    """Cumulative sum with Neumaier compensation."""
    out = np.empty(len(x))
    s = 0.0
    comp = 0.0
    for i, v in enumerate(np.asarray(x, dtype=float).tolist()):
        t = s + v
        if abs(s) >= abs(v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
        out[i] = s + comp
    return out


@dataclass(frozen=True)
class WeightTable:
    """Convolution weights ``weights[k]`` and scaled partial sums
    ``cumsum[n] = tau**-alpha * sum(weights[:n + 1])``."""

    gf: GeneratingFunction
    alpha: float
    sigma: float
    tau: float
    weights: np.ndarray
    cumsum: np.ndarray

    def __post_init__(self) -> None:
        self.weights.setflags(write=False)
        self.cumsum.setflags(write=False)

    @property
    def n_max(self) -> int:
        return self.weights.size - 1

    def to_csv(self, path: str | Path | None = None) -> str:
        """Write ``k,omega,cumsum`` rows; returns the text when *path* is None."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "omega", "cumsum"])
        for k, (w, b) in enumerate(zip(self.weights.tolist(), self.cumsum.tolist())):
            writer.writerow([k, repr(w), repr(b)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @staticmethod
    def read_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
        with open(path, newline="") as fd:
            rows = list(csv.DictReader(fd))
        return (
            np.array([float(r["omega"]) for r in rows]),
            np.array([float(r["cumsum"]) for r in rows]),
        )


def convolution_weights(
    gf: GeneratingFunction, alpha: float, sigma: float, tau: float, n_max: int
) -> WeightTable:
    """Build the weight table :math:`\\omega_k^{(\\alpha,\\sigma)}`, ``k = 0..n_max``."""
    if tau <= 0:
        raise ValueError(f"step size must be positive: {tau}")
    if sigma < 0:
        raise ValueError(f"tempering parameter must be non-negative: {sigma}")

    w = gf.untempered_coeffs(alpha, n_max)
    if sigma > 0:
        w = w * np.exp(-tau * sigma * np.arange(n_max + 1))
    cumsum = tau ** (-alpha) * kahan_cumsum(w)
    return WeightTable(gf, float(alpha), float(sigma), float(tau), w, cumsum)


# }}}


# {{{ starting weights


def tempered_power_derivative(
    alpha: float, sigma: float, gamma: float, t: float | np.ndarray
) -> float | np.ndarray:
    r"""Tempered fractional derivative :math:`D^{\sigma,\alpha} t^\gamma`.

    Uses :math:`D^{\sigma,\alpha} u = e^{-\sigma t} D^\alpha (e^{\sigma t} u)` and
    expands the exponential, giving

    .. math::

        e^{-\sigma t} \sum_{i \ge 0} \frac{\sigma^i}{i!}
            \frac{\Gamma(\gamma + i + 1)}{\Gamma(\gamma + i + 1 - \alpha)}
            t^{\gamma + i - \alpha}.
    """
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    if gamma <= 0:
        raise ValueError("gamma must be positive")

    if sigma == 0:
        coef = special.gamma(gamma + 1) * special.rgamma(gamma + 1 - alpha)
        total = coef * t ** (gamma - alpha)
        return float(total[0]) if scalar else total

    st = sigma * t
    log_st = np.log(st)
    total = np.zeros_like(t)
    for i in range(200):
        b = gamma + i + 1 - alpha
        if b <= 0 and b == math.floor(b):
            continue  # 1/Gamma vanishes at the poles
        log_coef = special.gammaln(gamma + i + 1) - special.gammaln(i + 1) - special.gammaln(b)
        # the e^{-sigma t} prefactor is folded into the exponent to avoid overflow
        current = special.gammasgn(b) * np.exp(i * log_st + log_coef - st)
        total = total + current
        if i > st.max() and np.all(np.abs(current) <= 1.0e-16 * np.abs(total)):
            break
    else:
        raise SeriesDivergence(f"series did not converge for sigma*t up to {st.max():.3g}")
    total = total * t ** (gamma - alpha)

    return float(total[0]) if scalar else total


@dataclass(frozen=True)
class StartingWeights:
    """Starting weights ``w[n, k-1]`` for the exponents ``gamma`` (``m = len(gamma)``)."""

    gamma: tuple[float, ...]
    w: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.gamma)


def _vandermonde(gamma: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    m = len(gamma)
    k = np.arange(1, m + 1, dtype=float)
    A = k[None, :] ** np.asarray(gamma, dtype=float)[:, None]
    # equilibrate rows and columns before estimating the condition number
    row = 1.0 / np.max(np.abs(A), axis=1)
    As = A * row[:, None]
    col = 1.0 / np.max(np.abs(As), axis=0)
    As = As * col[None, :]
    cond = np.linalg.cond(As)
    if not np.isfinite(cond) or cond > 1.0e14:
        raise IllConditionedStartingSystem(f"condition estimate {cond:.3e} for gamma={gamma}")
    return As, np.stack([row, col])


def _check_gamma(gamma: Sequence[float]) -> tuple[float, ...]:
    gamma = tuple(float(g) for g in gamma)
    if any(g <= 0 for g in gamma):
        raise ValueError("starting-weight exponents must be positive")
    if len(set(gamma)) != len(gamma):
        raise IllConditionedStartingSystem("starting-weight exponents must be distinct")
    return gamma


def starting_weight_table(
    table: WeightTable, gamma: Sequence[float], n_max: int | None = None
) -> StartingWeights:
    r"""Starting weights for every ``n = 0..n_max``.

    Row *n* solves the generalized Vandermonde system

    .. math::

        \sum_{k=1}^{m} w_{n,k} k^{\gamma_j} =
            \tau^{\alpha - \gamma_j} D^{\sigma,\alpha} t^{\gamma_j}\big|_{t_n}
            - \sum_{k=0}^{n} \omega_{n-k} k^{\gamma_j},
        \qquad j = 1, \dots, m,

    which is the exactness condition divided by :math:`\tau^{\gamma_j}`.
    """
    gamma = _check_gamma(gamma)
    n_max = table.n_max if n_max is None else n_max
    m = len(gamma)
    if m == 0:
        return StartingWeights((), np.zeros((n_max + 1, 0)))
    if n_max > table.n_max:
        raise ValueError("weight table is too short")

    As, (row, col) = _vandermonde(gamma)
    alpha, sigma, tau = table.alpha, table.sigma, table.tau
    omega = table.weights[: n_max + 1]
    k = np.arange(n_max + 1, dtype=float)
    n = np.arange(1, n_max + 1, dtype=float)

    rhs = np.zeros((m, n_max + 1))
    for j, g in enumerate(gamma):
        kg = k**g
        if n_max + 1 <= _DIRECT_CONV_LIMIT:
            discrete = np.convolve(omega, kg)[: n_max + 1]
        else:
            discrete = signal.fftconvolve(omega, kg)[: n_max + 1]
        exact = np.zeros(n_max + 1)
        exact[1:] = tau ** (alpha - g) * tempered_power_derivative(alpha, sigma, g, n * tau)
        rhs[j] = exact - discrete

    # row 0 is never used (u_0 - u_0 = 0); keep it zero
    rhs[:, 0] = 0.0
    w = np.linalg.solve(As, rhs * row[:, None]) * col[:, None]
    return StartingWeights(gamma, np.ascontiguousarray(w.T))


def tempered_starting_weight_table(
    table: WeightTable, gamma: Sequence[float], n_max: int | None = None
) -> StartingWeights:
    r"""Starting weights that make the corrected operator exact on
    :math:`e^{-\sigma t}t^{\gamma_j}` instead of :math:`t^{\gamma_j}`.

    Since :math:`D^{\sigma,\alpha}(e^{-\sigma t}v) = e^{-\sigma t}D^\alpha v`, they
    follow from the untempered ones as
    :math:`w_{n,k} = e^{-(n-k)\sigma\tau} w^{(0)}_{n,k}`.
    """
    n_max = table.n_max if n_max is None else n_max
    base = convolution_weights(table.gf, table.alpha, 0.0, table.tau, n_max)
    sw = starting_weight_table(base, gamma, n_max)
    if table.sigma == 0 or sw.m == 0:
        return sw
    n = np.arange(n_max + 1, dtype=float)[:, None]
    k = np.arange(1, sw.m + 1, dtype=float)[None, :]
    return StartingWeights(sw.gamma, sw.w * np.exp(-(n - k) * table.sigma * table.tau))


def starting_weights(
    gf: GeneratingFunction,
    alpha: float,
    sigma: float,
    tau: float,
    gamma: Sequence[float],
    n: int,
) -> np.ndarray:
    """Row :math:`w_{n,1..m}` of the starting weights."""
    if len(gamma) == 0:
        return np.zeros(0)
    table = convolution_weights(gf, alpha, sigma, tau, n)
    return starting_weight_table(table, gamma, n).w[n]


# }}}


def binomial_alternating_sum(m: int, j: int) -> int:
    r""":math:`\sum_{k=j}^{m} \binom{m}{k}\binom{k}{j}(-1)^{k-j}` in exact integer
    arithmetic; equals 1 if ``j == m`` and 0 otherwise."""
    return sum(math.comb(m, k) * math.comb(k, j) * (-1) ** (k - j) for k in range(j, m + 1))
