"""Corrected discrete tempered fractional derivative

.. math::

    D_\\tau u_n = \\tau^{-\\alpha}\\sum_{k=0}^{n}\\omega_{n-k}u_k
        + \\tau^{-\\alpha}\\sum_{k=1}^{m} w_{n,k}(u_k - u_0) - b_n u_0,
    \\qquad b_n = \\tau^{-\\alpha}\\sum_{j=0}^{n}\\omega_j,

with the convolution evaluated by any of the engines. This approximates
:math:`D^{\\sigma,\\alpha}(u - u_0)`. With ``anchor="tempered"`` the operator
instead approximates :math:`D^{\\sigma,\\alpha}(u - e^{-\\sigma t}u_0)`: *u_0* is
replaced by :math:`e^{-k\\sigma\\tau}u_0` inside the sums, so that :math:`b_n`
becomes :math:`e^{-n\\sigma\\tau}b_n^{(0)}`, and the starting weights are exact
on :math:`e^{-\\sigma t}t^\\gamma`. Both agree for :math:`\\sigma = 0`.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from fastcq.convolution import Convolver, DirectConvolver
from fastcq.errors import SequenceError
from fastcq.weights import (
    StartingWeights,
    WeightTable,
    kahan_cumsum,
    starting_weight_table,
    tempered_starting_weight_table,
)

__all__ = ["ANCHORS", "ENGINES", "FlmmOperator", "make_convolver"]

ENGINES = ("direct", "talbot", "realline")
ANCHORS = ("constant", "tempered")


def make_convolver(
    table: WeightTable,
    engine: str = "direct",
    *,
    Q: int = 256,
    N: int = 64,
    B: int = 5,
    n0: int = 50,
    n_max: int | None = None,
    epsilon: float = 1.0e-20,
    shape: tuple[int, ...] = (),
) -> Convolver:
    """Build a convolver for *table*; *Q* applies to ``"realline"``, *N* and *B*
    to ``"talbot"``. Short horizons and non-negative integer orders with the
    real-line engine fall back to exact direct summation."""
    n_max = table.n_max if n_max is None else n_max
    if engine == "direct":
        return DirectConvolver(table, shape)
    if n_max <= n0:
        # everything fits in the exact local window
        return DirectConvolver(table, shape)
    if engine == "realline" and table.alpha >= 0 and float(table.alpha).is_integer():
        # finitely many nonzero weights and no real-line representation
        return DirectConvolver(table, shape)
    if engine == "realline":
        from fastcq.realline import realline_convolver

        return realline_convolver(table, Q, n0, n_max, epsilon, shape)
    if engine == "talbot":
        from fastcq.talbot import TalbotConvolver

        return TalbotConvolver(table, N, B, n0, n_max, shape)
    raise ValueError(f"unknown engine {engine!r}; expected one of {ENGINES}")


class FlmmOperator:
    """Streaming evaluation of the corrected operator for one scalar unknown.

    The initial value is sample 0 and is pushed on construction. Each later
    index is handled either by :meth:`apply` or, for implicit schemes, by
    :meth:`split` followed by :meth:`push` once the new value is known.

    :arg convolver: a fresh convolver for the weights of the operator.
    :arg starting: starting weights, rows indexed by *n*; ``None`` means no
        correction terms.
    :arg starting_values: ``u_1..u_m`` known in advance; required when a
        correction term is needed before the corresponding sample is pushed.
    :arg anchor: ``"constant"`` or ``"tempered"``, see the module docstring.
        The starting weights must match (see :meth:`build`).
    """

    def __init__(
        self,
        convolver: Convolver,
        u0: float,
        starting: StartingWeights | None = None,
        starting_values: Sequence[float] | None = None,
        anchor: str = "constant",
    ):
        if anchor not in ANCHORS:
            raise ValueError(f"unknown anchor {anchor!r}; expected one of {ANCHORS}")
        if convolver.n != 0:
            raise SequenceError("the convolver has already been used")
        self.conv = convolver
        self.table = convolver.table
        self.scale = convolver.scale
        self.u0 = float(u0)
        self.starting = starting
        self.m = 0 if starting is None else starting.m
        self._start = np.full(self.m, np.nan)
        if starting_values is not None:
            values = np.asarray(starting_values, dtype=float)
            if values.shape != (self.m,):
                raise ValueError(f"need exactly {self.m} starting values")
            self._start[:] = values
        self.anchor = anchor
        table = self.table
        if anchor == "tempered" and table.sigma > 0:
            decay = np.exp(-table.sigma * table.tau * np.arange(table.n_max + 1))
            untempered = table.gf.untempered_coeffs(table.alpha, table.n_max)
            self._b = decay * (self.scale * kahan_cumsum(untempered))
            self._ref = decay[: self.m + 1] * self.u0
        else:
            self._b = table.cumsum
            self._ref = np.full(self.m + 1, self.u0)
        self.conv.push(self.u0)

    @classmethod
    def build(
        cls,
        table: WeightTable,
        u0: float,
        gamma: Sequence[float] = (),
        engine: str = "direct",
        starting_values: Sequence[float] | None = None,
        anchor: str = "constant",
        **engine_args,
    ) -> FlmmOperator:
        starting = None
        if len(gamma):
            build = tempered_starting_weight_table if anchor == "tempered" else starting_weight_table
            starting = build(table, gamma)
        conv = make_convolver(table, engine, **engine_args)
        return cls(conv, u0, starting, starting_values, anchor)

    @property
    def n(self) -> int:
        """Index of the next sample."""
        return self.conv.n

    def split(self) -> tuple[float, float]:
        """Return ``(known, coef)`` such that the operator at the next index
        equals ``known + coef * u_n``."""
        n = self.n
        coef = self.scale * self.conv.omega0
        known = float(self.conv.memory()) - self._b[n] * self.u0
        if 1 <= n and self.m:
            w = self.starting.w[n]
            for k in range(1, self.m + 1):
                if k == n:
                    coef += self.scale * w[k - 1]
                    known -= self.scale * w[k - 1] * self._ref[k]
                    continue
                uk = self._start[k - 1]
                if np.isnan(uk):
                    raise SequenceError(
                        f"correction at index {n} needs u_{k}, which is not available yet"
                    )
                known += self.scale * w[k - 1] * (uk - self._ref[k])
        return known, coef

    def push(self, u: float) -> None:
        n = self.n
        if 1 <= n <= self.m:
            self._start[n - 1] = u
        self.conv.push(float(u))

    def apply(self, n: int, u: float) -> float:
        """Push ``u_n`` and return the operator value at index *n*."""
        if n != self.n:
            raise SequenceError(f"expected sample {self.n}, got {n}")
        known, coef = self.split()
        self.push(u)
        return known + coef * float(u)
