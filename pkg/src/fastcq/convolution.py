"""Streaming evaluators for the discrete convolution
:math:`\\tau^{-\\alpha}\\sum_{k=0}^{n}\\omega_{n-k}u_k`.

All convolvers share one protocol: samples are pushed in order with
:meth:`Convolver.push`; :meth:`Convolver.memory` returns the part of the
convolution at the *next* index that does not involve the next sample, and
:meth:`Convolver.step` pushes a sample and returns the full value. Samples may
be scalars or numpy arrays of a fixed shape (one independent convolution per
entry).
"""

from __future__ import annotations

import numpy as np

from fastcq.weights import WeightTable

__all__ = ["Convolver", "DirectConvolver", "SampleBuffer", "direct_convolution"]


class SampleBuffer:
    """Chronological sample storage.

    With ``window=None`` every sample is kept (growable array). Otherwise the
    buffer is a ring holding exactly the newest ``window`` samples.
    """

    def __init__(self, shape: tuple[int, ...], window: int | None = None, capacity: int = 64):
        self.shape = shape
        self.window = window
        size = window if window is not None else capacity
        self._buf = np.zeros((max(size, 1),) + shape)
        self.count = 0

    @property
    def nbytes(self) -> int:
        return self._buf.nbytes

    def append(self, u) -> None:
        size = self._buf.shape[0]
        if self.window is None:
            if self.count == size:
                grown = np.zeros((2 * size,) + self.shape)
                grown[:size] = self._buf
                self._buf = grown
            self._buf[self.count] = u
        else:
            self._buf[self.count % size] = u
        self.count += 1

    def _check(self, first: int, stop: int) -> None:
        if stop > self.count or first < 0:
            raise IndexError(f"samples {first}..{stop - 1} not available")
        if self.window is not None and first < self.count - self.window:
            raise IndexError(f"sample {first} is no longer retained")

    def __getitem__(self, k: int) -> np.ndarray:
        self._check(k, k + 1)
        return self._buf[k % self._buf.shape[0] if self.window is not None else k]

    def weighted_sum(self, rev_weights: np.ndarray, first: int, stop: int):
        """``sum_i rev_weights[i] * u[first + i]`` over ``first <= k < stop``."""
        self._check(first, stop)
        if self.window is None:
            return _weighted_sum(rev_weights, self._buf[first:stop])
        size = self._buf.shape[0]
        a, b = first % size, (stop - 1) % size + 1
        if a < b:
            return _weighted_sum(rev_weights, self._buf[a:b])
        split = size - a
        return _weighted_sum(rev_weights[:split], self._buf[a:]) + _weighted_sum(
            rev_weights[split:], self._buf[:b]
        )


def _weighted_sum(rev_weights: np.ndarray, samples: np.ndarray):
    # one shared kernel so that every engine sums the local window identically
    return np.tensordot(rev_weights, samples, axes=(0, 0))


class Convolver:
    """Common bookkeeping for all engines."""

    def __init__(self, table: WeightTable, shape: tuple[int, ...] = ()):
        self.table = table
        self.alpha = table.alpha
        self.sigma = table.sigma
        self.tau = table.tau
        self.scale = table.tau ** (-table.alpha)
        self.shape = tuple(shape)
        self.n = 0  # number of samples pushed so far

    @property
    def omega0(self) -> float:
        return float(self.table.weights[0])

    def memory(self):
        """:math:`\\tau^{-\\alpha}\\sum_{k<n}\\omega_{n-k}u_k` for the next index *n*."""
        raise NotImplementedError

    def push(self, u) -> None:
        raise NotImplementedError

    def step(self, u):
        """Push ``u_n`` and return the full convolution at index ``n``."""
        value = self.memory() + self.scale * self.omega0 * np.asarray(u, dtype=float)
        self.push(u)
        return value[()] if np.ndim(value) == 0 else value


class DirectConvolver(Convolver):
    """Exact evaluation by direct summation, O(n) work per step."""

    def __init__(self, table: WeightTable, shape: tuple[int, ...] = ()):
        super().__init__(table, shape)
        self.samples = SampleBuffer(self.shape)
        w = table.weights
        nz = np.flatnonzero(w[1:])
        # weights that vanish identically beyond some index (e.g. order zero)
        self.support = int(nz[-1]) + 2 if nz.size else 1

    def memory(self):
        n = self.n
        if n == 0:
            return np.zeros(self.shape)[()]
        if n > self.table.n_max:
            raise IndexError(f"weight table has no entry {n}")
        first = max(0, n - self.support + 1)
        rev = self.table.weights[n - first : 0 : -1]
        return self.scale * self.samples.weighted_sum(rev, first, n)

    def push(self, u) -> None:
        self.samples.append(u)
        self.n += 1


def direct_convolution(table: WeightTable, u: np.ndarray) -> np.ndarray:
    """All values :math:`\\tau^{-\\alpha}\\sum_{k\\le n}\\omega_{n-k}u_k`, ``n < len(u)``,
    by direct O(n^2) summation."""
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    return table.tau ** (-table.alpha) * np.convolve(table.weights[:n], u)[:n]
