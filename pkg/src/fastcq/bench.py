"""Timing and accuracy study of the convolution engines on ``u(t) = t + t^2``."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from fastcq.convolution import direct_convolution
from fastcq.operator import make_convolver
from fastcq.weights import GNGF2, GeneratingFunction, convolution_weights

__all__ = ["BenchReport", "BenchRow", "bench", "loglog_slope"]


@dataclass(frozen=True)
class BenchRow:
    n_T: int
    engine: str
    nodes: int  # Q for the real-line engine, N per level for the contour engine
    wall_time_seconds: float
    max_relerr: float


def loglog_slope(sizes: Sequence[float], times: Sequence[float]) -> float:
    """Least-squares slope of ``log(time)`` against ``log(size)``."""
    if len(sizes) < 2:
        return float("nan")
    return float(np.polyfit(np.log(sizes), np.log(times), 1)[0])


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def engines(self) -> list[str]:
        return list(dict.fromkeys(r.engine for r in self.rows))

    def slope(self, engine: str) -> float:
        rows = [r for r in self.rows if r.engine == engine]
        return loglog_slope([r.n_T for r in rows], [r.wall_time_seconds for r in rows])

    def slopes(self) -> dict[str, float]:
        return {e: self.slope(e) for e in self.engines()}

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n_T", "engine", "nodes", "wall_time_seconds", "max_relerr"])
        for r in self.rows:
            writer.writerow(
                [r.n_T, r.engine, r.nodes, repr(r.wall_time_seconds), repr(r.max_relerr)]
            )
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def summary(self) -> str:
        lines = [f"{'n_T':>8} {'engine':>9} {'nodes':>6} {'time [s]':>11} {'max relerr':>11}"]
        for r in self.rows:
            lines.append(
                f"{r.n_T:>8d} {r.engine:>9} {r.nodes:>6d} "
                f"{r.wall_time_seconds:>11.4g} {r.max_relerr:>11.3e}"
            )
        for engine, s in self.slopes().items():
            if np.isfinite(s):
                lines.append(f"slope[{engine}] = {s:.3f}")
        return "\n".join(lines)


def _timed(fn, reps: int):
    times = []
    result = None
    for _ in range(reps):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return float(np.median(times)), result


def _relerr(approx: np.ndarray, exact: np.ndarray) -> float:
    mask = exact != 0
    return float(np.max(np.abs(approx[mask] - exact[mask]) / np.abs(exact[mask])))


def bench(
    sizes: Sequence[int],
    engines: Sequence[str] = ("direct", "realline", "talbot"),
    alpha: float = 0.5,
    sigma: float = 0.0,
    tau: float = 0.01,
    gf: GeneratingFunction = GNGF2,
    Q: int = 140,
    N: int = 20,
    B: int = 5,
    n0: int = 50,
    reps: int | None = None,
) -> BenchReport:
    """Time each engine on ``u(t) = t + t^2`` for every size.

    The direct engine is timed as one batch O(n^2) convolution; the fast
    engines are timed stepping through all samples, including the setup of
    their quadrature. Sizes below 10^4 report the median of three runs.
    """
    sizes = [int(s) for s in sizes]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be strictly increasing")
    report = BenchReport()
    for n_T in sizes:
        table = convolution_weights(gf, alpha, sigma, tau, n_T)
        t = tau * np.arange(n_T + 1)
        u = t + t**2
        exact = direct_convolution(table, u)
        r = reps if reps is not None else (3 if n_T < 10_000 else 1)
        for engine in engines:
            if engine == "direct":
                elapsed, out = _timed(lambda: direct_convolution(table, u), r)
                nodes = 0
            else:

                def stream(engine=engine):
                    conv = make_convolver(table, engine, Q=Q, N=N, B=B, n0=n0, n_max=n_T)
                    step = conv.step
                    return np.array([step(x) for x in u.tolist()])

                elapsed, out = _timed(stream, r)
                nodes = Q if engine == "realline" else N
            report.rows.append(BenchRow(n_T, engine, nodes, elapsed, _relerr(out, exact)))
    return report
