"""Fractional activator-inhibitor systems on an interval,

.. math::

    \\partial_t u = \\kappa f_1(u, v) + D^{1-\\alpha_1}_{RL}\\,\\partial_x^2 u, \\qquad
    \\partial_t v = \\kappa f_2(u, v) + d\\,D^{1-\\alpha_2}_{RL}\\,\\partial_x^2 v,

with zero-flux boundaries, discretized by central finite differences in space
and a stabilized semi-implicit BDF2 scheme in time. The memory of the
diffusion terms runs through any of the convolution engines.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import lapack

from fastcq.errors import StepFailure
from fastcq.operator import make_convolver
from fastcq.weights import GNGF2, GeneratingFunction, convolution_weights

__all__ = [
    "BRUSSELATOR",
    "GIERER_MEINHARDT",
    "PRESETS",
    "FieldHistory",
    "InitialCondition",
    "Kinetics",
    "RdProblem",
    "RdStepper",
    "get_kinetics",
    "initial_fields",
    "preset",
    "rd_step",
    "run",
    "spatial_operator",
]


# {{{ kinetics


@dataclass(frozen=True)
class Kinetics:
    """Reaction terms with their homogeneous steady state.

    :arg stabilization: default value of the stabilization constants
        :math:`\\kappa_1 = \\kappa_2`.
    :arg q_long: wavenumber of the long-wave sinusoidal perturbation.
    """

    name: str
    f1: Callable[[np.ndarray, np.ndarray], np.ndarray]
    f2: Callable[[np.ndarray, np.ndarray], np.ndarray]
    u_star: float
    v_star: float
    stabilization: float = 1.0
    q_long: float = 0.5


GIERER_MEINHARDT = Kinetics(
    "gierer-meinhardt",
    lambda u, v: 1.0 - u + 3.0 * u**2 / v,
    lambda u, v: u**2 - v,
    4.0,
    16.0,
    stabilization=10.0,
    q_long=0.4,
)

BRUSSELATOR = Kinetics(
    "brusselator",
    lambda u, v: 2.0 - 3.0 * u + u**2 * v,
    lambda u, v: 2.0 * u - u**2 * v,
    2.0,
    1.0,
    stabilization=2.0,
    q_long=0.5,
)

_KINETICS = {k.name: k for k in (GIERER_MEINHARDT, BRUSSELATOR)}


def get_kinetics(name: str) -> Kinetics:
    key = name.strip().lower().replace("_", "-")
    aliases = {"gm": "gierer-meinhardt", "gierermeinhardt": "gierer-meinhardt"}
    key = aliases.get(key, key)
    try:
        return _KINETICS[key]
    except KeyError:
        raise ValueError(f"unknown kinetics {name!r}; expected one of {sorted(_KINETICS)}") from None


# }}}


# {{{ problem


@dataclass(frozen=True)
class InitialCondition:
    """Perturbation ``u* + epsilon r_1(x)``, ``v* + epsilon r_2(x)``.

    ``kind`` is ``"random"`` (independent uniform values on [-1, 1] per grid
    point, drawn from *seed*), ``"long-wave"`` or ``"short-wave"``
    (``r_1 = r_2 = sin(q x)``; *q* defaults to the kinetics' long-wave value
    or 5).
    """

    kind: str = "random"
    epsilon: float = 0.01
    q: float | None = None
    seed: int | None = 0

    def __post_init__(self) -> None:
        if self.kind not in ("random", "long-wave", "short-wave"):
            raise ValueError(f"unknown initial condition {self.kind!r}")


@dataclass(frozen=True)
class RdProblem:
    """Parameters of one run. The mesh has ``cells + 1`` points on ``[0, D]``."""

    kinetics: Kinetics = BRUSSELATOR
    alpha1: float = 0.5
    alpha2: float = 0.5
    d: float = 17.0
    kappa: float = 1.0
    kappa1: float | None = None
    kappa2: float | None = None
    D: float = 100.0
    cells: int = 256
    tau: float = 0.01
    T: float = 500.0
    ic: InitialCondition = field(default_factory=InitialCondition)
    engine: str = "realline"
    Q: int = 256
    N: int = 64
    B: int = 5
    n0: int = 50
    gf: GeneratingFunction = GNGF2

    def __post_init__(self) -> None:
        for name in ("alpha1", "alpha2"):
            a = getattr(self, name)
            if not 0 < a <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {a}")
        for name in ("d", "kappa", "D", "tau", "T"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.cells < 2:
            raise ValueError("need at least two cells")
        if self.T < 2 * self.tau:
            raise ValueError("need at least two time steps")

    @property
    def h(self) -> float:
        return self.D / self.cells

    @property
    def steps(self) -> int:
        return int(round(self.T / self.tau))

    @property
    def stabilization(self) -> tuple[float, float]:
        k = self.kinetics.stabilization
        return (
            k if self.kappa1 is None else self.kappa1,
            k if self.kappa2 is None else self.kappa2,
        )

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.D, self.cells + 1)

    def manifest(self) -> dict:
        """All effective parameters as plain JSON-compatible data."""
        data = {
            k: v
            for k, v in asdict(self).items()
            if k not in ("kinetics", "ic", "gf")
        }
        k1, k2 = self.stabilization
        data.update(
            kinetics=self.kinetics.name,
            kappa1=k1,
            kappa2=k2,
            h=self.h,
            gf=self.gf.name,
            ic=asdict(self.ic),
        )
        return data


PRESETS = {
    "fig8a": dict(kinetics="brusselator", alpha1=0.3, alpha2=0.3, d=13.0),
    "fig8b": dict(kinetics="brusselator", alpha1=0.5, alpha2=0.5, d=17.0),
    "fig8c": dict(kinetics="brusselator", alpha1=0.8, alpha2=0.8, d=23.0),
    "fig10": dict(kinetics="gierer-meinhardt", alpha1=0.5, alpha2=1.0, d=8.0),
    "fig11": dict(kinetics="gierer-meinhardt", alpha1=0.5, alpha2=1.0, d=10.0),
    "gm-classical": dict(kinetics="gierer-meinhardt", alpha1=1.0, alpha2=1.0, d=10.0),
}


def preset(name: str, **overrides) -> RdProblem:
    """Problem from a named parameter set; keyword arguments override it."""
    try:
        params = dict(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}") from None
    params.update(overrides)
    if isinstance(params["kinetics"], str):
        params["kinetics"] = get_kinetics(params["kinetics"])
    return RdProblem(**params)


def initial_fields(problem: RdProblem) -> tuple[np.ndarray, np.ndarray]:
    kin, ic = problem.kinetics, problem.ic
    x = problem.grid()
    if ic.kind == "random":
        rng = np.random.default_rng(ic.seed)
        r1 = rng.uniform(-1.0, 1.0, x.size)
        r2 = rng.uniform(-1.0, 1.0, x.size)
    else:
        q = ic.q if ic.q is not None else (kin.q_long if ic.kind == "long-wave" else 5.0)
        r1 = r2 = np.sin(q * x)
    return kin.u_star + ic.epsilon * r1, kin.v_star + ic.epsilon * r2


# }}}


# {{{ discretization


def spatial_operator(f: np.ndarray, h: float) -> np.ndarray:
    """Three-point Laplacian with reflecting ghost points ``f[-1] = f[1]``,
    ``f[M+1] = f[M-1]``."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] < 3:
        raise ValueError("need at least three grid points")
    out = np.empty_like(f)
    out[1:-1] = f[:-2] - 2.0 * f[1:-1] + f[2:]
    out[0] = 2.0 * (f[1] - f[0])
    out[-1] = 2.0 * (f[-2] - f[-1])
    return out / h**2


class _TridiagonalSolver:
    """LU factors of ``a I - c Laplacian`` for repeated solves."""

    def __init__(self, size: int, a: float, c: float, h: float):
        off = -c / h**2
        diag = np.full(size, a + 2.0 * c / h**2)
        lower = np.full(size - 1, off)
        upper = np.full(size - 1, off)
        upper[0] = 2.0 * off
        lower[-1] = 2.0 * off
        self.factors = lapack.dgttrf(lower, diag, upper)
        info = self.factors[-1]
        if info != 0:
            raise StepFailure(f"singular step matrix (info={info})")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        dl, d, du, du2, ipiv, _ = self.factors
        x, info = lapack.dgttrs(dl, d, du, du2, ipiv, rhs)
        if info != 0:
            raise StepFailure(f"tridiagonal solve failed (info={info})")
        return x


class _Component:
    """One field: its memory convolver and step matrix."""

    def __init__(self, problem: RdProblem, alpha: float, diffusion: float, stab: float, u0):
        beta = 1.0 - alpha
        tau = problem.tau
        n_steps = problem.steps
        table = convolution_weights(problem.gf, beta, 0.0, tau, n_steps)
        # order zero has no memory beyond the current sample
        engine = "direct" if beta == 0 else problem.engine
        self.conv = make_convolver(
            table,
            engine,
            Q=problem.Q,
            N=problem.N,
            B=problem.B,
            n0=problem.n0,
            n_max=n_steps,
            shape=u0.shape,
        )
        self.diffusion = diffusion
        self.h = problem.h
        self.stab = stab
        self.c0 = diffusion * self.conv.scale * self.conv.omega0
        self.solver = _TridiagonalSolver(u0.size, 1.5 / tau + stab, self.c0, problem.h)
        self.conv.push(spatial_operator(u0, self.h))

    def step(self, prev, prev2, forcing, tau):
        """Solve for the new field in increment form about the linear
        extrapolation ``2 prev - prev2``."""
        guess = 2.0 * prev - prev2
        memory = self.diffusion * self.conv.memory()
        rhs = forcing + memory + self.c0 * spatial_operator(guess, self.h) - (prev - prev2) / tau
        new = guess + self.solver.solve(rhs)
        self.conv.push(spatial_operator(new, self.h))
        return new


class RdStepper:
    """Time stepper holding the two most recent field levels and the memory."""

    def __init__(self, problem: RdProblem, fields: tuple[np.ndarray, np.ndarray] | None = None):
        self.problem = problem
        u0, v0 = initial_fields(problem) if fields is None else fields
        u0 = np.asarray(u0, dtype=float)
        v0 = np.asarray(v0, dtype=float)
        k1, k2 = problem.stabilization
        self.comp_u = _Component(problem, problem.alpha1, 1.0, k1, u0)
        self.comp_v = _Component(problem, problem.alpha2, problem.d, k2, v0)
        kin, kappa, tau = problem.kinetics, problem.kappa, problem.tau
        self.F_prev2 = (kin.f1(u0, v0), kin.f2(u0, v0))
        # first step: forward Euler, the memory term vanishes at t = 0
        u1 = u0 + tau * kappa * self.F_prev2[0]
        v1 = v0 + tau * kappa * self.F_prev2[1]
        self.comp_u.conv.push(spatial_operator(u1, problem.h))
        self.comp_v.conv.push(spatial_operator(v1, problem.h))
        self.F_prev = (kin.f1(u1, v1), kin.f2(u1, v1))
        self.u = (u1, u0)
        self.v = (v1, v0)
        self.n = 1

    @property
    def t(self) -> float:
        return self.n * self.problem.tau

    def fields(self) -> tuple[np.ndarray, np.ndarray]:
        return self.u[0], self.v[0]

    def step(self) -> None:
        p = self.problem
        kappa, tau = p.kappa, p.tau
        n = self.n + 1
        fu = kappa * (2.0 * self.F_prev[0] - self.F_prev2[0])
        fv = kappa * (2.0 * self.F_prev[1] - self.F_prev2[1])
        u_new = self.comp_u.step(*self.u, fu, tau)
        v_new = self.comp_v.step(*self.v, fv, tau)
        if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))):
            raise StepFailure(f"non-finite field at step {n}", n)
        kin = p.kinetics
        self.F_prev2 = self.F_prev
        self.F_prev = (kin.f1(u_new, v_new), kin.f2(u_new, v_new))
        self.u = (u_new, self.u[0])
        self.v = (v_new, self.v[0])
        self.n = n


def rd_step(stepper: RdStepper) -> tuple[np.ndarray, np.ndarray]:
    """Advance by one step and return the new fields."""
    try:
        stepper.step()
    except StepFailure as exc:
        if exc.step is None:
            exc.step = stepper.n + 1
        raise
    return stepper.fields()


# }}}


# {{{ driver


@dataclass
class FieldHistory:
    problem: RdProblem
    x: np.ndarray
    t: list[float] = field(default_factory=list)
    u: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def record(self, t: float, u: np.ndarray, v: np.ndarray) -> None:
        self.t.append(float(t))
        self.u.append(u.copy())
        self.v.append(v.copy())

    def variance(self, which: str = "u") -> np.ndarray:
        """Spatial variance of each snapshot."""
        return np.array([np.var(f) for f in getattr(self, which)])

    def long_csv(self) -> str:
        """Long-format table ``t,x,u,v`` of every snapshot."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "x", "u", "v"])
        for t, u, v in zip(self.t, self.u, self.v):
            for x, ui, vi in zip(self.x.tolist(), u.tolist(), v.tolist()):
                writer.writerow([repr(t), repr(x), repr(ui), repr(vi)])
        return buf.getvalue()

    def write(self, out: str | Path, extra: dict | None = None) -> Path:
        """Write one ``x,u,v`` CSV per snapshot, ``fields.csv`` in long format
        and ``manifest.json``."""
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        names = []
        for i, (u, v) in enumerate(zip(self.u, self.v)):
            name = f"snapshot_{i:05d}.csv"
            with open(out / name, "w", newline="") as fd:
                writer = csv.writer(fd, lineterminator="\n")
                writer.writerow(["x", "u", "v"])
                for row in zip(self.x.tolist(), u.tolist(), v.tolist()):
                    writer.writerow([repr(c) for c in row])
            names.append(name)
        (out / "fields.csv").write_text(self.long_csv())
        manifest = {
            "parameters": self.problem.manifest(),
            "snapshots": [{"t": t, "file": n} for t, n in zip(self.t, names)],
        }
        if extra:
            manifest.update(extra)
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        return out


def run(
    problem: RdProblem,
    save_stride: int | None = None,
    save_times: list[float] | None = None,
) -> FieldHistory:
    """Integrate to ``T``; snapshots every *save_stride* steps (default: first
    and last step only) and at the steps nearest to *save_times*."""
    stepper = RdStepper(problem)
    history = FieldHistory(problem, problem.grid())
    n_steps = problem.steps
    wanted = set()
    if save_times:
        wanted = {int(round(t / problem.tau)) for t in save_times}
    history.record(0.0, *initial_fields(problem))
    if save_stride == 1 or 1 in wanted:
        history.record(stepper.t, *stepper.fields())
    for n in range(2, n_steps + 1):
        rd_step(stepper)
        if (save_stride and n % save_stride == 0) or n in wanted or n == n_steps:
            history.record(stepper.t, *stepper.fields())
    return history


# }}}
