from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import special

from fastcq.errors import NonlinearSolveFailure, UnsupportedOrder
from fastcq.fode import FodeProblem, convergence_table, linear_reference, mittag_leffler, solve

# {{{ Mittag-Leffler


def test_ml_trivial_values():
    assert mittag_leffler(0.5, 0.0) == 1.0
    for t in (0.1, 1.0, 7.0):
        assert mittag_leffler(1.0, -t) == pytest.approx(math.exp(-t), rel=1e-15)


def test_ml_half_at_minus_one():
    # e * erfc(1) to 30 digits
    assert mittag_leffler(0.5, -1.0) == pytest.approx(0.4275835761558070044, rel=1e-14)


@pytest.mark.parametrize("x", [0.01, 0.3, 0.99, 1.01, 2.0, 5.0, 17.0, 60.0, 400.0])
def test_ml_half_against_erfcx(x):
    assert mittag_leffler(0.5, -x) == pytest.approx(special.erfcx(x), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8, 0.95])
def test_ml_methods_agree_at_switch(alpha):
    for z in (-0.5, -1.0, -1.5):
        s = mittag_leffler(alpha, z, "series")
        q = mittag_leffler(alpha, z, "integral")
        assert s == pytest.approx(q, rel=1e-11)


def test_ml_is_completely_monotone_on_samples():
    z = -np.linspace(0, 30, 61)
    vals = np.array([mittag_leffler(0.6, zi) for zi in z])
    assert np.all(vals > 0) and np.all(np.diff(vals) < 0)


def test_ml_validation():
    with pytest.raises(UnsupportedOrder):
        mittag_leffler(1.5, -1.0)
    with pytest.raises(ValueError):
        mittag_leffler(0.5, 1.0)
    with pytest.raises(ValueError):
        mittag_leffler(0.5, -1.0, "pade")


# }}}


# {{{ solver


def _linear(alpha, sigma, **kw):
    def make(tau):
        return FodeProblem(alpha=alpha, sigma=sigma, tau=tau, **kw)

    return make


@pytest.mark.parametrize("m, order", [(0, 1.0), (1, 2.0)])
def test_first_order_limit(m, order):
    # alpha = 1 is BDF2; without a correction the first step is inconsistent
    # and limits the global order to one
    taus = [2.0**-4, 2.0**-5, 2.0**-6]
    rows = convergence_table(_linear(1.0, 0.0, engine="direct", m=m), taus, lambda t: np.exp(-t))
    assert rows[-1][2] == pytest.approx(order, abs=0.1)


@pytest.mark.parametrize(
    "m, errs",
    [
        (0, (4.8036e-2, 3.5869e-2)),
        (1, (4.7715e-4, 2.5331e-4)),
        (2, (2.5974e-5, 1.2654e-5)),
        (3, (1.9848e-5, 6.9865e-6)),
    ],
)
def test_untempered_table_leading_rows(m, errs):
    def ref(t):
        return linear_reference(0.5, 0.0, t)

    make = _linear(0.5, 0.0, m=m, startup="exact", exact=ref)
    rows = convergence_table(make, [2.0**-5, 2.0**-6], ref)
    for (_, err, _), expected in zip(rows, errs):
        assert err == pytest.approx(expected, rel=5e-3)


def test_engines_agree():
    base = dict(alpha=0.6, sigma=0.2, tau=2.0**-6, T=5.0, m=2)
    f = lambda u, t: u * (1 - u * u)  # noqa: E731
    trajs = [solve(FodeProblem(f=f, engine=e, **base)) for e in ("direct", "realline", "talbot")]
    np.testing.assert_allclose(trajs[1].u, trajs[0].u, rtol=0, atol=1e-10)
    np.testing.assert_allclose(trajs[2].u, trajs[0].u, rtol=0, atol=1e-7)


def test_nonlinear_residuals_and_derivative_forms():
    f = lambda u, t: u * (1 - u * u)  # noqa: E731
    dfdu = lambda u, t: 1 - 3 * u * u  # noqa: E731
    p = dict(alpha=0.5, tau=2.0**-5, T=4.0, m=1, engine="direct")
    a = solve(FodeProblem(f=f, dfdu=dfdu, **p))
    b = solve(FodeProblem(f=f, **p))
    np.testing.assert_allclose(a.u, b.u, atol=1e-11)
    assert np.max(np.abs(a.residuals)) <= 1e-11
    assert a.newton_iters.max() <= 10


def test_fine_startup_is_close_to_exact():
    def ref(t):
        return linear_reference(0.5, 0.0, t)

    p = dict(alpha=0.5, tau=2.0**-5, T=1.0, m=2, engine="direct")
    fine = solve(FodeProblem(**p))
    exact = solve(FodeProblem(startup="exact", exact=ref, **p))
    np.testing.assert_allclose(fine.u[1:3], ref(fine.t[1:3]), rtol=1e-3)
    assert np.max(np.abs(fine.u - exact.u)) < 1e-4


def test_tempered_anchor_converges_to_damped_reference():
    def ref(t):
        return linear_reference(0.5, 0.5, t)

    make = _linear(0.5, 0.5, m=1, T=2.0, anchor="tempered", startup="exact", exact=ref)
    rows = convergence_table(make, [2.0**-5, 2.0**-6, 2.0**-7], ref)
    assert rows[-1][1] < rows[0][1] / 3
    assert rows[-1][2] == pytest.approx(1.0, abs=0.15)


def test_newton_failure_is_reported():
    p = FodeProblem(alpha=0.5, f=lambda u, t: math.nan, tau=0.1, T=1.0, engine="direct")
    with pytest.raises(NonlinearSolveFailure) as info:
        solve(p)
    assert info.value.step == 1


def test_trajectory_csv(tmp_path):
    traj = solve(FodeProblem(alpha=0.5, tau=0.25, T=1.0, engine="direct"))
    text = traj.to_csv(tmp_path / "traj.csv")
    lines = text.splitlines()
    assert lines[0] == "t,u,newton_iters" and len(lines) == 6
    assert (tmp_path / "traj.csv").read_text() == text


def test_problem_validation():
    with pytest.raises(ValueError):
        FodeProblem(alpha=0.5, startup="exact")
    with pytest.raises(UnsupportedOrder):
        FodeProblem(alpha=1.2)
    with pytest.raises(ValueError):
        FodeProblem(alpha=0.5, sigma=-1.0)
    with pytest.raises(ValueError):
        FodeProblem(alpha=0.5, tau=20.0)


# }}}
