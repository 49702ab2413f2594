from __future__ import annotations

import json

import numpy as np
import pytest

from fastcq.errors import StepFailure
from fastcq.reaction_diffusion import (
    BRUSSELATOR,
    GIERER_MEINHARDT,
    InitialCondition,
    RdProblem,
    RdStepper,
    get_kinetics,
    initial_fields,
    preset,
    rd_step,
    run,
    spatial_operator,
)

# {{{ spatial operator


def test_laplacian_of_constant():
    np.testing.assert_array_equal(spatial_operator(np.full(9, 3.5), 0.1), 0.0)


@pytest.mark.parametrize("k", [1, 3, 7])
def test_laplacian_cosine_eigenvector(k):
    D, M = 2.0, 16
    h = D / M
    x = np.linspace(0, D, M + 1)
    f = np.cos(k * np.pi * x / D)
    lam = -(2 / h**2) * (1 - np.cos(k * np.pi * h / D))
    np.testing.assert_allclose(spatial_operator(f, h), lam * f, atol=1e-11)


def test_laplacian_of_square_with_reflection():
    x = np.linspace(0, 1, 5)
    out = spatial_operator(x**2, 0.25)
    np.testing.assert_allclose(out[1:-1], 2.0, rtol=1e-14)
    # ghost values mirror the first interior point
    assert out[0] == pytest.approx(2.0)
    assert out[-1] == pytest.approx(2 * (0.75**2 - 1) / 0.0625)


# }}}


# {{{ kinetics and setup


def test_steady_states():
    for kin in (GIERER_MEINHARDT, BRUSSELATOR):
        assert kin.f1(kin.u_star, kin.v_star) == 0.0
        assert kin.f2(kin.u_star, kin.v_star) == 0.0
    assert GIERER_MEINHARDT.f1(4.0, 16.0) == 0.0


def test_kinetics_lookup():
    assert get_kinetics("GM") is GIERER_MEINHARDT
    assert get_kinetics("Brusselator") is BRUSSELATOR
    with pytest.raises(ValueError):
        get_kinetics("lotka-volterra")


def test_presets():
    p = preset("fig8b")
    assert (p.kinetics, p.alpha1, p.alpha2, p.d) == (BRUSSELATOR, 0.5, 0.5, 17.0)
    p = preset("fig11", kappa=2.0)
    assert (p.kinetics, p.alpha1, p.alpha2, p.d, p.kappa) == (GIERER_MEINHARDT, 0.5, 1.0, 10.0, 2.0)
    with pytest.raises(ValueError):
        preset("fig99")


def test_random_initial_data_is_seeded():
    a = initial_fields(RdProblem(ic=InitialCondition(seed=4)))
    b = initial_fields(RdProblem(ic=InitialCondition(seed=4)))
    c = initial_fields(RdProblem(ic=InitialCondition(seed=5)))
    np.testing.assert_array_equal(a[0], b[0])
    assert not np.array_equal(a[0], c[0])
    assert np.max(np.abs(a[0] - BRUSSELATOR.u_star)) <= 0.01


def test_problem_validation():
    with pytest.raises(ValueError):
        RdProblem(alpha1=0.0)
    with pytest.raises(ValueError):
        RdProblem(d=-1.0)
    with pytest.raises(ValueError):
        RdProblem(cells=1)
    with pytest.raises(ValueError):
        InitialCondition(kind="checkerboard")


# }}}


# {{{ time stepping


@pytest.mark.parametrize("name", ["fig8b", "fig11"])
def test_homogeneous_state_is_fixed(name):
    p = preset(name, T=5.0, cells=64, ic=InitialCondition(epsilon=0.0))
    stepper = RdStepper(p)
    for _ in range(p.steps - 1):
        rd_step(stepper)
    u, v = stepper.fields()
    assert np.max(np.abs(u - p.kinetics.u_star)) <= 1e-10
    assert np.max(np.abs(v - p.kinetics.v_star)) <= 1e-10


def test_engines_agree():
    base = dict(T=3.0, cells=32, Q=256, N=32)
    hist = {e: run(preset("fig8b", engine=e, **base)) for e in ("direct", "realline", "talbot")}
    ref = hist["direct"].u[-1]
    assert np.max(np.abs(hist["realline"].u[-1] - ref)) <= 1e-9
    assert np.max(np.abs(hist["talbot"].u[-1] - ref)) <= 1e-6


def test_classical_growth_rate_matches_linear_theory():
    # alpha = 1: a single cosine mode of the linearized system grows at the
    # largest real eigenvalue of kappa J - lam_k diag(1, d)
    kin, d, D, cells = BRUSSELATOR, 30.0, 100.0, 128
    h = D / cells
    x = np.linspace(0, D, cells + 1)
    J = np.array([[1.0, 4.0], [-2.0, -4.0]])  # Brusselator Jacobian at (2, 1)

    def growth(j):
        lam = (2 / h**2) * (1 - np.cos(j * np.pi * h / D))
        return np.max(np.linalg.eigvals(J - lam * np.diag([1.0, d])).real)

    j = max(range(1, 64), key=growth)
    rate = growth(j)
    assert rate > 0
    mode = np.cos(j * np.pi * x / D)

    eps = 1e-7
    p = RdProblem(
        kinetics=kin, alpha1=1.0, alpha2=1.0, d=d, D=D, cells=cells, tau=0.005, T=30.0
    )
    stepper = RdStepper(p, (kin.u_star + eps * mode, kin.v_star + eps * mode))
    amps = {}
    for n in range(2, p.steps + 1):
        u, _ = rd_step(stepper)
        if n in (4000, 6000):
            amps[n] = float(np.dot(u - kin.u_star, mode))
    observed = np.log(amps[6000] / amps[4000]) / (2000 * p.tau)
    assert observed == pytest.approx(rate, rel=2e-3)


def test_step_failure_reports_step():
    p = RdProblem(T=1.0, cells=16)
    u0, v0 = initial_fields(p)
    u0[3] = np.nan
    stepper = RdStepper(p, (u0, v0))
    with pytest.raises(StepFailure) as info:
        rd_step(stepper)
    assert info.value.step == 2


# }}}


# {{{ output


def test_history_output(tmp_path):
    p = preset("fig8b", T=0.5, cells=16)
    hist = run(p, save_stride=10)
    assert hist.t[0] == 0.0 and hist.t[-1] == pytest.approx(0.5)
    assert len(hist.t) == 6
    out = hist.write(tmp_path / "run", {"note": "test"})
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["parameters"]["kinetics"] == "brusselator"
    assert manifest["parameters"]["kappa1"] == BRUSSELATOR.stabilization
    assert manifest["note"] == "test"
    assert len(manifest["snapshots"]) == 6
    first = (out / manifest["snapshots"][0]["file"]).read_text().splitlines()
    assert first[0] == "x,u,v" and len(first) == 18
    fields = (out / "fields.csv").read_text().splitlines()
    assert fields[0] == "t,x,u,v" and len(fields) == 1 + 6 * 17


def test_save_times():
    hist = run(preset("fig8b", T=1.0, cells=16), save_times=[0.25, 0.5])
    np.testing.assert_allclose(hist.t, [0.0, 0.25, 0.5, 1.0])
    assert hist.variance("v").shape == (4,)


# }}}
