import math

import numpy as np
import pytest

from angiosim.dynamics import (
    ModelParams,
    SimState,
    StepControl,
    cfl_dt,
    run,
    step,
    write_diagnostics_csv,
    write_trajectory_csv,
)
from angiosim.errors import PositivityError
from angiosim.grid import const_field, make_field, make_grid
from angiosim.sensitivity import saturating_power



def test_model_params_validation(zero_V):
    with pytest.raises(ValueError):
        ModelParams(lam=0.0, mu=0.5, c=-1.0, V=zero_V)
    with pytest.raises(ValueError):
        ModelParams(lam=math.nan, mu=0.5, c=1.0, V=zero_V)
    ModelParams(lam=0.0, mu=0.5, c=0.0, V=zero_V)  # c = 0 allowed (comparison runs)


def test_step_control_validation():
    with pytest.raises(ValueError):
        StepControl(t_end=0.0)
    with pytest.raises(ValueError):
        StepControl(t_end=1.0, dt=-0.1)
    with pytest.raises(ValueError):
        StepControl(t_end=1.0, dt_safety=1.5)
    with pytest.raises(ValueError):
        StepControl(t_end=1.0, output_every=0)


def test_decoupled_logistic_decay(grid65, zero_V):
    # V = 0, lam = 0, mu = 0: u follows u' = -u^2 at every node
    p = ModelParams(lam=0.0, mu=0.0, c=1.0, V=zero_V)
    ctrl = StepControl(t_end=1.0, dt=1e-3)
    traj = run(const_field(grid65, 1.0), const_field(grid65, 1.0), p, ctrl)
    u_final = traj.final_state().u.values
    assert np.abs(u_final - 0.5).max() < 5e-3  # 1/(1+t) at t=1
    # v' = -(1+u) v with u in [0.5, 1]: envelope bounds
    v_final = traj.final_state().v.values
    assert np.all(v_final <= math.exp(-1.0) + 5e-3)
    assert np.all(v_final >= math.exp(-2.0) - 5e-3)


def test_logistic_growth_closed_form(grid65, zero_V):
    lam, u0 = 1.0, 0.5
    p = ModelParams(lam=lam, mu=0.0, c=1.0, V=zero_V)
    ctrl = StepControl(t_end=5.0, dt=1e-3)
    traj = run(const_field(grid65, u0), const_field(grid65, 0.5), p, ctrl)
    exact = lam / (1.0 + ((lam - u0) / u0) * math.exp(-lam * 5.0))
    assert np.abs(traj.final_state().u.values - exact).max() < 5e-3


def test_zero_u_is_invariant(grid65):
    p = ModelParams(lam=0.5, mu=0.5, c=1.0, V=saturating_power(2.0))
    state = SimState(0.0, const_field(grid65, 0.0), const_field(grid65, 0.5))
    ctrl = StepControl(t_end=1.0, dt=0.01)
    v_linf = []
    for _ in range(40):
        state = step(state, p, ctrl)
        assert np.all(state.u.values == 0.0)
        v_linf.append(np.abs(state.v.values).max())
    # mu = 0.5 < threshold: v decays once the boundary layer has formed
    assert all(b < a for a, b in zip(v_linf[5:], v_linf[6:]))
    assert v_linf[-1] < 0.95 * v_linf[0]


def test_zero_v_is_invariant(grid65):
    p = ModelParams(lam=1.0, mu=0.5, c=1.0, V=saturating_power(2.0))
    state = SimState(0.0, const_field(grid65, 0.5), const_field(grid65, 0.0))
    ctrl = StepControl(t_end=1.0, dt=0.01)
    for _ in range(10):
        state = step(state, p, ctrl)
        assert np.all(state.v.values == 0.0)


def test_cfl_dt_zero_state(grid65, zero_V):
    p = ModelParams(lam=0.0, mu=0.5, c=3.0, V=zero_V)
    state = SimState(0.0, const_field(grid65, 0.0), const_field(grid65, 0.0))
    assert cfl_dt(state, p, grid65, dt_safety=0.4) == pytest.approx(0.4 * 0.5, abs=1e-15)
    assert cfl_dt(state, p, grid65, dt_safety=1.0) == pytest.approx(0.5, abs=1e-15)


def test_cfl_dt_halves_when_gradient_doubles(grid65):
    p = ModelParams(lam=0.0, mu=0.0, c=1.0, V=saturating_power(2.0))
    u = const_field(grid65, 0.5)
    # gradients steep enough that the advective candidate is the binding one
    v1 = make_field(grid65, 2.0 * grid65.nodes)
    v2 = make_field(grid65, 4.0 * grid65.nodes)
    dt1 = cfl_dt(SimState(0.0, u, v1), p, grid65)
    dt2 = cfl_dt(SimState(0.0, u, v2), p, grid65)
    assert dt1 / dt2 == pytest.approx(2.0, rel=1e-12)


def test_cfl_dt_reaction_cap_scales(grid65, zero_V):
    p = ModelParams(lam=2.0, mu=0.0, c=1.0, V=zero_V)
    state = SimState(0.0, const_field(grid65, 1.0), const_field(grid65, 0.0))
    # max(lam + 2, 1 + 1) = 4
    assert cfl_dt(state, p, grid65, dt_safety=1.0) == pytest.approx(0.125, abs=1e-15)


def test_run_rejects_bad_initial_data(grid65):
    p = ModelParams(lam=0.0, mu=0.5, c=1.0, V=saturating_power(2.0))
    ctrl = StepControl(t_end=1.0, dt=0.01)
    neg = make_field(grid65, np.full(grid65.n, -0.1) * -1)  # positive; now break it
    bad = np.full(grid65.n, 0.5)
    bad[3] = -0.2
    with pytest.raises(ValueError):
        run(make_field(grid65, bad), neg, p, ctrl)
    other = make_grid(1.0, 33)
    with pytest.raises(ValueError):
        run(const_field(other, 0.5), const_field(grid65, 0.5), p, ctrl)


def test_positivity_error_on_reckless_dt():
    g = make_grid(1.0, 65)
    p = ModelParams(lam=0.0, mu=0.0, c=1.0, V=saturating_power(1.0))
    u = np.zeros(g.n)
    u[10] = 1.0  # isolated spike
    v = make_field(g, 5.0 * g.nodes)  # steep attractant gradient
    ctrl = StepControl(t_end=10.0, dt=0.5)
    with pytest.raises(PositivityError) as exc_info:
        run(make_field(g, u), v, p, ctrl)
    assert exc_info.value.trajectory is not None
    assert exc_info.value.min_value < -1e-9


def test_snapshot_schedule_and_diagnostics(grid65):
    p = ModelParams(lam=0.0, mu=0.5, c=1.0, V=saturating_power(2.0))
    ctrl = StepControl(t_end=0.5, dt=0.01, output_every=10)
    traj = run(const_field(grid65, 0.5), const_field(grid65, 0.5), p, ctrl)
    assert traj.times[0] == 0.0
    assert traj.times[-1] == pytest.approx(0.5, abs=1e-12)
    assert np.allclose(np.diff(traj.times), 0.1, atol=1e-9)
    for key in ("mass_u", "linf_v", "min_u", "boundary_flux_v", "chem_boundary_flux"):
        assert len(traj.diagnostics[key]) == len(traj.states)
    assert traj.min_u_overall >= -1e-12
    assert traj.min_v_overall >= -1e-12


def test_nonnegativity_with_auto_dt(grid257):
    p = ModelParams(lam=0.0, mu=1.2, c=1.0, V=saturating_power(2.0))
    ctrl = StepControl(t_end=5.0, dt=None, output_every=50)
    traj = run(const_field(grid257, 0.5), const_field(grid257, 0.5), p, ctrl)
    assert traj.min_u_overall >= -1e-12
    assert traj.min_v_overall >= -1e-12


def test_mass_bookkeeping_closes(grid257):
    # lam = 0: mass change equals boundary term plus quadratic absorption
    from angiosim.harness import mass_audit

    p = ModelParams(lam=0.0, mu=0.5, c=1.0, V=saturating_power(2.0))
    ctrl = StepControl(t_end=5.0, dt=0.002, output_every=50)
    traj = run(const_field(grid257, 0.5), const_field(grid257, 0.5), p, ctrl)
    audit = mass_audit(traj, tau=1.0)
    h = grid257.h
    tol = 10.0 * (0.002 + h * h) * (audit.t_end - audit.tau) * audit.scale
    assert audit.residual < tol


def test_supersolution_domination_small(grid65):
    base = dict(lam=0.0, mu=0.5, V=saturating_power(2.0))
    ctrl = StepControl(t_end=5.0, dt=0.005, output_every=20)
    u0 = const_field(grid65, 0.5)
    v0 = const_field(grid65, 0.5)
    coupled = run(u0, v0, ModelParams(c=1.0, **base), ctrl)
    twin = run(u0, v0, ModelParams(c=0.0, **base), ctrl)
    assert len(coupled.states) == len(twin.states)
    worst = max(
        float((s.v.values - w.v.values).max())
        for s, w in zip(coupled.states, twin.states)
    )
    assert worst <= 1e-8


def test_two_resolution_consistency():
    p = ModelParams(lam=1.0, mu=0.5, c=1.0, V=saturating_power(2.0))
    finals = []
    for n, dt in ((129, 0.01), (257, 0.005)):
        g = make_grid(1.0, n)
        ctrl = StepControl(t_end=10.0, dt=dt, output_every=100)
        traj = run(const_field(g, 0.5), const_field(g, 0.5), p, ctrl)
        finals.append(
            (traj.series("linf_u")[-1], traj.series("linf_v")[-1])
        )
    assert abs(finals[0][0] - finals[1][0]) < 1e-3
    assert abs(finals[0][1] - finals[1][1]) < 1e-3


def test_run_determinism(grid65):
    p = ModelParams(lam=0.3, mu=0.8, c=1.0, V=saturating_power(2.0))
    ctrl = StepControl(t_end=1.0, dt=None, output_every=7)
    a = run(const_field(grid65, 0.5), const_field(grid65, 0.5), p, ctrl)
    b = run(const_field(grid65, 0.5), const_field(grid65, 0.5), p, ctrl)
    assert np.array_equal(a.final_state().u.values, b.final_state().u.values)
    assert np.array_equal(a.final_state().v.values, b.final_state().v.values)
    assert list(a.times) == list(b.times)


def test_trajectory_csv_writers(grid65, tmp_path):
    p = ModelParams(lam=0.0, mu=0.5, c=1.0, V=saturating_power(2.0))
    ctrl = StepControl(t_end=0.2, dt=0.01, output_every=10)
    traj = run(const_field(grid65, 0.5), const_field(grid65, 0.5), p, ctrl)
    tpath = tmp_path / "trajectory.csv"
    with open(tpath, "w", newline="") as fh:
        write_trajectory_csv(traj, fh)
    lines = tpath.read_text().splitlines()
    assert lines[0] == "t,x,u,v"
    assert len(lines) == 1 + len(traj.states) * grid65.n
    dpath = tmp_path / "diag.csv"
    with open(dpath, "w", newline="") as fh:
        write_diagnostics_csv(traj, fh)
    dlines = dpath.read_text().splitlines()
    assert dlines[0] == "t,mass_u,mass_v,linf_u,linf_v,l2_v_minus_theta,boundary_flux_v"
    assert len(dlines) == 1 + len(traj.states)
