import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import solve_ivp

from dengue_moo import (
    STATE_NAMES,
    ConfigurationError,
    ModelParameters,
    StateVector,
    TimeGrid,
    integrate_rk4,
    load_model_config,
    rhs,
)


def reference_rhs(t, y, c_of_t, p: ModelParameters):
    # written out from the model equations, independent of the compiled kernel
    sh, eh, ih, rh, am, sm, em, im = y
    c = c_of_t(t)
    lam_h = p.B * p.beta_mh * p.m * im
    lam_m = p.B * p.beta_hm * ih
    return [
        p.mu_h - (lam_h + p.mu_h) * sh,
        lam_h * sh - (p.nu_h + p.mu_h) * eh,
        p.nu_h * eh - (p.eta_h + p.mu_h) * ih,
        p.eta_h * ih - p.mu_h * rh,
        p.phi * p.m / p.k * (1 - am) * (sm + em + im) - (p.eta_A + p.mu_A) * am,
        p.eta_A * p.k / p.m * am - (lam_m + p.mu_m) * sm - c * sm,
        lam_m * sm - (p.mu_m + p.eta_m) * em - c * em,
        p.eta_m * em - p.mu_m * im - c * im,
    ]


controls = arrays(np.float64, 337, elements=st.floats(0.0, 1.0))


def test_default_grid():
    g = TimeGrid()
    assert g.n_nodes == 337
    assert g.times[-1] == 84.0
    assert g.trapezoid_weights().sum() == pytest.approx(84.0)


def test_grid_rejects_fractional_steps():
    with pytest.raises(ConfigurationError):
        TimeGrid(T=84.1, h=0.25)
    with pytest.raises(ConfigurationError):
        TimeGrid(h=0.0)


def test_parameter_validation():
    with pytest.raises(ConfigurationError, match="beta_mh"):
        ModelParameters(beta_mh=1.5)
    with pytest.raises(ConfigurationError, match="mu_h"):
        ModelParameters(mu_h=-1.0)
    with pytest.raises(ConfigurationError, match="nope"):
        ModelParameters().with_overrides(nope=1.0)
    assert ModelParameters().with_overrides(beta_hm=0.75).beta_hm == 0.75


def test_initial_state_must_be_normalized():
    with pytest.raises(ConfigurationError):
        StateVector(s_h=0.5)


def test_rhs_matches_hand_written_equations(rng):
    p = ModelParameters()
    for _ in range(10):
        y = rng.random(8)
        c = rng.random()
        np.testing.assert_allclose(rhs(y, c, p), reference_rhs(0.0, y, lambda t: c, p), rtol=1e-13, atol=1e-15)


def test_rhs_human_total_is_stationary_at_unit_population(rng):
    y = rng.random(8)
    y[:4] /= y[:4].sum()
    assert abs(rhs(y, 0.3, ModelParameters())[:4].sum()) < 1e-15


def test_control_validation():
    with pytest.raises(ConfigurationError, match="336"):
        integrate_rk4(np.zeros(336))
    with pytest.raises(ConfigurationError):
        integrate_rk4(np.full(337, 1.2))
    traj = integrate_rk4(0.5)
    assert np.all(traj.control == 0.5)


def _adaptive(control, grid, p):
    coarse = TimeGrid()
    sol = solve_ivp(reference_rhs, (0, 84), StateVector().as_array(),
                    args=(lambda t: np.interp(t, coarse.times, control), p),
                    method="DOP853", rtol=1e-11, atol=1e-13, t_eval=grid.times, max_step=0.05)
    return sol.y.T


def test_rk4_agrees_with_adaptive_solver_on_humans(rng):
    grid = TimeGrid()
    p = ModelParameters()
    control = rng.random(grid.n_nodes)
    traj = integrate_rk4(control, p, grid)
    np.testing.assert_allclose(traj.states[:, :4], _adaptive(control, grid, p)[:, :4], atol=2e-5)


def test_rk4_agrees_with_adaptive_solver_on_fine_grid(rng):
    # the aquatic stage relaxes at about 12/day, close to the RK4 stability
    # limit for h = 0.25; a finer grid resolves it
    p = ModelParameters()
    control = rng.random(TimeGrid().n_nodes)
    fine = TimeGrid().refined(4)
    traj = integrate_rk4(np.interp(fine.times, TimeGrid().times, control), p, fine)
    np.testing.assert_allclose(traj.states, _adaptive(control, fine, p), atol=1e-4)


def test_uncontrolled_outbreak_shape():
    traj = integrate_rk4(0.0)
    peak = int(np.argmax(traj.i_h))
    assert 0 < peak < 336
    assert traj.i_h[peak] > 10 * traj.i_h[0]
    # full control keeps the outbreak from taking off
    assert integrate_rk4(1.0).i_h.max() <= traj.i_h[0] + 1e-12


def test_refinement_converges_at_fourth_order():
    grid = TimeGrid()
    finals = [integrate_rk4(0.0, grid=grid.refined(f)).states[-1] for f in (1, 2, 4)]
    ratio = np.max(np.abs(finals[0] - finals[1])) / np.max(np.abs(finals[1] - finals[2]))
    assert np.log2(ratio) > 3.8


@given(controls)
def test_human_population_conserved(control):
    traj = integrate_rk4(control)
    assert np.max(np.abs(traj.human_total() - 1.0)) <= 1e-9


@given(controls)
def test_states_stay_nonnegative(control):
    assert integrate_rk4(control).states.min() > -1e-12


def test_trajectory_columns_by_name():
    traj = integrate_rk4(0.0)
    for j, name in enumerate(STATE_NAMES):
        np.testing.assert_array_equal(getattr(traj, name), traj.states[:, j])
    with pytest.raises(AttributeError):
        traj.nonsense


def test_load_model_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"beta_mh": 0.75, "params": {"phi": 5.0},
                                "init": {"s_h": 0.99765, "i_h": 0.002}, "grid": {"T": 42}}))
    cfg = load_model_config(path)
    assert cfg.params.beta_mh == 0.75 and cfg.params.phi == 5.0
    assert cfg.init.i_h == 0.002
    assert cfg.grid.n_nodes == 169


@pytest.mark.parametrize("data, key", [
    ({"init": {"x_h": 1}}, "x_h"),
    ({"grid": {"dt": 1}}, "dt"),
    ({"params": {"gamma": 1}}, "gamma"),
])
def test_load_model_config_names_bad_keys(data, key):
    with pytest.raises(ConfigurationError, match=key):
        load_model_config(data)


def test_load_model_config_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        load_model_config(tmp_path / "absent.json")
