import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hartreelab import functionals as fn
from hartreelab.errors import (ConfigurationError, ConvergenceError, PreconditionError,
                               RegimeBoundaryError, RegimeWarning)
from hartreelab.radial import RadialField, build_grid
from hartreelab.solver import (SolverConfig, initial_field, minimize_action,
                               minimize_energy_constrained, multistart_uniqueness, n_of_omega,
                               random_bumps, relative_distance, scf_fixed_point, start_seeds,
                               trial_action, trial_field, write_result)


@pytest.mark.parametrize("kw", [dict(omega=0.0), dict(omega=-1.0), dict(el_tol=1e-14),
                                dict(step_size=1.5), dict(mixing=0.0), dict(max_iters=0),
                                dict(init_kind="flat"), dict(init_kind="custom"), dict(n=8)])
def test_config_validation(kw):
    with pytest.raises(ConfigurationError):
        SolverConfig(**kw)


def test_config_roundtrip():
    cfg = SolverConfig(omega=0.15, seed=7, n=1024)
    assert SolverConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    custom = cfg.with_(init_kind="custom", custom_init=np.ones(1024))
    assert "custom_init_sha1" in custom.to_dict()


@settings(max_examples=25, deadline=None)
@given(delta=st.floats(0.01, 1.0), omega=st.floats(0.01, 1.0))
def test_trial_action_closed_form(delta, omega):
    grid = build_grid(1024, 60.0)
    # S can cancel to nearly zero; measure against the size of its terms
    scale = 8 * np.pi * delta ** 2 * (1 + omega) + 20 * np.pi ** 2 * delta ** 4
    assert abs(fn.action(trial_field(grid, delta), omega) - trial_action(delta, omega)) < 1e-6 * scale


def test_initial_fields_are_seeded(grid):
    a, b = random_bumps(grid, 3), random_bumps(grid, 3)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, random_bumps(grid, 4).values)
    e0 = initial_field(SolverConfig(init_kind="scaled-e0", init_amplitude=0.2), grid)
    assert e0.origin_value() == pytest.approx(0.2, rel=1e-5)


@pytest.mark.parametrize("omega", [0.05, 0.1, 0.2])
def test_minimizer_converges_with_negative_action(minimizers, omega):
    res = minimizers[omega]
    assert res.converged and not res.collapsed
    assert res.el_residual <= 1e-8
    assert res.action < 0
    assert np.all(res.chi.values >= 0)
    for delta in (0.05, 0.1):
        assert res.action < trial_action(delta, omega)


def test_action_decreases_monotonically(minimizers):
    trace = np.array(minimizers[0.2].trace)
    assert np.all(np.diff(trace) <= 1e-14 * np.abs(trace[:-1]).max())


def test_mass_decreases_with_omega(minimizers):
    masses = [minimizers[w].report.l2_sq for w in (0.05, 0.1, 0.2)]
    assert masses[0] > masses[1] > masses[2] > 0


def test_scf_agrees_with_gradient_flow(minimizers):
    res = scf_fixed_point(SolverConfig(omega=0.2))
    assert res.converged
    assert relative_distance(res.chi, minimizers[0.2].chi) < 1e-6


def test_constrained_recovers_frequency(minimizers):
    ref = minimizers[0.1]
    res = minimize_energy_constrained(ref.report.l2_sq, SolverConfig(omega=0.1, seed=5))
    assert res.converged
    assert res.omega == pytest.approx(0.1, rel=1e-6)
    assert relative_distance(res.chi, ref.chi) < 1e-6


def test_constrained_rejects_bad_mass():
    with pytest.raises(PreconditionError):
        minimize_energy_constrained(-1.0, SolverConfig())


def test_collapse_above_threshold():
    with pytest.warns(RegimeWarning):
        res = minimize_action(SolverConfig(omega=0.3))
    assert res.collapsed and not res.converged


def test_zero_initial_field(grid):
    res = minimize_action(SolverConfig(n=grid.n), RadialField.zeros(grid))
    assert res.collapsed


def test_iteration_cap_reported():
    res = minimize_action(SolverConfig(max_iters=2))
    assert not res.converged and res.iterations == 2
    assert "no convergence" in res.message


def test_minimizer_is_deterministic():
    a = minimize_action(SolverConfig(omega=0.15, seed=11))
    b = minimize_action(SolverConfig(omega=0.15, seed=11))
    np.testing.assert_array_equal(a.chi.values, b.chi.values)
    assert a.trace == b.trace


def test_n_of_omega(minimizers):
    assert n_of_omega(0.2) == pytest.approx(minimizers[0.2].report.l2_sq, rel=1e-6)
    with pytest.warns(RegimeWarning):
        n_of_omega(0.05)
    with pytest.raises(ConvergenceError):
        n_of_omega(0.2, SolverConfig(max_iters=2))


def test_uniqueness_report():
    rep = multistart_uniqueness(0.2, n_starts=4, seed=1)
    assert rep.holds and rep.max_distance < 1e-6
    assert len(rep.starts) == 4 and rep.excluded == []
    assert [s["seed"] for s in rep.starts] == start_seeds(1, 4)


@pytest.mark.parametrize("omega, exc", [(0.25, RegimeBoundaryError),
                                        (1 / 16 + 1e-12, RegimeBoundaryError),
                                        (0.3, PreconditionError), (0.05, PreconditionError)])
def test_uniqueness_regime_guard(omega, exc):
    with pytest.raises(exc):
        multistart_uniqueness(omega, n_starts=2)


def test_write_result(tmp_path, minimizers):
    paths = write_result(minimizers[0.2], tmp_path, "chi")
    assert [p.name for p in paths] == ["chi.csv", "chi.json"]
    data = json.loads(paths[1].read_text())
    assert data["converged"] and data["report"]["omega"] == 0.2
    lines = paths[0].read_text().splitlines()
    assert lines[0] == "r,value" and len(lines) == 2049
