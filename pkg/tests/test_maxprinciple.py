import warnings

import numpy as np
import pytest
import sympy as sp

from hartreelab.errors import ConditioningWarning, PreconditionError, RegimeBoundaryError
from hartreelab.maxprinciple import (SweepRow, analyse, build_test_function, q_sign_analysis,
                                     regime_of, residual_h, sweep, test_function_spec,
                                     weighted_operator)

from oracles import bisect_first_root, symbolic_weighted_h


@pytest.mark.parametrize("omega, regime", [(0.01, "below_sixteenth"), (0.1, "between_sixteenth_and_quarter"),
                                           (0.25, "exactly_quarter"), (0.25 + 1e-13, "exactly_quarter"),
                                           (0.3, "above_quarter"), (4.0, "above_quarter")])
def test_regimes(omega, regime):
    assert regime_of(omega) == regime
    assert test_function_spec(omega).regime == regime


@pytest.mark.parametrize("omega", [0.01, 0.04, 0.1, 1 / 9, 0.2, 0.3, 9 / 16, 2.0])
def test_coefficients_cancel_low_order_terms(omega):
    expr, (r, beta, A, B, C) = symbolic_weighted_h()
    spec = test_function_spec(omega)
    sub = sp.Poly(expr.subs({beta: sp.nsimplify(spec.beta), A: spec.A, B: spec.B, C: spec.C}), r)
    coeffs = [float(c) for c in sub.all_coeffs()[::-1]] + [0.0, 0.0]
    closed = spec.closed_form(np.array([1.0]))[0]
    scale = max(1.0, abs(spec.B), abs(spec.C))
    assert abs(coeffs[0]) < 1e-12 * scale
    if spec.A == 1.0:
        assert abs(coeffs[1]) < 1e-12 * scale
        assert coeffs[2] == pytest.approx(closed, rel=1e-12)
    else:
        assert coeffs[1] == pytest.approx(closed, rel=1e-12)


def test_quarter_is_plain_exponential():
    spec = test_function_spec(0.25)
    assert (spec.A, spec.B, spec.C) == (0.0, 0.0, 1.0)
    assert residual_h(spec).h_nonnegative


@pytest.mark.parametrize("omega, root", [(1 / 9, -9 + np.sqrt(189)), (1 / 25, 10 / 3)])
def test_known_roots(omega, root):
    positive, first = q_sign_analysis(test_function_spec(omega))
    assert not positive
    assert first == pytest.approx(root, rel=1e-12)


@pytest.mark.parametrize("omega", np.geomspace(0.011, 3.7, 17))
def test_roots_against_bisection(omega):
    spec = test_function_spec(omega)
    positive, first = q_sign_analysis(spec)
    oracle = bisect_first_root(spec.q)
    if oracle is None:
        assert positive and first is None
    else:
        assert not positive and first == pytest.approx(oracle, rel=1e-9)


@pytest.mark.parametrize("omega", [0.02, 0.05, 0.07, 0.15, 0.24, 0.26, 0.5, 3.0])
def test_residual_small_and_h_nonnegative(omega):
    rep = residual_h(test_function_spec(omega))
    assert rep.report.holds and rep.report.rel_residual < 1e-8
    assert rep.h_min > 0


def test_residual_converges_under_refinement():
    spec = test_function_spec(0.3)
    errs = [residual_h(spec, n).report.rel_residual for n in (256, 512, 1024)]
    assert errs[0] > 8 * errs[1] > 64 * errs[2]


def test_weighted_operator_grid():
    r, w = weighted_operator(test_function_spec(0.5), 100, 10.0)
    np.testing.assert_allclose(r, np.arange(1, 101) * 0.1)
    assert w.shape == r.shape


def test_threshold_errors_and_warnings():
    with pytest.raises(RegimeBoundaryError):
        test_function_spec(1 / 16)
    with pytest.raises(PreconditionError):
        test_function_spec(0.0)
    with pytest.warns(ConditioningWarning):
        test_function_spec(1 / 16 + 1e-9)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        test_function_spec(1 / 16 + 1e-4)


def test_sampled_function(grid):
    spec, phi = build_test_function(0.5)
    np.testing.assert_allclose(phi.values, np.exp(-spec.beta * phi.grid.nodes) * spec.q(phi.grid.nodes))


def test_sweep_rows_above_quarter_all_positive():
    rows = sweep(np.linspace(0.2501, 4.0, 50))
    assert all(r.q_always_positive and r.q_sampled_positive and r.consistent for r in rows)


def test_sweep_rows_below_quarter_change_sign():
    omegas = [w for w in np.linspace(0.005, 0.245, 40) if abs(w - 1 / 16) > 1e-6]
    rows = sweep(omegas)
    assert all(not r.q_always_positive and r.first_root is not None and r.consistent for r in rows)


def test_row_export():
    row = analyse(0.5)
    assert isinstance(row, SweepRow)
    assert len(row.csv_row()) == len(SweepRow.csv_header())
    assert row.to_dict()["consistent"]


def test_parallel_sweep_matches_serial():
    omegas = [0.03, 0.2, 0.7]
    assert sweep(omegas, workers=2) == sweep(omegas)
