import json

import numpy as np
import pytest

from hartreelab import functionals as fn
from hartreelab.errors import PreconditionError
from hartreelab.radial import RadialField, build_grid

from oracles import max_kernel_a_form

PI = np.pi


def exp_field(grid, a=1.0):
    return RadialField.from_function(grid, lambda r: np.exp(-a * r))


def test_newton_potential_of_exponential(grid):
    # rho = e^{-r}: Phi(r) = 4 pi [2/r - e^{-r} (1 + 2/r)]
    phi = fn.coulomb_potential(exp_field(grid))
    r = grid.nodes
    exact = 4 * PI * (2 / r - np.exp(-r) * (1 + 2 / r))
    np.testing.assert_allclose(phi.values, exact, rtol=1e-6)
    # far field is the monopole M/r with M = 8 pi
    assert phi.values[-1] * grid.r_max == pytest.approx(8 * PI, rel=1e-7)
    assert np.all(np.diff(phi.values) < 0)


def test_a_form_closed_form(grid):
    rho = exp_field(grid)
    assert fn.a_form(rho, rho) == pytest.approx(20 * PI ** 2, rel=2e-7)
    assert fn.hminus1_norm_sq(rho) == pytest.approx(5 * PI, rel=2e-7)


@pytest.mark.parametrize("n, rtol", [(2048, 2e-7), (4096, 2e-8), (8192, 2e-9)])
def test_a_form_refines(n, rtol):
    g = build_grid(n, 60.0)
    rho = exp_field(g)
    assert abs(fn.a_form(rho, rho) / (20 * PI ** 2) - 1) < rtol


@pytest.mark.parametrize("a, b", [(1.0, 0.5), (0.7, 2.0), (1.3, 1.3)])
def test_a_form_against_double_sum(grid, a, b):
    f = lambda r: np.exp(-a * r) * (1 + r)
    g = lambda r: np.exp(-b * r * r)
    ref = max_kernel_a_form(f, g)
    got = fn.a_form(RadialField.from_function(grid, f), RadialField.from_function(grid, g, "even"))
    assert got == pytest.approx(ref, rel=3e-5)


def test_a_form_symmetric_bilinear(grid, rng):
    f, g, h = (RadialField.from_function(grid, lambda r, c=c: np.exp(-c * r * r))
               for c in rng.uniform(0.2, 2.0, 3))
    assert fn.a_form(f, g) == pytest.approx(fn.a_form(g, f), rel=1e-13)
    lhs = fn.a_form(f * 2.0 + g, h)
    assert lhs == pytest.approx(2 * fn.a_form(f, h) + fn.a_form(g, h), rel=1e-12)


def test_ground_state_pieces(grid):
    chi = exp_field(grid, 0.5)
    rep = fn.report(chi, 0.2)
    np.testing.assert_allclose([rep.l2_sq, rep.h1dot_sq, rep.coulomb_attraction, rep.a_quad],
                               [8 * PI, 2 * PI, 4 * PI, 20 * PI ** 2], rtol=1e-6)
    assert fn.hartree_potential(chi).origin_value() == pytest.approx(4 * PI, rel=1e-5)


def test_report_relations(grid):
    chi = RadialField.from_function(grid, lambda r: 0.3 * np.exp(-r * r / 9), "even")
    w = 0.17
    rep = fn.report(chi, w)
    k, m, c, a = rep.h1dot_sq, rep.l2_sq, rep.coulomb_attraction, rep.a_quad
    assert rep.l_omega == pytest.approx(k - c + w * m, rel=1e-13)
    assert rep.energy == pytest.approx(k / 2 + a / 4 - c / 2, rel=1e-13)
    assert rep.action == pytest.approx(rep.energy + w * m / 2, rel=1e-13)
    assert fn.action(chi, w) == pytest.approx(rep.action, rel=1e-13)
    assert fn.energy(chi) == pytest.approx(rep.energy, rel=1e-13)


def test_l_omega_polarization(grid):
    f = RadialField.from_function(grid, lambda r: np.exp(-r / 2))
    g = RadialField.from_function(grid, lambda r: r * np.exp(-r / 3))
    w = 0.3
    assert fn.l_omega(f, w, f) == pytest.approx(fn.l_omega(f, w), rel=1e-12)
    assert fn.l_omega(f, w, g) == pytest.approx(fn.l_omega(g, w, f), rel=1e-12)
    expand = fn.l_omega(f, w) + 2 * fn.l_omega(f, w, g) + fn.l_omega(g, w)
    assert fn.l_omega(f + g, w) == pytest.approx(expand, rel=1e-11)


@pytest.mark.parametrize("omega", [0.0, -0.1])
def test_report_rejects_nonpositive_omega(grid, omega):
    with pytest.raises(PreconditionError):
        fn.report(exp_field(grid), omega)


def test_sobolev_ratio_is_dilation_invariant(grid):
    ratios = [fn.sobolev_ratio_probe(exp_field(grid, a)) for a in (0.5, 1.0, 2.0)]
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-5)
    with pytest.raises(PreconditionError):
        fn.sobolev_ratio_probe(RadialField.zeros(grid))


def test_report_serialization(grid):
    rep = fn.report(exp_field(grid, 0.5), 0.2)
    data = json.loads(rep.to_json())
    assert list(data) == ["omega", "l2_sq", "h1dot_sq", "coulomb_attraction", "a_quad",
                          "l_omega", "energy", "action"]
    assert rep.csv_row() == [data[k] for k in rep.csv_header()]
