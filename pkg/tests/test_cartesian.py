import numpy as np
import pytest

from hartreelab import functionals as fn
from hartreelab.cartesian import (CUBE_SPHERE_MAX, SELF_CELL, CartesianField, CartesianGrid,
                                  Config3D, a_direct, a_direct_many, box_potential,
                                  coulomb_kernel, lattice_l_omega, lattice_report, laplacian,
                                  minimize_action_3d, poisson_energy_identity, poisson_hartree,
                                  radial_distance, reflect, spherical_average, symmetry_deficit)
from hartreelab.errors import ConfigurationError, GridTooLargeError, PreconditionError
from hartreelab.radial import RadialField

from oracles import mc_self_cell, tplquad_box


@pytest.fixture(scope="module")
def small():
    return CartesianGrid(16, 10.0)


def gaussian(grid, s=2.0, shift=(0.0, 0.0, 0.0)):
    return CartesianField.from_function(
        grid, lambda x, y, z: np.exp(-((x - shift[0]) ** 2 + (y - shift[1]) ** 2
                                       + (z - shift[2]) ** 2) / s ** 2))


@pytest.mark.parametrize("kw, exc", [(dict(n=64), GridTooLargeError), (dict(n=15), ConfigurationError),
                                     (dict(n=8), ConfigurationError),
                                     (dict(half_width=5.0), ConfigurationError)])
def test_grid_guards(kw, exc):
    with pytest.raises(exc):
        CartesianGrid(**{"n": 16, "half_width": 10.0, **kw})


def test_cell_centres(small):
    c = small.centres
    assert c.size == 16 and not np.any(c == 0)
    np.testing.assert_allclose(c, -c[::-1])
    assert small.h == pytest.approx(20 / 16)


def test_self_cell_constant_monte_carlo():
    mean, err = mc_self_cell()
    assert abs(SELF_CELL - mean) < 5 * err
    assert SELF_CELL == pytest.approx(1.8823126443896601, rel=1e-14)


def test_cube_sphere_constant_monte_carlo():
    v = np.random.default_rng(3).normal(size=(2_000_000, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    assert CUBE_SPHERE_MAX == pytest.approx(4 * np.pi * np.abs(v).max(axis=1).mean(), rel=2e-4)


@pytest.mark.parametrize("lo, hi", [((1, 0, 0), (2, 1, 1)), ((0.5, -1, 2), (1.5, 0.3, 2.4)),
                                    ((-3, -2, -1), (-2.5, -1.5, -0.25))])
def test_box_potential_against_tplquad(lo, hi):
    assert box_potential(np.array(lo, float), np.array(hi, float)) == pytest.approx(
        tplquad_box(lo, hi), rel=1e-9)


def test_box_potential_straddling_origin():
    # unit cube centred at the origin: 3 ln(2 + sqrt 3) - pi / 2
    got = box_potential(np.full(3, -0.5), np.full(3, 0.5))
    assert got == pytest.approx(3 * np.log(2 + np.sqrt(3)) - np.pi / 2, rel=1e-13)
    # additivity across a split of an origin-straddling box
    lo, hi = np.array([-0.3, -0.7, -0.2]), np.array([0.9, 0.4, 1.1])
    mid = hi.copy()
    mid[0] = 0.25
    lo2 = lo.copy()
    lo2[0] = 0.25
    assert got > 0
    assert box_potential(lo, hi) == pytest.approx(box_potential(lo, mid) + box_potential(lo2, hi),
                                                  rel=1e-12)


def test_kernel_symmetric(small):
    k = coulomb_kernel(small)
    # eight-corner sums of the antiderivative cancel to about 1e-11
    np.testing.assert_allclose(k, k[::-1], rtol=1e-10)
    np.testing.assert_allclose(k, np.transpose(k, (2, 0, 1)), rtol=1e-10)


def test_reflections_and_deficit(small):
    g = gaussian(small)
    assert symmetry_deficit(g) == pytest.approx(0.0, abs=1e-14)
    odd = CartesianField(small, g.values * small.mesh[0])
    assert symmetry_deficit(odd) == pytest.approx(2.0, rel=1e-12)
    shifted = gaussian(small, shift=(1.0, 0.0, 0.0))
    np.testing.assert_array_equal(reflect(reflect(shifted, 1), 1).values, shifted.values)
    with pytest.raises(ConfigurationError):
        reflect(g, 0)
    with pytest.raises(PreconditionError):
        symmetry_deficit(CartesianField(small, np.zeros(small.shape)))


def test_a_direct_properties(small, rng):
    f = CartesianField(small, rng.random(small.shape))
    g = CartesianField(small, rng.random(small.shape))
    assert a_direct(f, g) == pytest.approx(a_direct(g, f), rel=1e-12)
    assert a_direct(f, f) > 0
    np.testing.assert_allclose(a_direct_many([(f, g), (f, f)]), [a_direct(f, g), a_direct(f, f)],
                               rtol=1e-13)


def test_a_direct_close_to_radial(grid):
    lat = CartesianGrid(32, 12.0)
    rho = gaussian(lat)
    radial = RadialField.from_function(grid, lambda r: np.exp(-r * r / 4), "even")
    assert a_direct(rho, rho) == pytest.approx(fn.a_form(radial, radial), rel=0.03)


def test_poisson_energy_identity():
    lat = CartesianGrid(32, 12.0)
    rho = gaussian(lat)
    info = poisson_energy_identity(rho)
    values = list(info.values())
    assert all(np.isfinite(v) for v in values if isinstance(v, float))
    phi = poisson_hartree(rho)
    # seven-point equation holds in the interior
    lap = laplacian(phi.values, lat.h)
    inner = (slice(2, -2),) * 3
    np.testing.assert_allclose(-lap[inner], 4 * np.pi * rho.values[inner], atol=1e-6)
    assert a_direct(rho, rho) == pytest.approx(lat.vol * np.sum(rho.values * phi.values), rel=0.02)


def test_lattice_functionals(small):
    f = gaussian(small, 2.5)
    rep = lattice_report(f, 0.2)
    assert rep.action == pytest.approx(0.5 * lattice_l_omega(f, 0.2) + 0.25 * a_direct(
        f.square(), f.square()), rel=1e-12)
    g = gaussian(small, 1.5, (0.5, 0.0, 0.0))
    assert lattice_l_omega(f, 0.2, g) == pytest.approx(lattice_l_omega(g, 0.2, f), rel=1e-12)


def test_binary_roundtrip(tmp_path, small, rng):
    f = CartesianField(small, rng.normal(size=small.shape))
    f.to_binary(tmp_path / "f.bin")
    back = CartesianField.from_binary(tmp_path / "f.bin")
    np.testing.assert_array_equal(back.values, f.values)
    raw = np.frombuffer((tmp_path / "f.bin").read_bytes(), dtype="<f8")
    assert raw[1] == f.values[1, 0, 0]


def test_spherical_average_of_radial_field(small):
    f = CartesianField.from_radial(small, lambda r: np.exp(-r))
    r, v, counts = spherical_average(f)
    np.testing.assert_allclose(v, np.exp(-r), rtol=0.05)
    assert counts.sum() == small.n ** 3
    assert radial_distance(f, lambda r: np.exp(-r)) < 0.02


def test_descent_small_lattice():
    res = minimize_action_3d(Config3D(omega=0.2, n=16, half_width=10.0, max_iters=200))
    assert res.converged
    assert res.action < 0
    assert np.all(np.diff(res.trace) <= 1e-12)
    assert res.symmetry_deficit < 1e-3


def test_config3d_validation():
    with pytest.raises(ConfigurationError):
        Config3D(omega=0.0)
    with pytest.raises(ConfigurationError):
        Config3D(init_kind="noise")
