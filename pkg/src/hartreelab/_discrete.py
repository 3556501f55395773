"""Second-order discrete model of the reduced radial problem.

Works with ``u = r * chi`` on the interior nodes ``r_1, ..., r_{n-1}`` of a
uniform grid with ``u(0) = u(r_max) = 0``.  The discrete action is built from
the three-point Laplacian and trapezoid sums, and ``gradient`` is its exact
derivative, so descent, line search and residual all refer to one model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from .errors import ConfigurationError
from .radial import FOUR_PI, RadialField, RadialGrid


@dataclass(frozen=True, eq=False)
class ReducedModel:
    grid: RadialGrid

    def __post_init__(self):
        if self.grid.spacing_kind != "uniform":
            raise ConfigurationError("the reduced model needs a uniform grid")

    @property
    def h(self) -> float:
        return self.grid.spacing

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes[:-1]

    # conversions ---------------------------------------------------------

    def to_u(self, chi: RadialField) -> np.ndarray:
        return chi.values[:-1] * self.r

    def to_field(self, u) -> RadialField:
        values = np.append(np.asarray(u) / self.r, 0.0)
        return RadialField(self.grid, values, "regular")

    # quadratic pieces ----------------------------------------------------

    def inner(self, u, v) -> float:
        return FOUR_PI * self.h * float(np.dot(u, v))

    def norm(self, u) -> float:
        return np.sqrt(self.inner(u, u))

    def laplacian(self, u) -> np.ndarray:
        up = np.concatenate([[0.0], u, [0.0]])
        return (up[2:] - 2.0 * up[1:-1] + up[:-2]) / self.h**2

    def tridiagonal(self, potential):
        """Diagonal and off-diagonal of ``-D2 + potential``."""
        m = len(self.r)
        return 2.0 / self.h**2 + potential, np.full(m - 1, -1.0 / self.h**2)

    def precondition(self, v, omega: float) -> np.ndarray:
        """Apply ``(-D2 + omega)^{-1}``."""
        m = len(self.r)
        ab = np.empty((3, m))
        ab[0, 0] = ab[2, -1] = 0.0
        ab[0, 1:] = ab[2, :-1] = -1.0 / self.h**2
        ab[1] = 2.0 / self.h**2 + omega
        return solve_banded((1, 1), ab, v)

    def l_omega(self, u, omega: float) -> float:
        du = np.diff(np.concatenate([[0.0], u, [0.0]]))
        kin = FOUR_PI * float(np.dot(du, du)) / self.h
        return kin + self.inner(u, (omega - 1.0 / self.r) * u)

    def lowest_eigenpairs(self, potential, count: int):
        """Lowest ``count`` eigenpairs of ``-D2 + potential``, normalized in ``inner``."""
        d, e = self.tridiagonal(potential)
        w, vec = eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1))
        vec = vec / np.sqrt(FOUR_PI * self.h)
        return w, vec.T

    # Hartree pieces ------------------------------------------------------

    def density_potential(self, q) -> np.ndarray:
        """Potential of the reduced density ``q = r^2 rho``:
        ``4 pi h [sum_{j<=i} q_j / r_i + sum_{j>i} q_j / r_j]``."""
        inner = np.cumsum(q) / self.r
        tail = np.cumsum((q / self.r)[::-1])[::-1]
        outer = np.append(tail[1:], 0.0)
        return FOUR_PI * self.h * (inner + outer)

    def phi(self, u) -> np.ndarray:
        """Hartree potential of ``u``."""
        return self.density_potential(u * u)

    def a_quad(self, u) -> float:
        return self.inner(u, self.phi(u) * u)

    def action(self, u, omega: float) -> float:
        return 0.5 * self.l_omega(u, omega) + 0.25 * self.a_quad(u)

    def energy(self, u) -> float:
        return 0.5 * self.l_omega(u, 0.0) + 0.25 * self.a_quad(u)

    def gradient(self, u, omega: float) -> np.ndarray:
        """``(-D2 - 1/r + omega + phi(u)) u``; the derivative of ``action`` in ``inner``."""
        return -self.laplacian(u) + (omega - 1.0 / self.r + self.phi(u)) * u

    def el_residual(self, u, omega: float) -> float:
        nu = self.norm(u)
        if nu == 0.0:
            return 0.0
        return self.norm(self.gradient(u, omega)) / nu

    def quartic_coefficients(self, u, d, omega: float):
        """Coefficients ``c0..c4`` of the quartic ``alpha -> action(u + alpha d)``."""
        pu, pud, pd = (self.density_potential(q) for q in (u * u, u * d, d * d))
        a = self.inner
        # The slope is taken from the gradient directly; polarization would cancel digits.
        return np.array([
            0.5 * self.l_omega(u, omega) + 0.25 * a(u * u, pu),
            self.inner(self.gradient(u, omega), d),
            0.5 * self.l_omega(d, omega) + a(u * d, pud) + 0.5 * a(u * u, pd),
            a(u * d, pd),
            0.25 * a(d * d, pd),
        ])
