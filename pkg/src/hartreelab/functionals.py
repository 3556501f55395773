"""Coulomb forms, Hartree potential and the energy/action functionals of radial fields.

Densities are passed explicitly: ``a_form(f, g)`` integrates the product of
two densities against 1/|x - y|, so the action uses ``a_form(chi**2, chi**2)``.
For radial densities Newton's theorem reduces the kernel to 1/max(r, s).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import PreconditionError
from .radial import FOUR_PI, RadialField, integrate_radial, l2_inner, norms


def coulomb_potential(density: RadialField) -> RadialField:
    """Potential ``int density(y) / |x - y| dy`` of a radial density.

    Evaluated as 4*pi*[(1/r) int_0^r f s^2 ds + int_r^R f s ds] with running
    integrals, so the kink of 1/max(r, s) never enters a quadrature panel.
    """
    grid = density.grid
    x = grid.extended_nodes
    f = density.extended()
    inner = grid.cumulative(f * x**2)
    outer_cum = grid.cumulative(f * x)
    outer = outer_cum[-1] - outer_cum
    phi = FOUR_PI * (inner[1:] / grid.nodes + outer[1:])
    return RadialField(grid, phi, "regular")


def hartree_potential(chi: RadialField) -> RadialField:
    """Hartree potential ``(|chi|^2 * 1/|x|)(r)`` of a radial field."""
    return coulomb_potential(chi.square())


def a_form(f: RadialField, g: RadialField) -> float:
    """Coulomb bilinear form ``int int f(x) g(y) / |x - y| dx dy`` of two radial densities."""
    if f is g:
        return l2_inner(f, coulomb_potential(f))
    fg = l2_inner(f, coulomb_potential(g))
    gf = l2_inner(g, coulomb_potential(f))
    return 0.5 * (fg + gf)


def hminus1_norm_sq(f: RadialField) -> float:
    """Homogeneous H^{-1} norm squared, equal to ``a_form(f, f) / (4 pi)``."""
    return a_form(f, f) / FOUR_PI


def coulomb_attraction(chi: RadialField) -> float:
    """``int |chi|^2 / |x| dx``."""
    return FOUR_PI * integrate_radial(chi.square(), 1)


def l_omega(chi: RadialField, omega: float, psi: RadialField | None = None) -> float:
    """Quadratic (or, with ``psi``, bilinear) form of -Delta - 1/|x| + omega."""
    if psi is None:
        l2_sq, h1_sq = norms(chi)
        return h1_sq - coulomb_attraction(chi) + omega * l2_sq
    # Polarization keeps the bilinear form consistent with the quadratic one.
    return 0.25 * (l_omega(chi + psi, omega) - l_omega(chi - psi, omega))


@dataclass(frozen=True)
class FunctionalReport:
    """All functionals of a field at one frequency."""

    omega: float
    l2_sq: float
    h1dot_sq: float
    coulomb_attraction: float
    a_quad: float
    l_omega: float
    energy: float
    action: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    @staticmethod
    def csv_header() -> list[str]:
        return ["omega", "l2_sq", "h1dot_sq", "coulomb_attraction", "a_quad",
                "l_omega", "energy", "action"]

    def csv_row(self) -> list[float]:
        return [getattr(self, k) for k in self.csv_header()]


def report(chi: RadialField, omega: float) -> FunctionalReport:
    """Evaluate mass, kinetic, Coulomb and Hartree terms and the derived functionals."""
    if not omega > 0:
        raise PreconditionError(f"omega must be positive, got {omega}")
    l2_sq, h1_sq = norms(chi)
    coul = coulomb_attraction(chi)
    rho = chi.square()
    a_quad = a_form(rho, rho)
    lw = h1_sq - coul + omega * l2_sq
    energy = 0.5 * h1_sq + 0.25 * a_quad - 0.5 * coul
    action = 0.5 * lw + 0.25 * a_quad
    return FunctionalReport(omega=float(omega), l2_sq=l2_sq, h1dot_sq=h1_sq,
                            coulomb_attraction=coul, a_quad=a_quad, l_omega=lw,
                            energy=energy, action=action)


def action(chi: RadialField, omega: float) -> float:
    return report(chi, omega).action


def energy(chi: RadialField) -> float:
    l2_sq, h1_sq = norms(chi)
    rho = chi.square()
    return 0.5 * h1_sq + 0.25 * a_form(rho, rho) - 0.5 * coulomb_attraction(chi)


def sobolev_ratio_probe(chi: RadialField) -> float:
    """Ratio ``||chi||_{L^3} / (||chi||_{H^1dot}^{1/3} ||chi^2||_{H^-1dot}^{1/3})``.

    The ratio is invariant under dilations chi(x) -> chi(lambda x); it is a
    diagnostic for the interpolation estimate, whose constant is not known.
    """
    if not np.any(chi.values):
        raise PreconditionError("ratio probe needs a nonzero field")
    cube = chi.with_values(np.abs(chi.values) ** 3, "regular")
    l3 = (FOUR_PI * integrate_radial(cube, 2)) ** (1.0 / 3.0)
    _, h1_sq = norms(chi)
    hm1_sq = hminus1_norm_sq(chi.square())
    return l3 / (h1_sq ** (1.0 / 6.0) * hm1_sq ** (1.0 / 6.0))
