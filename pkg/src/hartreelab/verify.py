"""Numerical checks of the identities and inequalities satisfied by the functionals.

Every check returns an :class:`IdentityReport`.  Identities compare two
numbers with a relative tolerance; inequalities ``lhs <= rhs`` are accepted
with a relative slack on the dominant side.  Form checks take the form and
the field type as parameters so the same code runs on radial fields and on
lattice fields.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import functionals as fn
from .errors import PreconditionError
from .radial import RadialField

EPS = 1e-300


@dataclass(frozen=True)
class IdentityReport:
    """Outcome of one check.

    ``rel_residual = |lhs - rhs| / max(|lhs|, |rhs|, 1e-300)``.  For
    inequalities ``holds`` means
    ``lhs <= rhs + tolerance * max(|lhs|, |rhs|)``.
    """

    name: str
    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float
    holds: bool
    tolerance: float
    kind: str = "identity"
    details: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        """``(rhs - lhs) / max(|lhs|, |rhs|)``; negative when an inequality is violated."""
        return (self.rhs - self.lhs) / max(abs(self.lhs), abs(self.rhs), EPS)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["slack"] = self.slack
        return {k: (float(v) if isinstance(v, np.floating) else v) for k, v in d.items()}


def identity(name, lhs, rhs, tol, **details) -> IdentityReport:
    lhs, rhs = float(lhs), float(rhs)
    abs_res = abs(lhs - rhs)
    rel = abs_res / max(abs(lhs), abs(rhs), EPS)
    return IdentityReport(name, lhs, rhs, abs_res, rel, bool(rel <= tol), tol, "identity", details)


def inequality(name, lhs, rhs, slack, **details) -> IdentityReport:
    lhs, rhs = float(lhs), float(rhs)
    abs_res = abs(lhs - rhs)
    rel = abs_res / max(abs(lhs), abs(rhs), EPS)
    holds = lhs <= rhs + slack * max(abs(rhs), abs(lhs))
    return IdentityReport(name, lhs, rhs, abs_res, rel, bool(holds), slack, "inequality", details)


def reports_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)


def summary_table(reports) -> str:
    lines = [f"{'check':<34} {'lhs':>14} {'rhs':>14} {'rel_res':>10}  ok"]
    for r in reports:
        lines.append(f"{r.name:<34} {r.lhs:>14.6e} {r.rhs:>14.6e} {r.rel_residual:>10.2e}  "
                     f"{'yes' if r.holds else 'NO'}")
    return "\n".join(lines)


# Pohozaev and the critical-point relation --------------------------------------------

def pohozaev_residuals(chi: RadialField, omega: float, tol: float = 1e-3):
    """Mass and dilation identities of a solution.

    ``K + omega M = C - A`` and ``K + 3 omega M = 2 C - 5 A / 2`` with
    ``K = ||grad chi||^2``, ``M = ||chi||^2``, ``C = int chi^2/|x|``,
    ``A = A(chi^2)``.  Nonzero residuals on non-solutions are expected.
    """
    rep = fn.report(chi, omega)
    k, m, c, a = rep.h1dot_sq, rep.l2_sq, rep.coulomb_attraction, rep.a_quad
    first = identity("pohozaev_mass", k + omega * m, c - a, tol, omega=omega)
    second = identity("pohozaev_dilation", k + 3 * omega * m, 2 * c - 2.5 * a, tol, omega=omega)
    return first, second


def action_a_relation(result, tol: float = 1e-3) -> IdentityReport:
    """``S_omega(chi) = -A(chi^2) / 4`` for a converged minimizer."""
    if not result.converged or result.report is None:
        raise PreconditionError("the action relation needs a converged minimizer")
    return identity("action_equals_minus_quarter_A", result.report.action,
                    -0.25 * result.report.a_quad, tol, omega=result.omega)


# forms on generic fields ----------------------------------------------------------------------

def parallelogram_law(p, q, a_form=fn.a_form, tol: float = 1e-10) -> IdentityReport:
    """``A(p+q) + A(p-q) = 2 A(p) + 2 A(q)`` for densities ``p, q``."""
    lhs = a_form(p + q, p + q) + a_form(p - q, p - q)
    rhs = 2 * a_form(p, p) + 2 * a_form(q, q)
    return identity("parallelogram", lhs, rhs, tol)


def cauchy_inequalities(f, g, a_form=fn.a_form, slack: float = 1e-10):
    """``A(f^2, g^2)`` and ``A(fg, fg)`` are both at most ``sqrt(A(f^2) A(g^2))``."""
    f2, g2, fg = f.square(), g.square(), f * g
    bound = np.sqrt(a_form(f2, f2) * a_form(g2, g2))
    return (inequality("cauchy_mixed", a_form(f2, g2), bound, slack),
            inequality("cauchy_product", a_form(fg, fg), bound, slack))


def clarkson_L(f, g, omega: float, l_form=fn.l_omega, tol: float = 1e-10) -> IdentityReport:
    """``L((f+g)/2) + L((f-g)/2) = (L(f) + L(g)) / 2``."""
    if not omega > 0:
        raise PreconditionError(f"omega must be positive, got {omega}")
    lhs = l_form((f + g) * 0.5, omega) + l_form((f - g) * 0.5, omega)
    rhs = 0.5 * (l_form(f, omega) + l_form(g, omega))
    return identity("clarkson_L", lhs, rhs, tol)


def clarkson_A(f, g, a_form=fn.a_form, slack: float = 1e-9,
               expansion_tol: float = 1e-10) -> IdentityReport:
    """Refined Clarkson inequality for the Coulomb form.

    ``A(((f+g)/2)^2) + A(((f-g)/2)^2) <= (A(f^2) + A(g^2)) / 8 + 3 sqrt(A(f^2) A(g^2)) / 4``.
    ``details`` carries the check of the expansion
    ``LHS = [A(f^2) + A(g^2) + 2 A(f^2, g^2) + 4 A(fg, fg)] / 8``; ``holds``
    requires both.
    """
    p, m = (f + g) * 0.5, (f - g) * 0.5
    p2, m2 = p.square(), m.square()
    f2, g2, fg = f.square(), g.square(), f * g
    lhs = a_form(p2, p2) + a_form(m2, m2)
    af, ag = a_form(f2, f2), a_form(g2, g2)
    rhs = (af + ag) / 8 + 0.75 * np.sqrt(af * ag)
    expansion = (af + ag + 2 * a_form(f2, g2) + 4 * a_form(fg, fg)) / 8
    exp_rep = identity("clarkson_A_expansion", lhs, expansion, expansion_tol)
    rep = inequality("clarkson_A", lhs, rhs, slack,
                     expansion_rel_residual=exp_rep.rel_residual, expansion_holds=exp_rep.holds)
    if not exp_rep.holds:
        rep = IdentityReport(**{**asdict(rep), "holds": False})
    return rep


def clarkson_II(f, g, mu: float, nu: float, omega: float, l_form=fn.l_omega, a_form=fn.a_form,
                match_tol: float = 1e-8, tol: float = 1e-10, slack: float = 1e-9):
    """Two-parameter Clarkson relations for a pair with equal invariants.

    Requires ``L(f) = L(g)``, ``A(f^2) = A(g^2)`` (to ``match_tol`` of their
    scale) and ``2 (mu^2 + nu^2) = 1``.  Returns the identity
    ``L(mu f + nu g) + L(mu f - nu g) = L(f)`` and the inequality
    ``A((mu f + nu g)^2) + A((mu f - nu g)^2) <= A(f^2)``.
    """
    if mu < 0 or nu < 0:
        raise PreconditionError("mu and nu must be non-negative")
    if abs(2 * (mu * mu + nu * nu) - 1) > 1e-12:
        raise PreconditionError(f"2 (mu^2 + nu^2) = {2 * (mu * mu + nu * nu)!r} differs from 1")
    lf, lg = l_form(f, omega), l_form(g, omega)
    f2, g2 = f.square(), g.square()
    af, ag = a_form(f2, f2), a_form(g2, g2)
    # L is indefinite; measure its mismatch against the mass, which cannot cancel.
    l_scale = max(abs(lf), abs(lg), l_form(f, omega + 1.0) - lf)
    if abs(lf - lg) > match_tol * l_scale:
        raise PreconditionError(f"L(f) = {lf:.12g} and L(g) = {lg:.12g} differ")
    if abs(af - ag) > match_tol * max(af, ag, EPS):
        raise PreconditionError(f"A(f^2) = {af:.12g} and A(g^2) = {ag:.12g} differ")
    plus, minus = f * mu + g * nu, f * mu - g * nu
    lhs_l = l_form(plus, omega) + l_form(minus, omega)
    p2, m2 = plus.square(), minus.square()
    lhs_a = a_form(p2, p2) + a_form(m2, m2)
    return (identity("clarkson_II_L", lhs_l, lf, tol, mu=mu, nu=nu),
            inequality("clarkson_II_A", lhs_a, af, slack, mu=mu, nu=nu))


@dataclass(frozen=True)
class QuarticScan:
    max_value: float
    argmax_mu_sq: float
    closed_form_error: float
    samples: int

    @property
    def holds(self) -> bool:
        return bool(self.max_value <= 1 + 1e-12 and abs(self.argmax_mu_sq - 0.25) <= 1e-12
                    and self.closed_form_error <= 1e-14)


def quartic_value(mu_sq):
    """``2 (mu^4 + nu^4 + 6 mu^2 nu^2)`` on ``mu^2 + nu^2 = 1/2``."""
    nu_sq = 0.5 - np.asarray(mu_sq, dtype=float)
    return 2.0 * (mu_sq**2 + nu_sq**2 + 6.0 * mu_sq * nu_sq)


def quartic_bound_scan(samples: int = 1001) -> QuarticScan:
    """Scan ``mu^2`` over ``[0, 1/2]`` (odd ``samples`` put ``1/4`` on the grid)."""
    if samples < 100:
        raise PreconditionError("quartic scan needs at least 100 samples")
    mu_sq = np.linspace(0.0, 0.5, samples)
    vals = quartic_value(mu_sq)
    closed = 1.0 - (1.0 - 4.0 * mu_sq) ** 2 / 2.0
    i = int(np.argmax(vals))
    return QuarticScan(float(vals[i]), float(mu_sq[i]),
                       float(np.max(np.abs(vals - closed))), samples)


# random and matched pairs -------------------------------------------------------------------------

def random_profile(rng, terms: int = 3):
    """Callable ``r -> sum a_k exp(-((r - c_k)/w_k)^2)`` with random signs, centres and widths."""
    amps = rng.normal(size=terms)
    centres = rng.uniform(0.0, 6.0, size=terms)
    widths = rng.uniform(0.8, 3.0, size=terms)

    def profile(r):
        r = np.asarray(r, dtype=float)[..., None]
        return np.sum(amps * np.exp(-((r - centres) / widths) ** 2), axis=-1)

    return profile


def random_radial_pair(grid, rng):
    f = RadialField.from_function(grid, random_profile(rng))
    g = RadialField.from_function(grid, random_profile(rng))
    return f, g


def matched_radial_pair(grid, rng, omega: float, lam_range=(0.4, 2.5), attempts: int = 50):
    """Pair ``(f, g)`` with ``g = s f(lam r)``, ``lam != 1``, equal ``L_omega`` and ``A``.

    ``s`` fixes ``A(g^2) = A(f^2)`` for each ``lam``; ``lam`` is the second
    root of ``L(g) - L(f)`` (the first is ``lam = 1``).  Profiles whose second
    root leaves ``lam_range`` are redrawn.
    """
    for _ in range(attempts):
        prof = random_profile(rng)
        f = RadialField.from_function(grid, prof)
        f2 = f.square()
        af = fn.a_form(f2, f2)
        lf = fn.l_omega(f, omega)

        def scaled(lam):
            gl = RadialField.from_function(grid, lambda r: prof(lam * r))
            g2 = gl.square()
            s = (af / fn.a_form(g2, g2)) ** 0.25
            return gl * s

        def mismatch(lam):
            return fn.l_omega(scaled(lam), omega) - lf

        lo, hi = lam_range
        eps = 1e-3
        for a, b in ((lo, 1.0 - eps), (1.0 + eps, hi)):
            ma, mb = mismatch(a), mismatch(b)
            if ma * mb < 0:
                lam = brentq(mismatch, a, b, xtol=1e-15, rtol=1e-15, maxiter=200)
                return f, scaled(lam), lam
    raise RuntimeError("could not construct a matched pair")


def random_mu(rng):
    mu = rng.uniform(0.0, np.sqrt(0.5))
    return mu, np.sqrt(0.5 - mu * mu)


# reflection chain on lattice fields -------------------------------------------------------------------

@dataclass(frozen=True)
class ChainReport:
    reports: list
    a_step_strict: bool
    symmetric: bool

    @property
    def holds(self) -> bool:
        return all(r.holds for r in self.reports)

    def to_dict(self) -> dict:
        return {"holds": self.holds, "a_step_strict": self.a_step_strict,
                "symmetric": self.symmetric, "reports": [r.to_dict() for r in self.reports]}


def reflection_chain_check(chi3d, omega: float, axis: int = 1) -> ChainReport:
    """Reflection argument on a lattice field.

    With ``chi_hat`` the reflection of ``chi`` and ``chi_pm = (chi +- chi_hat)/2``,
    checks ``S(chi_hat) = S(chi)``, the identity
    ``L(chi_+) + L(chi_-) = L(chi)``, the Coulomb step
    ``A(chi_+^2) + A(chi_-^2) <= (A(chi^2) + A(chi_hat^2))/8 + 3 sqrt(A(chi^2) A(chi_hat^2))/4``,
    the equality of that bound with ``A(chi^2)`` and the resulting
    ``S(chi_+) + S(chi_-) <= S(chi)``.  ``a_step_strict`` tells whether the
    Coulomb step is strict, as expected for non-symmetric fields.
    """
    from .cartesian import a_direct, lattice_l_omega, reflect

    if not omega > 0:
        raise PreconditionError(f"omega must be positive, got {omega}")
    hat = reflect(chi3d, axis)
    plus, minus = (chi3d + hat) * 0.5, (chi3d - hat) * 0.5

    def A(v):
        rho = v.square()
        return a_direct(rho, rho)

    def S(v, a_val=None):
        return 0.5 * lattice_l_omega(v, omega) + 0.25 * (A(v) if a_val is None else a_val)

    a_chi, a_hat, a_plus, a_minus = A(chi3d), A(hat), A(plus), A(minus)
    s_chi, s_hat = S(chi3d, a_chi), S(hat, a_hat)
    l_chi = lattice_l_omega(chi3d, omega)
    bound = (a_chi + a_hat) / 8 + 0.75 * np.sqrt(a_chi * a_hat)
    reports = [
        identity("reflection_action_invariance", s_hat, s_chi, 1e-10),
        identity("reflection_L_sum", lattice_l_omega(plus, omega) + lattice_l_omega(minus, omega),
                 l_chi, 1e-8),
        inequality("reflection_A_step", a_plus + a_minus, bound, 1e-9),
        identity("reflection_A_bound_equals_A", bound, a_chi, 1e-10),
        inequality("reflection_S_sum", S(plus, a_plus) + S(minus, a_minus), s_chi, 1e-9),
    ]
    symmetric = bool(np.sqrt(minus.l2_sq()) <= 1e-12 * max(np.sqrt(chi3d.l2_sq()), EPS))
    strict = bool(a_plus + a_minus < bound * (1 - 1e-12))
    return ChainReport(reports, strict, symmetric)


# lattice pairs ------------------------------------------------------------------------------------

def random_lattice_field(grid, rng, terms: int = 3):
    """Sum of ``terms`` anisotropic Gaussians with random signs, centres and widths."""
    from .cartesian import CartesianField

    x, y, z = grid.mesh
    vals = np.zeros(grid.shape)
    for _ in range(terms):
        c = rng.uniform(-3.0, 3.0, size=3)
        w = rng.uniform(1.0, 3.0, size=3)
        vals += rng.normal() * np.exp(-((x - c[0]) / w[0]) ** 2 - ((y - c[1]) / w[1]) ** 2
                                      - ((z - c[2]) / w[2]) ** 2)
    return CartesianField(grid, vals)


def random_lattice_pair(grid, rng):
    return random_lattice_field(grid, rng), random_lattice_field(grid, rng)


def lattice_symmetry(values, perm, flips):
    """Apply an axis permutation followed by reflections to a cube array."""
    out = np.transpose(values, perm)
    for axis, flip in enumerate(flips):
        if flip:
            out = np.flip(out, axis)
    return np.ascontiguousarray(out)


def matched_lattice_pair(grid, rng):
    """Pair ``(f, g)`` with ``g`` the image of ``f`` under a non-trivial cube symmetry.

    The lattice Laplacian, the cell-averaged attraction and the pair-sum
    Coulomb form all commute with the symmetries of the cube, so ``L`` and
    ``A`` agree up to rounding.
    """
    from .cartesian import CartesianField

    f = random_lattice_field(grid, rng)
    perm = rng.permutation(3)
    flips = rng.integers(0, 2, size=3)
    if np.array_equal(perm, [0, 1, 2]) and not flips.any():
        flips[rng.integers(3)] = 1
    return f, CartesianField(grid, lattice_symmetry(f.values, perm, flips))


# batches ------------------------------------------------------------------------------------------

def batch_summary(name: str, reports) -> dict:
    """Counts and worst cases of a list of reports sharing one check name."""
    ident = [r for r in reports if r.kind == "identity"]
    ineq = [r for r in reports if r.kind == "inequality"]
    out = {"name": name, "count": len(reports), "failures": sum(not r.holds for r in reports),
           "holds": all(r.holds for r in reports)}
    if ident:
        out["max_rel_residual"] = max(r.rel_residual for r in ident)
    if ineq:
        out["min_slack"] = min(r.slack for r in ineq)
    return out


def _forms(pipeline):
    if pipeline == "radial":
        from .radial import build_grid
        return build_grid(2048, 60.0), fn.a_form, fn.l_omega, random_radial_pair
    if pipeline == "lattice":
        from .cartesian import CartesianGrid, a_direct, lattice_l_omega
        return CartesianGrid(16, 10.0), a_direct, lattice_l_omega, random_lattice_pair
    raise PreconditionError(f"pipeline must be 'radial' or 'lattice', got {pipeline!r}")


def clarkson_batch(count: int, seed: int = 0, omega: float = 0.2, pipeline: str = "radial",
                   grid=None) -> dict:
    """Run the Clarkson identity and both inequalities on ``count`` pairs each.

    Returns ``{check name: [reports]}`` for ``clarkson_L``, ``clarkson_A``,
    ``clarkson_II_L`` and ``clarkson_II_A``.
    """
    default_grid, a_form, l_form, pair = _forms(pipeline)
    grid = grid or default_grid
    rng = np.random.default_rng(seed)
    out = {"clarkson_L": [], "clarkson_A": [], "clarkson_II_L": [], "clarkson_II_A": []}
    for _ in range(count):
        f, g = pair(grid, rng)
        out["clarkson_L"].append(clarkson_L(f, g, omega, l_form))
        out["clarkson_A"].append(clarkson_A(f, g, a_form))
        if pipeline == "radial":
            f, g, _ = matched_radial_pair(grid, rng, omega)
        else:
            f, g = matched_lattice_pair(grid, rng)
        mu, nu = random_mu(rng)
        rl, ra = clarkson_II(f, g, mu, nu, omega, l_form, a_form)
        out["clarkson_II_L"].append(rl)
        out["clarkson_II_A"].append(ra)
    return out


def form_batch(count: int, seed: int = 0, pipeline: str = "radial", grid=None) -> dict:
    """Parallelogram law and Cauchy inequalities on ``count`` random density pairs."""
    default_grid, a_form, _, pair = _forms(pipeline)
    grid = grid or default_grid
    rng = np.random.default_rng(seed)
    out = {"parallelogram": [], "cauchy_mixed": [], "cauchy_product": []}
    for _ in range(count):
        f, g = pair(grid, rng)
        # signed densities for the parallelogram law, products of fields for Cauchy
        out["parallelogram"].append(parallelogram_law(f, g, a_form))
        mixed, product = cauchy_inequalities(f, g, a_form)
        out["cauchy_mixed"].append(mixed)
        out["cauchy_product"].append(product)
    return out


def hminus1_probe(grid=None, tol: float = 1e-6) -> IdentityReport:
    """``A(e^{-r}) / (4 pi) = 5 pi``, the dual-norm value of an explicit density."""
    from .radial import build_grid
    grid = grid or build_grid(2048, 60.0)
    rho = RadialField.from_function(grid, lambda r: np.exp(-r))
    return identity("hminus1_exponential", fn.a_form(rho, rho) / (4 * np.pi), 5 * np.pi, tol)


def pohozaev_probe(omega: float = 0.2, grid=None, tol: float = 1e-6) -> IdentityReport:
    """Mass-identity residual of ``e^{-r/2}`` (not a solution) against its exact value.

    For ``chi = e^{-r/2}``: ``K = 2 pi``, ``M = 8 pi``, ``C = 4 pi`` and
    ``A(chi^2) = 20 pi^2``, so ``|K + omega M - C + A| = |2 pi + 8 pi omega - 4 pi + 20 pi^2|``.
    """
    from .radial import build_grid
    grid = grid or build_grid(2048, 60.0)
    chi = RadialField.from_function(grid, lambda r: np.exp(-0.5 * r))
    first, _ = pohozaev_residuals(chi, omega)
    exact = abs(2 * np.pi + 8 * np.pi * omega - 4 * np.pi + 20 * np.pi ** 2)
    return identity("pohozaev_probe_exponential", first.abs_residual, exact, tol, omega=omega)


def energy_action_connection(omega: float, config=None, tol: float = 1e-3) -> IdentityReport:
    """``S_min(omega) = I(N) + omega N / 2`` with ``N`` the mass of the action minimizer.

    ``I(N)`` comes from an independent run of the mass-constrained energy
    minimizer started from the seeded random field of ``config``.
    """
    from .errors import ConvergenceError
    from .solver import SolverConfig, minimize_action, minimize_energy_constrained

    config = (config or SolverConfig()).with_(omega=omega)
    free = minimize_action(config)
    if not free.converged or free.collapsed:
        raise ConvergenceError(f"action minimizer at omega={omega}: {free.message}", free)
    mass = free.report.l2_sq
    constrained = minimize_energy_constrained(mass, config)
    if not constrained.converged:
        raise ConvergenceError(f"constrained minimizer at N={mass:.6g}: {constrained.message}",
                               constrained)
    s_min = free.report.action
    return identity("energy_action_connection", s_min,
                    constrained.report.energy + 0.5 * omega * mass, tol,
                    omega=omega, mass=mass, omega_eff=constrained.omega,
                    rel_to_action=abs(s_min - constrained.report.energy - 0.5 * omega * mass)
                    / abs(s_min))
