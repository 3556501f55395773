"""Positive minimizers of the action and of the energy at fixed mass.

All iterations run on the second-order reduced model ``u = r chi`` of a
uniform grid (see ``_discrete``); converged profiles are then measured with
the higher-order quadrature of :mod:`hartreelab.functionals`, so the reported
functionals do not share the discretization error of the optimizer.

Three independent routes are provided:

* ``minimize_action``: preconditioned nonlinear conjugate gradients on
  ``S_omega`` with an exact quartic line search;
* ``scf_fixed_point``: self-consistent iteration that freezes the nonlocal
  coefficient, takes the ground state of the frozen linear operator and
  adjusts the mass until its eigenvalue equals ``-omega``;
* ``minimize_energy_constrained``: projected conjugate gradients for the
  energy on the sphere ``||chi||^2 = N``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from ._discrete import ReducedModel
from .errors import (ConfigurationError, ConvergenceError, PreconditionError,
                     RegimeBoundaryError, RegimeWarning, TruncationWarning)
from .functionals import FunctionalReport, report
from .radial import FOUR_PI, RadialField, build_grid

LOWER_THRESHOLD = 1.0 / 16.0
UPPER_THRESHOLD = 0.25
BOUNDARY_GAP = 1e-9
TAIL_FRACTION = 0.05
TAIL_RTOL = 1e-6
INIT_KINDS = ("gaussian-random", "scaled-e0", "custom")


@dataclass(frozen=True)
class SolverConfig:
    """Settings shared by all solvers.

    ``step_size`` scales the exact line-search step (1 takes the full
    minimizing step).  ``mixing`` is the density-mixing weight of the SCF
    iteration.  ``custom_init`` holds grid values of the initial profile when
    ``init_kind == "custom"``.
    """

    omega: float = 0.2
    n: int = 2048
    r_max: float = 60.0
    step_size: float = 1.0
    max_iters: int = 2000
    el_tol: float = 1e-8
    seed: int = 0
    init_kind: str = "gaussian-random"
    init_amplitude: float = 0.1
    mixing: float = 0.5
    custom_init: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.omega) and self.omega > 0):
            raise ConfigurationError(f"omega must be positive, got {self.omega}")
        if not self.el_tol >= 1e-12:
            raise ConfigurationError(f"el_tol must be at least 1e-12, got {self.el_tol}")
        if not 0 < self.step_size <= 1:
            raise ConfigurationError(f"step_size must lie in (0, 1], got {self.step_size}")
        if not 0 < self.mixing <= 1:
            raise ConfigurationError(f"mixing must lie in (0, 1], got {self.mixing}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigurationError(f"max_iters must be a positive integer, got {self.max_iters}")
        if self.init_kind not in INIT_KINDS:
            raise ConfigurationError(f"init_kind must be one of {INIT_KINDS}, got {self.init_kind!r}")
        if self.init_kind == "custom" and self.custom_init is None:
            raise ConfigurationError("init_kind 'custom' needs custom_init values")
        if self.init_amplitude < 0:
            raise ConfigurationError("init_amplitude must be non-negative")
        build_grid(self.n, self.r_max)  # validates n and r_max

    def grid(self):
        return build_grid(self.n, self.r_max)

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "custom_init"}
        if self.custom_init is not None:
            d["custom_init_sha1"] = hashlib.sha1(
                np.ascontiguousarray(self.custom_init, dtype=float).tobytes()).hexdigest()
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass(frozen=True)
class MinimizerResult:
    """Outcome of a solver run.

    Attributes
    ----------
    chi : RadialField
        Non-negative profile.
    omega : float
        Frequency; for the constrained solver this is the recovered
        Lagrange multiplier.
    report : FunctionalReport or None
        Functionals of ``chi`` at ``omega`` (None when ``omega <= 0``).
    el_residual : float
        ``||(-Delta - 1/r + omega + Phi) chi|| / ||chi||`` in the solver model.
    iterations : int
    converged : bool
    collapsed : bool
        The iterate reached (or started at) the zero field.
    method : str
    trace : tuple of float
        Discrete objective after every accepted step.
    message : str
    """

    chi: RadialField
    omega: float
    report: FunctionalReport | None
    el_residual: float
    iterations: int
    converged: bool
    collapsed: bool = False
    method: str = ""
    trace: tuple = ()
    message: str = ""
    config: SolverConfig | None = None

    @property
    def action(self) -> float:
        return self.report.action

    def summary(self) -> dict:
        out = {"method": self.method, "omega": self.omega, "converged": self.converged,
               "collapsed": self.collapsed, "el_residual": self.el_residual,
               "iterations": self.iterations, "message": self.message}
        if self.report is not None:
            out["report"] = self.report.to_dict()
        if self.config is not None:
            out["config"] = self.config.to_dict()
        return out

    def to_csv(self, path):
        return self.chi.to_csv(path)

    def manifest_json(self) -> str:
        return json.dumps(self.summary(), indent=2)


# initial data ---------------------------------------------------------------

def trial_field(grid, delta: float) -> RadialField:
    """``delta * exp(-r/2)``, the ground state of the linear problem scaled by ``delta``."""
    return RadialField.from_function(grid, lambda r: delta * np.exp(-0.5 * r))


def trial_action(delta: float, omega: float) -> float:
    """Closed-form action of ``chi = delta * exp(-r/2)``.

    ``L_omega(chi) = (omega - 1/4) ||chi||^2`` with ``||chi||^2 = 8 pi delta^2`` and
    ``A(chi^2) = 20 pi^2 delta^4``, so ``2 S = (omega - 1/4) 8 pi delta^2 + 10 pi^2 delta^4``.
    """
    return 0.5 * ((omega - 0.25) * 8.0 * np.pi * delta**2 + 10.0 * np.pi**2 * delta**4)


def random_bumps(grid, seed: int, amplitude: float = 0.1) -> RadialField:
    """Sum of one to three Gaussian bumps with seeded centres, widths and heights."""
    rng = np.random.default_rng(seed)
    r = grid.nodes
    values = np.zeros_like(r)
    for _ in range(rng.integers(1, 4)):
        height = amplitude * rng.uniform(0.2, 2.0)
        centre = rng.uniform(0.0, 10.0)
        width = rng.uniform(0.7, 3.0)
        values += height * np.exp(-((r - centre) / width) ** 2)
    return RadialField(grid, values)


def initial_field(config: SolverConfig, grid=None) -> RadialField:
    grid = grid or config.grid()
    if config.init_kind == "custom":
        return RadialField(grid, config.custom_init)
    if config.init_kind == "scaled-e0":
        return trial_field(grid, config.init_amplitude)
    return random_bumps(grid, config.seed, config.init_amplitude)


# helpers ----------------------------------------------------------------------

def _tail_check(chi: RadialField):
    v = np.abs(chi.values)
    peak = v.max()
    tail = v[chi.grid.nodes >= (1.0 - TAIL_FRACTION) * chi.grid.r_max].max()
    if peak > 0 and tail > TAIL_RTOL * peak:
        warnings.warn(f"profile has not decayed near r_max (tail/peak = {tail / peak:.1e}); "
                      "enlarge r_max", TruncationWarning, stacklevel=3)


def _smallest_positive_root(coeffs):
    """First positive critical point of the polynomial with ascending ``coeffs``."""
    roots = np.polynomial.polynomial.polyroots(np.polynomial.polynomial.polyder(coeffs))
    real = roots[np.abs(roots.imag) <= 1e-10 * np.maximum(1.0, np.abs(roots.real))].real
    positive = real[real > 0]
    return float(positive.min()) if positive.size else None


def _finish(model, u, omega, method, iterations, converged, trace, message, config,
            collapsed=False, el_residual=None):
    chi = model.to_field(np.abs(u))
    if el_residual is None:
        el_residual = model.el_residual(u, omega)
    rep = report(chi, omega) if omega > 0 else None
    if converged and not collapsed:
        _tail_check(chi)
    return MinimizerResult(chi=chi, omega=float(omega), report=rep,
                           el_residual=float(el_residual), iterations=iterations,
                           converged=converged, collapsed=collapsed, method=method,
                           trace=tuple(trace), message=message, config=config)


# gradient flow ------------------------------------------------------------------

def minimize_action(config: SolverConfig, initial: RadialField | None = None) -> MinimizerResult:
    """Minimize ``S_omega`` by preconditioned Polak-Ribiere conjugate gradients.

    The search direction is preconditioned with ``(-D2 + omega)^{-1}``; the
    step is the first minimizer of the exact quartic along the direction,
    scaled by ``config.step_size``.  After every step the iterate is replaced
    by its absolute value, which never increases the action.

    Returns an unconverged result (``converged=False``) when ``max_iters`` is
    exhausted, and flags ``collapsed`` when the iterate is the zero field.
    """
    omega = config.omega
    if omega >= UPPER_THRESHOLD:
        warnings.warn(f"omega={omega} >= 1/4: the minimizer is the zero field",
                      RegimeWarning, stacklevel=2)
    grid = config.grid()
    model = ReducedModel(grid)
    chi0 = initial if initial is not None else initial_field(config, grid)
    u = np.abs(model.to_u(chi0))
    scale0 = model.norm(u)
    trace = [model.action(u, omega)]
    if scale0 == 0.0:
        return _finish(model, u, omega, "gradient-flow", 0, False, trace,
                       "initial field is zero, which is a critical point", config,
                       collapsed=True, el_residual=0.0)

    g = model.gradient(u, omega)
    p = model.precondition(g, omega)
    d = -p
    res = model.norm(g) / scale0
    it = 0
    for it in range(1, config.max_iters + 1):
        c = model.quartic_coefficients(u, d, omega)
        alpha = _smallest_positive_root(c)
        if alpha is None:
            d = -p
            c = model.quartic_coefficients(u, d, omega)
            alpha = _smallest_positive_root(c)
            if alpha is None:
                break
        u = np.abs(u + config.step_size * alpha * d)
        trace.append(model.action(u, omega))
        nu = model.norm(u)
        if nu <= 1e-12 * scale0:
            return _finish(model, np.zeros_like(u), omega, "gradient-flow", it, False, trace,
                           "iterate collapsed to the zero field", config,
                           collapsed=True, el_residual=0.0)
        g_new = model.gradient(u, omega)
        res = model.norm(g_new) / nu
        if res <= config.el_tol:
            return _finish(model, u, omega, "gradient-flow", it, True, trace, "", config,
                           el_residual=res)
        p_new = model.precondition(g_new, omega)
        beta = max(0.0, float(np.dot(g_new, p_new - p)) / float(np.dot(g, p)))
        d = -p_new + beta * d
        if np.dot(d, g_new) >= 0:
            d = -p_new
        g, p = g_new, p_new
    return _finish(model, u, omega, "gradient-flow", it, False, trace,
                   f"no convergence in {config.max_iters} iterations (residual {res:.2e})",
                   config, el_residual=res)


# self-consistent field ------------------------------------------------------------

def w_coefficient(model: ReducedModel, u) -> np.ndarray:
    """``W(r) = 1/r - 4 pi int_0^inf chi^2 s ds`` on the interior nodes."""
    total = FOUR_PI * model.h * float(np.sum(u * u / model.r))
    return 1.0 / model.r - total


def inner_correction(model: ReducedModel, u) -> np.ndarray:
    """``4 pi int_0^r (1/r - 1/s) u(s)^2 ds`` (non-positive)."""
    q = u * u
    return FOUR_PI * model.h * (np.cumsum(q) / model.r - np.cumsum(q / model.r))


def scf_fixed_point(config: SolverConfig, initial: RadialField | None = None) -> MinimizerResult:
    """Solve ``u'' + W u - [4 pi int_0^r (1/r - 1/s) u^2] u = omega u`` self-consistently.

    Each sweep freezes ``W`` and the inner integral from the current iterate,
    takes the positive ground state ``v`` (unit mass) of the frozen operator
    ``-D2 - W + inner`` with eigenvalue ``lam``, updates the mass by a Newton
    step towards ``lam = -omega`` and mixes densities with weight
    ``config.mixing``.
    """
    omega = config.omega
    grid = config.grid()
    model = ReducedModel(grid)
    chi0 = initial if initial is not None else initial_field(config, grid)
    u = np.abs(model.to_u(chi0))
    mass = model.inner(u, u)
    if mass == 0.0:
        return _finish(model, u, omega, "scf", 0, False, [], "initial field is zero",
                       config, collapsed=True, el_residual=0.0)
    res = model.el_residual(u, omega)
    history = [res]
    trace = [model.action(u, omega)]
    it = 0
    for it in range(1, config.max_iters + 1):
        potential = -w_coefficient(model, u) + inner_correction(model, u)
        lam, vecs = model.lowest_eigenpairs(potential, 1)
        v = np.abs(vecs[0])
        stiffness = model.a_quad(v)
        mass = max(mass + (-omega - lam[0]) / stiffness, 0.0)
        rho = (1.0 - config.mixing) * u * u + config.mixing * mass * v * v
        u = np.sqrt(rho)
        mass = model.inner(u, u)
        trace.append(model.action(u, omega))
        if mass <= 1e-24:
            return _finish(model, np.zeros_like(u), omega, "scf", it, False, trace,
                           "mass update drove the iterate to zero; "
                           "retry with a smaller mixing parameter", config,
                           collapsed=True, el_residual=0.0)
        res = model.el_residual(u, omega)
        history.append(res)
        if res <= config.el_tol:
            return _finish(model, u, omega, "scf", it, True, trace, "", config, el_residual=res)
        if it >= 50 and res > 0.5 * min(history[-50:-25]):
            return _finish(model, u, omega, "scf", it, False, trace,
                           "self-consistent iteration stalls or oscillates; "
                           "retry with a smaller mixing parameter", config, el_residual=res)
    return _finish(model, u, omega, "scf", it, False, trace,
                   f"no convergence in {config.max_iters} iterations (residual {res:.2e}); "
                   "retry with a smaller mixing parameter", config, el_residual=res)


# energy at fixed mass ----------------------------------------------------------------

def minimize_energy_constrained(mass: float, config: SolverConfig,
                                initial: RadialField | None = None) -> MinimizerResult:
    """Minimize the energy on ``||chi||^2 = mass`` by projected conjugate gradients.

    The iterate is renormalized after every step.  The multiplier
    ``omega_eff = -<E'(chi), chi> / mass`` is returned as ``result.omega``
    and the residual is that of the equation at ``omega_eff``.
    ``config.omega`` only sets the preconditioner shift.
    """
    if not (np.isfinite(mass) and mass > 0):
        raise PreconditionError(f"mass must be positive, got {mass}")
    grid = config.grid()
    model = ReducedModel(grid)
    shift = config.omega
    chi0 = initial if initial is not None else initial_field(config, grid)
    u = np.abs(model.to_u(chi0))
    if model.norm(u) == 0.0:
        raise PreconditionError("constrained minimization needs a nonzero initial field")
    root = np.sqrt(mass)

    def retract(v):
        return root * v / model.norm(v)

    u = retract(u)
    trace = [model.energy(u)]
    d = p_old = r_old = None
    res, omega_eff, it = np.inf, shift, 0
    for it in range(1, config.max_iters + 1):
        g = model.gradient(u, 0.0)
        omega_eff = -model.inner(g, u) / mass
        resid = g + omega_eff * u
        res = model.norm(resid) / root
        if res <= config.el_tol:
            break
        p = model.precondition(resid, shift)
        p = p - model.inner(p, u) / mass * u
        if d is None:
            d = -p
        else:
            beta = max(0.0, model.inner(resid, p - p_old) / model.inner(r_old, p_old))
            d = -p + beta * (d - model.inner(d, u) / mass * u)
            if model.inner(d, resid) >= 0:
                d = -p
        span = model.norm(u) / model.norm(d)
        line = minimize_scalar(lambda a: model.energy(retract(u + a * d)),
                               bracket=(0.0, 0.1 * span), tol=1e-10)
        step = config.step_size * line.x
        u = np.abs(retract(u + step * d))
        trace.append(model.energy(u))
        p_old, r_old = p, resid
    converged = res <= config.el_tol
    message = "" if converged else f"no convergence in {config.max_iters} iterations (residual {res:.2e})"
    if converged and omega_eff <= 0:
        converged = False
        message = f"multiplier omega_eff={omega_eff:.3g} is not positive; no bound minimizer at this mass"
    return _finish(model, u, omega_eff, "energy-constrained", it, converged, trace, message,
                   config, el_residual=res)


# frequency map and uniqueness ------------------------------------------------------------

def _check_uniqueness_regime(omega: float):
    for edge in (LOWER_THRESHOLD, UPPER_THRESHOLD):
        if abs(omega - edge) <= BOUNDARY_GAP:
            raise RegimeBoundaryError(f"omega={omega} sits on the threshold {edge}")


def n_of_omega(omega: float, config: SolverConfig | None = None) -> float:
    """Mass ``||chi_omega||^2`` of the action minimizer.

    Warns with ``RegimeWarning`` outside ``(1/16, 1/4)``, where the map is
    not known to be single-valued.
    """
    config = (config or SolverConfig()).with_(omega=omega)
    if not LOWER_THRESHOLD < omega < UPPER_THRESHOLD:
        warnings.warn(f"omega={omega} lies outside (1/16, 1/4); uniqueness of the "
                      "minimizer is not established there", RegimeWarning, stacklevel=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        result = minimize_action(config)
    if not result.converged:
        raise ConvergenceError(result.message or "solver did not converge", result)
    return result.report.l2_sq


@dataclass(frozen=True)
class UniquenessReport:
    """Pairwise relative L^2 distances between converged multistart profiles."""

    omega: float
    max_distance: float
    distances: np.ndarray
    starts: list
    excluded: list
    tolerance: float

    @property
    def holds(self) -> bool:
        return bool(self.max_distance <= self.tolerance)

    def to_dict(self) -> dict:
        return {"omega": self.omega, "max_distance": self.max_distance,
                "tolerance": self.tolerance, "holds": self.holds,
                "starts": self.starts, "excluded": self.excluded}


def _run_start(args):
    config, initial = args
    return minimize_action(config, initial)


def relative_distance(a: RadialField, b: RadialField) -> float:
    """``||a - b|| / max(||a||, ||b||)`` after aligning the global sign."""
    from .radial import l2_inner
    if l2_inner(a, b) < 0:
        b = -b
    diff = a - b
    scale = max(np.sqrt(l2_inner(a, a)), np.sqrt(l2_inner(b, b)), 1e-300)
    return float(np.sqrt(max(l2_inner(diff, diff), 0.0)) / scale)


def start_seeds(seed: int, n_starts: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n_starts)]


def multistart_uniqueness(omega: float, n_starts: int = 10, seed: int = 0,
                          config: SolverConfig | None = None, starts=None,
                          tolerance: float = 1e-3, workers: int = 1) -> UniquenessReport:
    """Run the action minimizer from several starts and compare the limits.

    Parameters
    ----------
    omega : float
        Must lie in ``(1/16, 1/4)`` and not within ``1e-9`` of either end.
    n_starts : int
        Number of seeded random starts; ignored when ``starts`` is given.
    starts : sequence of RadialField, optional
        Explicit initial fields.
    workers : int
        Process count for running starts in parallel.
    """
    _check_uniqueness_regime(omega)
    if not LOWER_THRESHOLD < omega < UPPER_THRESHOLD:
        raise PreconditionError(f"omega={omega} lies outside (1/16, 1/4)")
    base = (config or SolverConfig()).with_(omega=omega, init_kind="gaussian-random")
    if starts is None:
        if int(n_starts) != n_starts or n_starts < 1:
            raise ConfigurationError(f"n_starts must be a positive integer, got {n_starts}")
        jobs = [(base.with_(seed=s), None) for s in start_seeds(seed, int(n_starts))]
    else:
        jobs = [(base, chi) for chi in starts]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_start, jobs))
    else:
        results = [_run_start(job) for job in jobs]

    kept, per_start, excluded = [], [], []
    for i, ((cfg, _), res) in enumerate(zip(jobs, results)):
        row = {"start": i, "seed": cfg.seed, "converged": res.converged,
               "collapsed": res.collapsed, "iterations": res.iterations,
               "el_residual": res.el_residual,
               "action": res.report.action if res.report else None}
        per_start.append(row)
        if res.converged and not res.collapsed:
            kept.append(res.chi)
        else:
            excluded.append(i)
    m = len(kept)
    dist = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            dist[i, j] = dist[j, i] = relative_distance(kept[i], kept[j])
    max_d = float(dist.max()) if m else float("nan")
    return UniquenessReport(omega=float(omega), max_distance=max_d, distances=dist,
                            starts=per_start, excluded=excluded, tolerance=tolerance)


def write_result(result: MinimizerResult, directory, stem: str = "profile") -> list[Path]:
    """Write ``<stem>.csv`` (r, value) and ``<stem>.json`` (run manifest)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = result.to_csv(directory / f"{stem}.csv")
    json_path = directory / f"{stem}.json"
    json_path.write_text(result.manifest_json(), encoding="utf-8")
    return [csv_path, json_path]


def functional_rows_csv(rows, path, header):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path
