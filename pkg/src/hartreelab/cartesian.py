"""Coarse three-dimensional lattice fields for non-radial probes.

The lattice is cell-centred on the cube ``[-L, L]^3`` with ``n`` cells per
axis, so no sample sits at the origin and every lattice operator commutes
with the coordinate reflections.  Fields vanish outside the cube.

Coulomb quantities:

* attraction ``int f^2 / |x|`` uses the exact average of ``1/|x|`` over each
  cell (closed-form box potential);
* ``a_direct`` is the explicit pair sum with kernel ``1/|x_i - x_j|`` and the
  exact cell self-average ``SELF_CELL / h`` on the diagonal;
* ``poisson_hartree`` solves the seven-point Poisson problem with Dirichlet
  ghost values from the monopole ``M / |x|``.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
from scipy.fft import dstn, idstn
from scipy.sparse.linalg import LinearOperator, cg

from .errors import (ConfigurationError, ConvergenceError, GridTooLargeError,
                     PreconditionError, RegimeWarning)

# Mean of 1/|x - y| over two independent uniform points of the unit cube.
SELF_CELL = (0.4 * (1.0 + np.sqrt(2.0) - 2.0 * np.sqrt(3.0)) - 2.0 * np.pi / 3.0
             + 2.0 * np.log(1.0 + np.sqrt(2.0))
             + 4.0 * np.log((1.0 + np.sqrt(3.0)) / np.sqrt(2.0)))
# Integral of max_k |Omega_k| over the unit sphere; sets the field energy outside a cube.
CUBE_SPHERE_MAX = 12.0 * np.sqrt(2.0) * np.arctan(1.0 / np.sqrt(2.0))
MAX_CELLS = 48
MIN_CELLS = 16
MIN_HALF_WIDTH = 10.0


@dataclass(frozen=True)
class CartesianGrid:
    """``n`` cells per axis on ``[-half_width, half_width]^3``."""

    n: int = 32
    half_width: float = 12.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n % 2:
            raise ConfigurationError(f"lattice size must be an even integer, got {self.n}")
        if self.n > MAX_CELLS:
            raise GridTooLargeError(
                f"n={self.n} exceeds {MAX_CELLS} cells per axis (pair sum cost guard)")
        if self.n < MIN_CELLS:
            raise ConfigurationError(f"lattice needs at least {MIN_CELLS} cells per axis")
        if not self.half_width >= MIN_HALF_WIDTH:
            raise ConfigurationError(f"half_width must be at least {MIN_HALF_WIDTH}")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def vol(self) -> float:
        return self.h**3

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @cached_property
    def centres(self) -> np.ndarray:
        return -self.half_width + (np.arange(self.n) + 0.5) * self.h

    @cached_property
    def mesh(self):
        return np.meshgrid(self.centres, self.centres, self.centres, indexing="ij")

    @cached_property
    def radius(self) -> np.ndarray:
        x, y, z = self.mesh
        return np.sqrt(x * x + y * y + z * z)

    def to_dict(self) -> dict:
        return {"n": self.n, "half_width": self.half_width, "spacing": self.h}


@dataclass(frozen=True, eq=False)
class CartesianField:
    """Cell values on a :class:`CartesianGrid`, indexed ``[ix, iy, iz]``."""

    grid: CartesianGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ConfigurationError(f"field shape {values.shape} != lattice {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid, func):
        x, y, z = grid.mesh
        return cls(grid, func(x, y, z))

    @classmethod
    def from_radial(cls, grid, profile):
        """Sample ``profile(|x|)`` at the cell centres."""
        return cls(grid, profile(grid.radius))

    def _other(self, other):
        if isinstance(other, CartesianField):
            if other.grid != self.grid:
                raise ConfigurationError("fields live on different lattices")
            return other.values
        if np.isscalar(other):
            return float(other)
        return NotImplemented

    def __add__(self, other):
        v = self._other(other)
        return NotImplemented if v is NotImplemented else CartesianField(self.grid, self.values + v)

    def __sub__(self, other):
        v = self._other(other)
        return NotImplemented if v is NotImplemented else CartesianField(self.grid, self.values - v)

    def __mul__(self, other):
        v = self._other(other)
        return NotImplemented if v is NotImplemented else CartesianField(self.grid, self.values * v)

    __rmul__ = __mul__
    __radd__ = __add__

    def __neg__(self):
        return CartesianField(self.grid, -self.values)

    def __truediv__(self, scalar):
        return CartesianField(self.grid, self.values / float(scalar))

    def square(self):
        return CartesianField(self.grid, self.values**2)

    def abs(self):
        return CartesianField(self.grid, np.abs(self.values))

    def l2_sq(self) -> float:
        return self.grid.vol * float(np.sum(self.values**2))

    def boundary_shell_ratio(self) -> float:
        """Largest magnitude on the outermost cell layer relative to the field maximum."""
        v = np.abs(self.values)
        peak = v.max()
        if peak == 0:
            return 0.0
        shell = max(v[[0, -1]].max(), v[:, [0, -1]].max(), v[:, :, [0, -1]].max())
        return float(shell / peak)

    # export -----------------------------------------------------------------

    def to_csv(self, path):
        """Flat ``x, y, z, value`` table with x varying fastest."""
        path = Path(path)
        c = self.grid.centres
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "z", "value"])
            for iz in range(self.grid.n):
                for iy in range(self.grid.n):
                    for ix in range(self.grid.n):
                        writer.writerow([repr(float(c[ix])), repr(float(c[iy])),
                                         repr(float(c[iz])), repr(float(self.values[ix, iy, iz]))])
        return path

    def to_binary(self, path):
        """Little-endian float64 dump, x fastest, plus ``<path>.json`` header."""
        path = Path(path)
        path.write_bytes(np.asarray(self.values, dtype="<f8").tobytes(order="F"))
        header = {"dimensions": [self.grid.n] * 3, "spacing": self.grid.h,
                  "half_width": self.grid.half_width, "origin": float(self.grid.centres[0]),
                  "ordering": "x fastest", "dtype": "<f8"}
        header_path = path.with_name(path.name + ".json")
        header_path.write_text(json.dumps(header, indent=2), encoding="utf-8")
        return [path, header_path]

    @classmethod
    def from_binary(cls, path) -> "CartesianField":
        path = Path(path)
        header = json.loads(path.with_name(path.name + ".json").read_text(encoding="utf-8"))
        n = header["dimensions"][0]
        grid = CartesianGrid(n, header["half_width"])
        data = np.frombuffer(path.read_bytes(), dtype=header["dtype"]).reshape((n, n, n), order="F")
        return cls(grid, data)


def reflect(f: CartesianField, axis: int = 1) -> CartesianField:
    """``f(x) -> f(x')`` with the sign of coordinate ``axis`` (1, 2 or 3) flipped."""
    if axis not in (1, 2, 3):
        raise ConfigurationError(f"axis must be 1, 2 or 3, got {axis}")
    return CartesianField(f.grid, np.flip(f.values, axis=axis - 1))


def symmetry_deficit(f: CartesianField) -> float:
    """``max_axis ||f - reflect(f)|| / ||f||``; 0 for reflection-symmetric fields, 2 for odd ones."""
    norm = np.sqrt(f.l2_sq())
    if norm == 0:
        raise PreconditionError("symmetry deficit of the zero field is undefined")
    return max(np.sqrt((f - reflect(f, ax)).l2_sq()) / norm for ax in (1, 2, 3))


# Coulomb pieces ------------------------------------------------------------------

def _box_antiderivative(x, y, z):
    """Triple antiderivative of ``1/|x|``; terms with a vanishing prefactor are dropped."""
    r = np.sqrt(x * x + y * y + z * z)

    def log_term(a, b, c):
        with np.errstate(divide="ignore", invalid="ignore"):
            v = a * b * np.log(c + r)
        return np.where(a * b == 0, 0.0, v)

    def atan_term(a, b, c):
        with np.errstate(divide="ignore", invalid="ignore"):
            v = 0.5 * a * a * np.arctan(b * c / (a * r))
        return np.where(a == 0, 0.0, v)

    return (log_term(x, y, z) + log_term(y, z, x) + log_term(z, x, y)
            - atan_term(x, y, z) - atan_term(y, z, x) - atan_term(z, x, y))


def box_potential(lo, hi):
    """``int_box dx / |x|`` for boxes ``[lo, hi]`` (arrays of shape (..., 3))."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    total = 0.0
    for i in (0, 1):
        for j in (0, 1):
            for k in (0, 1):
                sign = (-1) ** (3 - i - j - k)
                cx = hi[..., 0] if i else lo[..., 0]
                cy = hi[..., 1] if j else lo[..., 1]
                cz = hi[..., 2] if k else lo[..., 2]
                total = total + sign * _box_antiderivative(cx, cy, cz)
    return total


@lru_cache(maxsize=8)
def _cell_coulomb(grid: CartesianGrid) -> np.ndarray:
    x, y, z = grid.mesh
    centre = np.stack([x, y, z], axis=-1)
    half = 0.5 * grid.h
    return box_potential(centre - half, centre + half) / grid.vol


def coulomb_kernel(grid: CartesianGrid) -> np.ndarray:
    """Cell averages of ``1/|x|``."""
    return _cell_coulomb(grid)


@lru_cache(maxsize=8)
def _yz_distance_sq(grid: CartesianGrid) -> np.ndarray:
    c = grid.centres
    y, z = np.meshgrid(c, c, indexing="ij")
    y, z = y.ravel(), z.ravel()
    return (y[:, None] - y[None, :]) ** 2 + (z[:, None] - z[None, :]) ** 2


def _kernel_block(grid: CartesianGrid, a: int, d2) -> np.ndarray:
    with np.errstate(divide="ignore"):
        kern = 1.0 / np.sqrt(d2 + (a * grid.h) ** 2)
    if a == 0:
        np.fill_diagonal(kern, SELF_CELL / grid.h)
    return kern


CACHED_BLOCK_CELLS = 24


@lru_cache(maxsize=4)
def _kernel_blocks(grid: CartesianGrid) -> tuple:
    # n^5 doubles: 8 MB at n = 16, too much to keep beyond CACHED_BLOCK_CELLS
    d2 = _yz_distance_sq(grid)
    return tuple(_kernel_block(grid, a, d2) for a in range(grid.n))


def coulomb_apply(densities, grid: CartesianGrid) -> np.ndarray:
    """Pair-sum potentials ``sum_j K_ij rho_j vol`` for a stack of densities.

    ``densities`` has shape ``(k, n, n, n)`` (or ``(n, n, n)``).  The sum runs
    slab by slab: for every x-offset ``a`` the y-z block of the kernel is the
    same matrix, so each offset costs one matrix product.
    """
    if grid.n > MAX_CELLS:
        raise GridTooLargeError(f"pair sum limited to n <= {MAX_CELLS}")
    rho = np.asarray(densities, dtype=float)
    single = rho.ndim == 3
    if single:
        rho = rho[None]
    k, n = rho.shape[0], grid.n
    slabs = rho.transpose(1, 0, 2, 3).reshape(n, k, n * n)
    d2 = _yz_distance_sq(grid)
    blocks = _kernel_blocks(grid) if n <= CACHED_BLOCK_CELLS else None
    out = np.zeros_like(slabs)
    for a in range(n):
        kern = blocks[a] if blocks is not None else _kernel_block(grid, a, d2)
        prod = slabs @ kern
        if a == 0:
            out += prod
        else:
            out[a:] += prod[:-a]
            out[:-a] += prod[a:]
    out = out.reshape(n, k, n, n).transpose(1, 0, 2, 3) * grid.vol
    return out[0] if single else out


def a_direct(f: CartesianField, g: CartesianField) -> float:
    """Coulomb form ``sum_ij f_i g_j K_ij vol^2`` of two lattice densities."""
    if f.grid != g.grid:
        raise ConfigurationError("fields live on different lattices")
    pot = coulomb_apply(g.values, f.grid)
    return f.grid.vol * float(np.sum(f.values * pot))


def a_direct_many(pairs) -> np.ndarray:
    """``a_direct`` for a list of ``(f, g)`` pairs on one lattice, sharing kernel work."""
    grid = pairs[0][0].grid
    pots = coulomb_apply(np.stack([g.values for _, g in pairs]), grid)
    return np.array([grid.vol * float(np.sum(f.values * p)) for (f, _), p in zip(pairs, pots)])


# lattice Laplacian and Poisson problem -------------------------------------------------

def laplacian(values, h: float) -> np.ndarray:
    """Seven-point Laplacian with zero values outside the cube."""
    p = np.pad(values, 1)
    return (p[2:, 1:-1, 1:-1] + p[:-2, 1:-1, 1:-1] + p[1:-1, 2:, 1:-1]
            + p[1:-1, :-2, 1:-1] + p[1:-1, 1:-1, 2:] + p[1:-1, 1:-1, :-2]
            - 6.0 * values) / h**2


def _ghost_source(grid: CartesianGrid, ghost_func) -> np.ndarray:
    """Right-hand side contribution ``sum ghost / h^2`` of Dirichlet ghost values."""
    n, h = grid.n, grid.h
    c = grid.centres
    edge = grid.half_width + 0.5 * h
    src = np.zeros(grid.shape)
    a, b = np.meshgrid(c, c, indexing="ij")
    for axis in range(3):
        for side, coord in ((0, -edge), (n - 1, edge)):
            pts = [a, b]
            pts.insert(axis, np.full_like(a, coord))
            val = ghost_func(*pts)
            index = [slice(None), slice(None)]
            index.insert(axis, side)
            src[tuple(index)] += val / h**2
    return src


@dataclass(frozen=True)
class PoissonInfo:
    residual: float
    iterations: int
    monopole: float


def _neg_laplacian_operator(grid):
    n3 = grid.n**3
    h = grid.h
    return LinearOperator((n3, n3), matvec=lambda v: -laplacian(v.reshape(grid.shape), h).ravel(),
                          dtype=float)


def _solve_neg_laplacian(grid, rhs, rtol):
    counter = {"it": 0}

    def callback(_):
        counter["it"] += 1

    sol, status = cg(_neg_laplacian_operator(grid), rhs.ravel(), rtol=rtol, atol=0.0,
                     maxiter=20 * grid.n, callback=callback)
    sol = sol.reshape(grid.shape)
    res = -laplacian(sol, grid.h) - rhs
    rel = float(np.linalg.norm(res) / max(np.linalg.norm(rhs), 1e-300))
    if status != 0:
        raise ConvergenceError(f"Poisson CG stopped after {counter['it']} iterations "
                               f"(relative residual {rel:.2e})")
    return sol, rel, counter["it"]


@lru_cache(maxsize=8)
def _monopole_lift(grid: CartesianGrid, rtol: float) -> np.ndarray:
    """Harmonic lattice field with ghost values ``1/|x|`` (unit monopole)."""
    src = _ghost_source(grid, lambda x, y, z: 1.0 / np.sqrt(x * x + y * y + z * z))
    sol, _, _ = _solve_neg_laplacian(grid, src, rtol)
    sol.setflags(write=False)
    return sol


def poisson_hartree(f: CartesianField, rtol: float = 1e-10, return_info: bool = False):
    """Potential ``phi`` with ``-Delta_h phi = 4 pi f`` and ghost values ``M / |x|``.

    ``M = vol * sum(f)``.  Solved by conjugate gradients; the relative residual
    of the discrete equation is returned in ``PoissonInfo`` when asked.
    """
    grid = f.grid
    mass = grid.vol * float(np.sum(f.values))
    if not np.any(f.values):
        phi = CartesianField(grid, np.zeros(grid.shape))
        return (phi, PoissonInfo(0.0, 0, 0.0)) if return_info else phi
    interior, rel, its = _solve_neg_laplacian(grid, 4.0 * np.pi * f.values, rtol)
    phi = CartesianField(grid, interior + mass * _monopole_lift(grid, rtol))
    if return_info:
        return phi, PoissonInfo(rel, its, mass)
    return phi


def field_energy(phi: CartesianField, monopole: float) -> float:
    """``(1/4 pi) int |grad phi|^2`` over all space.

    Inside the cube (and up to the ghost layer) the gradient is taken by
    lattice differences; outside the ghost layer the field is the monopole,
    whose energy outside a cube of half-width ``a`` is
    ``M^2 CUBE_SPHERE_MAX / (4 pi a)``.
    """
    grid = phi.grid
    h = grid.h
    edge = grid.half_width + 0.5 * h
    v = phi.values
    total = 0.0
    ghost = lambda x, y, z: monopole / np.sqrt(x * x + y * y + z * z)  # noqa: E731
    c = grid.centres
    a, b = np.meshgrid(c, c, indexing="ij")
    for axis in range(3):
        total += np.sum(np.diff(v, axis=axis) ** 2)
        for side, coord in ((0, -edge), (-1, edge)):
            pts = [a, b]
            pts.insert(axis, np.full_like(a, coord))
            face = np.take(v, side, axis=axis)
            total += np.sum((face - ghost(*pts)) ** 2)
    inside = h * total
    outside = monopole**2 * CUBE_SPHERE_MAX / edge
    return (inside + outside) / (4.0 * np.pi)


def poisson_energy_identity(f: CartesianField, rtol: float = 1e-10) -> dict:
    """Compare ``int phi f``, the field energy of ``phi`` and the pair sum ``a_direct(f, f)``."""
    phi, info = poisson_hartree(f, rtol, return_info=True)
    potential_energy = f.grid.vol * float(np.sum(phi.values * f.values))
    return {"potential_energy": potential_energy,
            "field_energy": field_energy(phi, info.monopole),
            "pair_sum": a_direct(f, f),
            "poisson_residual": info.residual}


# lattice functionals ---------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeReport:
    omega: float
    l2_sq: float
    h1dot_sq: float
    coulomb_attraction: float
    a_quad: float
    l_omega: float
    action: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def lattice_l_omega(f: CartesianField, omega: float, g: CartesianField | None = None) -> float:
    """Lattice form of ``-Delta - 1/|x| + omega``; bilinear when ``g`` is given."""
    grid = f.grid
    g = f if g is None else g
    op = -laplacian(g.values, grid.h) + (omega - coulomb_kernel(grid)) * g.values
    return grid.vol * float(np.sum(f.values * op))


def lattice_report(f: CartesianField, omega: float, hartree: str = "direct") -> LatticeReport:
    """Lattice functionals; ``hartree`` selects the pair sum or the Poisson potential."""
    grid = f.grid
    vol = grid.vol
    l2 = f.l2_sq()
    kin = vol * float(np.sum(-laplacian(f.values, grid.h) * f.values))
    coul = vol * float(np.sum(coulomb_kernel(grid) * f.values**2))
    rho = f.square()
    if hartree == "direct":
        a = a_direct(rho, rho)
    elif hartree == "poisson":
        a = vol * float(np.sum(poisson_hartree(rho).values * rho.values))
    else:
        raise ConfigurationError(f"unknown hartree evaluation {hartree!r}")
    lw = kin - coul + omega * l2
    return LatticeReport(omega, l2, kin, coul, a, lw, 0.5 * lw + 0.25 * a)


def lattice_action(f: CartesianField, omega: float, hartree: str = "direct") -> float:
    return lattice_report(f, omega, hartree).action


# descent ----------------------------------------------------------------------------------

@dataclass(frozen=True)
class Config3D:
    """Settings of the lattice action minimizer."""

    omega: float = 0.2
    n: int = 32
    half_width: float = 12.0
    max_iters: int = 300
    el_tol: float = 1e-6
    seed: int = 0
    init_kind: str = "random"
    poisson_rtol: float = 1e-11

    def __post_init__(self):
        if not self.omega > 0:
            raise ConfigurationError(f"omega must be positive, got {self.omega}")
        if self.init_kind not in ("random", "radial"):
            raise ConfigurationError(f"init_kind must be 'random' or 'radial', got {self.init_kind!r}")
        if not self.el_tol > 0:
            raise ConfigurationError("el_tol must be positive")

    def grid(self) -> CartesianGrid:
        return CartesianGrid(self.n, self.half_width)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Result3D:
    field: CartesianField
    symmetry_deficit: float
    converged: bool
    iterations: int
    el_residual: float
    action: float
    boundary_shell: float
    deficit_trace: tuple = ()
    trace: tuple = ()
    message: str = ""

    def summary(self) -> dict:
        return {"symmetry_deficit": self.symmetry_deficit, "converged": self.converged,
                "iterations": self.iterations, "el_residual": self.el_residual,
                "action": self.action, "boundary_shell": self.boundary_shell,
                "message": self.message}


def initial_field_3d(config: Config3D, grid: CartesianGrid) -> CartesianField:
    x, y, z = grid.mesh
    if config.init_kind == "radial":
        return CartesianField(grid, 0.1 * np.exp(-(x * x + y * y + z * z) / 4.0))
    rng = np.random.default_rng(config.seed)
    shift = rng.uniform(-1.5, 1.5, size=3)
    bump = np.exp(-((x - shift[0]) ** 2 + (y - shift[1]) ** 2 + (z - shift[2]) ** 2) / 4.0)
    return CartesianField(grid, 0.1 * bump * (1.0 + 0.3 * rng.random(grid.shape)))


class _LatticeAction:
    """Action with the Poisson Hartree term and its exact gradient.

    The Poisson potential is ``phi[rho] = P rho + M(rho) b`` with ``b`` the
    unit-monopole lift, so ``A(rho) = vol <rho, phi[rho]>`` is not symmetric
    in its two slots; the gradient carries the correction
    ``-M b / 2 + vol <b, rho> / 2``.
    """

    def __init__(self, grid, omega, rtol):
        self.grid, self.omega, self.rtol = grid, omega, rtol
        self.vol = grid.vol
        self.v_coul = coulomb_kernel(grid)
        self.lift = _monopole_lift(grid, rtol)
        k = np.arange(1, grid.n + 1)
        lam = (2.0 - 2.0 * np.cos(np.pi * k / (grid.n + 1))) / grid.h**2
        self.eig = lam[:, None, None] + lam[None, :, None] + lam[None, None, :]

    def phi(self, rho):
        return poisson_hartree(CartesianField(self.grid, rho), self.rtol).values

    def a_form(self, rho, sigma, phi_sigma=None):
        """Symmetrized ``vol <rho, phi[sigma]>``."""
        phi_s = self.phi(sigma) if phi_sigma is None else phi_sigma
        return self.vol * float(np.sum(rho * phi_s))

    def quad(self, f, g):
        op = -laplacian(g, self.grid.h) + (self.omega - self.v_coul) * g
        return self.vol * float(np.sum(f * op))

    def gradient(self, f, phi_ff):
        rho = f * f
        mass = self.vol * float(np.sum(rho))
        corr = -0.5 * mass * self.lift + 0.5 * self.vol * float(np.sum(self.lift * rho))
        return -laplacian(f, self.grid.h) + (self.omega - self.v_coul) * f + (phi_ff + corr) * f

    def action(self, f, phi_ff):
        return 0.5 * self.quad(f, f) + 0.25 * self.vol * float(np.sum(f * f * phi_ff))

    def quartic(self, f, d, grad, phi_ff):
        """Coefficients of ``alpha -> action(f + alpha d)``."""
        phi_fd = self.phi(f * d)
        phi_dd = self.phi(d * d)
        vol = self.vol
        ff, fd, dd = f * f, f * d, d * d

        def a(p, q_phi):
            return vol * float(np.sum(p * q_phi))
        # A(rho(alpha)) with rho = ff + 2 alpha fd + alpha^2 dd, phi linear in rho.
        c2 = 0.25 * (4 * a(fd, phi_fd) + a(ff, phi_dd) + a(dd, phi_ff))
        c3 = 0.25 * 2 * (a(fd, phi_dd) + a(dd, phi_fd))
        c4 = 0.25 * a(dd, phi_dd)
        return np.array([self.action(f, phi_ff), vol * float(np.sum(grad * d)),
                         0.5 * self.quad(d, d) + c2, c3, c4])

    def precondition(self, g):
        return idstn(dstn(g, type=1) / (self.eig + self.omega), type=1)

    def norm(self, f):
        return np.sqrt(self.vol * float(np.sum(f * f)))


def minimize_action_3d(config: Config3D | None = None, initial: CartesianField | None = None):
    """Preconditioned conjugate-gradient descent of the lattice action.

    Returns a :class:`Result3D` holding the profile and its symmetry deficit.
    """
    config = config or Config3D()
    omega = config.omega
    if not 1.0 / 16.0 < omega < 0.25:
        warnings.warn(f"omega={omega} lies outside (1/16, 1/4)", RegimeWarning, stacklevel=2)
    grid = config.grid()
    model = _LatticeAction(grid, omega, config.poisson_rtol)
    f = np.abs((initial if initial is not None else initial_field_3d(config, grid)).values)
    if not np.any(f):
        raise PreconditionError("3D descent needs a nonzero initial field")

    def deficit(v):
        return symmetry_deficit(CartesianField(grid, v))

    phi_ff = model.phi(f * f)
    g = model.gradient(f, phi_ff)
    p = model.precondition(g)
    d = -p
    res = model.norm(g) / model.norm(f)
    trace = [model.action(f, phi_ff)]
    deficits = [deficit(f)]
    it = 0
    converged = res <= config.el_tol
    while not converged and it < config.max_iters:
        it += 1
        c = model.quartic(f, d, g, phi_ff)
        roots = np.polynomial.polynomial.polyroots(np.polynomial.polynomial.polyder(c))
        real = roots[np.abs(roots.imag) <= 1e-10 * np.maximum(1.0, np.abs(roots.real))].real
        real = real[real > 0]
        if real.size == 0:
            if np.array_equal(d, -p):
                break
            d = -p
            continue
        f = np.abs(f + real.min() * d)
        phi_ff = model.phi(f * f)
        g_new = model.gradient(f, phi_ff)
        res = model.norm(g_new) / model.norm(f)
        trace.append(model.action(f, phi_ff))
        deficits.append(deficit(f))
        if res <= config.el_tol:
            converged = True
            break
        p_new = model.precondition(g_new)
        beta = max(0.0, float(np.sum(g_new * (p_new - p))) / float(np.sum(g * p)))
        d = -p_new + beta * d
        if np.sum(d * g_new) >= 0:
            d = -p_new
        g, p = g_new, p_new
    chi = CartesianField(grid, f)
    message = "" if converged else f"no convergence in {it} iterations (residual {res:.2e})"
    return Result3D(field=chi, symmetry_deficit=deficit(f), converged=converged, iterations=it,
                    el_residual=float(res), action=trace[-1], boundary_shell=chi.boundary_shell_ratio(),
                    deficit_trace=tuple(deficits), trace=tuple(trace), message=message)


# radial comparison ---------------------------------------------------------------------------

def spherical_average(f: CartesianField, bin_width: float | None = None):
    """Shell averages of ``f``.

    Returns ``(r_mean, f_mean, counts)`` over shells of width ``h/2`` (default).
    """
    grid = f.grid
    width = 0.5 * grid.h if bin_width is None else bin_width
    rr = grid.radius.ravel()
    idx = np.floor(rr / width).astype(int)
    counts = np.bincount(idx)
    sums = np.bincount(idx, f.values.ravel())
    rsum = np.bincount(idx, rr)
    keep = counts > 0
    return rsum[keep] / counts[keep], sums[keep] / counts[keep], counts[keep]


def radial_distance(f: CartesianField, profile) -> float:
    """Relative L^2 distance between the shell averages of ``f`` and ``profile(r)``.

    ``profile`` is a callable or a :class:`~hartreelab.radial.RadialField`.
    """
    r_mean, f_mean, counts = spherical_average(f)
    if hasattr(profile, "grid"):
        ref = np.interp(r_mean, profile.grid.nodes, profile.values,
                        left=profile.origin_value(), right=0.0)
    else:
        ref = profile(r_mean)
    return float(np.sqrt(np.sum(counts * (f_mean - ref) ** 2) / np.sum(counts * ref**2)))
