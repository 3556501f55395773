"""Bound states of Delta + 1/|x| (the radial hydrogen problem) and projections onto them.

Eigenpairs come from the symmetric tridiagonal discretization of
``-u'' - u/r = -omega u`` with ``u = r e`` and Dirichlet ends.  Reported
eigenvalues are Richardson-extrapolated from the grid and its half-resolution
copy; eigenvectors and the inner product used for projections belong to the
discrete operator itself, so discrete orthogonality is exact.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._discrete import ReducedModel
from .errors import ConfigurationError, GridTooSmallError, PreconditionError
from .radial import RadialField, RadialGrid, build_grid

MAX_LEVEL = 5
EIGENVALUE_RTOL = 1e-5


def exact_omega(k: int) -> float:
    """``1 / (4 (k + 1)^2)``."""
    return 1.0 / (4.0 * (k + 1) ** 2)


def default_spectral_grid() -> RadialGrid:
    """Grid large enough to resolve every level up to ``MAX_LEVEL``."""
    return build_grid(16384, 300.0)


@dataclass(frozen=True)
class EigenPair:
    """One bound state.

    Attributes
    ----------
    k : int
        Level index, 0 for the ground state.
    omega_k : float
        Extrapolated eigenvalue.
    e_k : RadialField
        Normalized eigenfunction, positive at its first antinode.
    omega_discrete : float
        Eigenvalue of the discrete operator on ``e_k.grid``.
    """

    k: int
    omega_k: float
    e_k: RadialField
    omega_discrete: float

    def to_dict(self) -> dict:
        return {"k": self.k, "omega_k": self.omega_k, "omega_discrete": self.omega_discrete,
                "omega_exact": exact_omega(self.k)}


def _orient(u):
    first = np.flatnonzero(np.abs(u) > 1e-8 * np.max(np.abs(u)))[0]
    return u if u[first] > 0 else -u


def hydrogen_eigenpairs(grid: RadialGrid, k_max: int, rtol: float = EIGENVALUE_RTOL):
    """Return the levels ``k = 0..k_max`` sorted by decreasing ``omega_k``.

    Raises
    ------
    GridTooSmallError
        If ``k_max > MAX_LEVEL``, the grid holds fewer bound states, or an
        extrapolated eigenvalue misses ``1/(4(k+1)^2)`` by more than ``rtol``.
    """
    if int(k_max) != k_max or k_max < 0:
        raise ConfigurationError(f"k_max must be a non-negative integer, got {k_max}")
    k_max = int(k_max)
    if k_max > MAX_LEVEL:
        raise GridTooSmallError(f"levels beyond k={MAX_LEVEL} are not resolved (asked {k_max})")
    count = k_max + 1
    fine = ReducedModel(grid)
    lam, vecs = fine.lowest_eigenpairs(-1.0 / fine.r, count)
    coarse = ReducedModel(build_grid(grid.n // 2, grid.r_max))
    lam_c, _ = coarse.lowest_eigenpairs(-1.0 / coarse.r, count)
    ratio = (coarse.h / fine.h) ** 2
    omega_d = -lam
    omega = (ratio * omega_d + lam_c) / (ratio - 1.0)

    pairs = []
    for k in range(count):
        if not omega_d[k] > 0:
            raise GridTooSmallError(f"grid holds no bound state for level k={k}")
        err = abs(omega[k] / exact_omega(k) - 1.0)
        if err > rtol:
            raise GridTooSmallError(
                f"level k={k}: omega={omega[k]:.10g} misses {exact_omega(k):.10g} "
                f"by {err:.2e} relative (tolerance {rtol:.0e}); enlarge n or r_max")
        u = _orient(vecs[k])
        if k == 0:
            # The ground state has no nodes; sign flips deep in the tail are rounding noise.
            u = np.abs(u)
        pairs.append(EigenPair(k, float(omega[k]), fine.to_field(u), float(omega_d[k])))
    return pairs


def discrete_inner(f: RadialField, g: RadialField) -> float:
    """Inner product of the discrete operator: ``4 pi h sum (r f)(r g)`` over interior nodes."""
    model = ReducedModel(f.grid)
    return model.inner(model.to_u(f), model.to_u(g))


def rayleigh_quotient(e: RadialField) -> float:
    """``<(Delta + 1/r) e, e> / ||e||^2`` for the discrete operator."""
    model = ReducedModel(e.grid)
    u = model.to_u(e)
    return -model.l_omega(u, 0.0) / model.inner(u, u)


def project_e0(f: RadialField, e0: RadialField):
    """Split ``f = coeff * e0 + remainder`` with ``remainder`` orthogonal to ``e0``."""
    coeff = discrete_inner(f, e0) / discrete_inner(e0, e0)
    return coeff, f - coeff * e0


def gort_lower_bound_check(g: RadialField, omega: float, e0: RadialField, orth_tol: float = 1e-8):
    """Check ``L_omega(g) >= (omega - 1/16) ||g||^2`` for ``g`` orthogonal to ``e0``.

    Returns ``(lhs, rhs, holds)``; ``holds`` allows ``1e-8 |rhs|`` of slack.
    """
    if not omega > 0:
        raise PreconditionError(f"omega must be positive, got {omega}")
    model = ReducedModel(g.grid)
    u = model.to_u(g)
    g_sq = model.inner(u, u)
    overlap = discrete_inner(g, e0) / np.sqrt(discrete_inner(e0, e0))
    if abs(overlap) > orth_tol * max(np.sqrt(g_sq), 1e-300):
        raise PreconditionError(
            f"g is not orthogonal to e0: <g, e0> = {overlap:.3e}")
    lhs = model.l_omega(u, omega)
    rhs = (omega - exact_omega(1)) * g_sq
    return lhs, rhs, bool(lhs >= rhs - 1e-8 * abs(rhs))


def eigenpairs_to_csv(pairs, path):
    """Write columns ``r, e_0, e_1, ...``."""
    path = Path(path)
    grid = pairs[0].e_k.grid
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r"] + [f"e_{p.k}" for p in pairs])
        cols = np.column_stack([grid.nodes] + [p.e_k.values for p in pairs])
        writer.writerows([[repr(float(v)) for v in row] for row in cols])
    return path


def eigenvalues_json(pairs) -> str:
    grid = pairs[0].e_k.grid if pairs else None
    return json.dumps({"grid": grid.to_dict() if grid else None,
                       "levels": [p.to_dict() for p in pairs]}, indent=2)
