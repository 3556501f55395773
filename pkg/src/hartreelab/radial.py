"""Radial grids, quadrature and finite differences for functions on R^3.

A radial function chi(|x|) is stored by its profile on nodes
0 < r_1 < ... < r_n = r_max.  The origin is never a node; whenever a rule
needs chi(0) it is extrapolated according to the field's ``parity_hint``.

Quadrature is a piecewise-cubic interpolatory rule: every interval
[x_k, x_{k+1}] of the extended node set {0, r_1, ..., r_n} is integrated
exactly for cubics through four neighbouring nodes.  On a uniform grid this
is the composite trapezoid rule with end corrections on the first and last
three nodes; interior weights equal the spacing.  Log-uniform grids use the
trapezoid rule on [0, r_1] so that all weights stay positive.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import ConfigurationError

FOUR_PI = 4.0 * np.pi
MIN_NODES = 64

SpacingKind = Literal["uniform", "log-uniform"]
Parity = Literal["regular", "even", "odd"]


def _interval_weights(x):
    """Weights of the cubic rule on each interval of the node vector ``x``.

    Returns ``(start, w)`` where interval ``k`` is integrated as
    ``sum(w[k, j] * y[start[k] + j] for j in range(4))``.
    """
    m = len(x)
    k = np.arange(m - 1)
    start = np.clip(k - 1, 0, m - 4)
    idx = start[:, None] + np.arange(4)[None, :]
    dx = x[k + 1] - x[k]
    # Local variable scaled to the interval length keeps the Vandermonde tame.
    t = (x[idx] - x[k][:, None]) / dx[:, None]
    powers = np.arange(4)
    vand_t = t[:, None, :] ** powers[None, :, None]  # (m-1, p, j)
    moments = 1.0 / (powers + 1.0)
    w = np.linalg.solve(vand_t, np.broadcast_to(moments, (m - 1, 4))[..., None])[..., 0]
    return start, w * dx[:, None]


def _derivative_weights(x, order, width=5):
    """Finite-difference weights of the given derivative order at every node of ``x``.

    Each node uses ``width`` consecutive nodes, centred where possible and
    shifted one-sided at both ends.
    """
    m = len(x)
    i = np.arange(m)
    start = np.clip(i - width // 2, 0, m - width)
    idx = start[:, None] + np.arange(width)[None, :]
    scale = np.max(np.abs(x[idx] - x[i][:, None]), axis=1)
    t = (x[idx] - x[i][:, None]) / scale[:, None]
    powers = np.arange(width)
    vand_t = t[:, None, :] ** powers[None, :, None]
    rhs = np.zeros(width)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    w = np.linalg.solve(vand_t, np.broadcast_to(rhs, (m, width))[..., None])[..., 0]
    return idx, w / scale[:, None] ** order


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Quadrature and differentiation mesh on (0, r_max].

    Attributes
    ----------
    nodes : ndarray
        Strictly increasing positive radii, ``nodes[-1] == r_max``.
    weights : ndarray
        Quadrature weights for ``int_0^r_max f(r) dr`` at ``nodes``.
    origin_weight : float
        Weight attached to the extrapolated value ``f(0)``.
    spacing_kind : str
        ``"uniform"`` or ``"log-uniform"``.
    r_max : float
    """

    nodes: np.ndarray
    weights: np.ndarray
    origin_weight: float
    spacing_kind: str
    r_max: float
    _start: np.ndarray = field(repr=False)
    _iw: np.ndarray = field(repr=False)
    _stencils: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def extended_nodes(self) -> np.ndarray:
        """Nodes with the origin prepended."""
        return np.concatenate([[0.0], self.nodes])

    @property
    def spacing(self) -> float:
        if self.spacing_kind != "uniform":
            raise ConfigurationError("spacing is only defined for uniform grids")
        return self.r_max / self.n

    def derivative_stencil(self, order: int):
        """Cached ``(idx, w)`` of the five-point rule on the extended nodes."""
        if order not in self._stencils:
            self._stencils[order] = _derivative_weights(self.extended_nodes, order)
        return self._stencils[order]

    def cumulative(self, y_ext):
        """Running integral ``int_0^{x_k} y`` on the extended node set.

        ``y_ext`` has length ``n + 1`` (origin value first); the result has
        the same length and starts at zero.
        """
        y_ext = np.asarray(y_ext, dtype=float)
        idx = self._start[:, None] + np.arange(4)[None, :]
        pieces = np.sum(self._iw * y_ext[idx], axis=1)
        return np.concatenate([[0.0], np.cumsum(pieces)])

    def to_dict(self) -> dict:
        return {"n": self.n, "r_max": self.r_max, "spacing_kind": self.spacing_kind}

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            self.spacing_kind == other.spacing_kind
            and self.n == other.n
            and np.array_equal(self.nodes, other.nodes)
        )


def build_grid(n: int = 2048, r_max: float = 60.0, kind: SpacingKind = "uniform",
               r_min: float | None = None) -> RadialGrid:
    """Build a radial grid.

    Parameters
    ----------
    n : int
        Number of nodes, at least 64.
    r_max : float
        Outer radius (last node).
    kind : {"uniform", "log-uniform"}
        Uniform grids use ``r_i = i * r_max / n``.  Log-uniform grids are
        geometric between ``r_min`` and ``r_max``.
    r_min : float, optional
        First node of a log-uniform grid; defaults to ``r_max / n**2``.
    """
    if int(n) != n or n < MIN_NODES:
        raise ConfigurationError(f"grid needs n >= {MIN_NODES} nodes, got {n}")
    if not np.isfinite(r_max) or r_max <= 0:
        raise ConfigurationError(f"r_max must be positive, got {r_max}")
    n = int(n)
    r_max = float(r_max)
    if kind == "uniform":
        nodes = r_max * np.arange(1, n + 1) / n
    elif kind == "log-uniform":
        r_min = r_max / n**2 if r_min is None else float(r_min)
        if not 0 < r_min < r_max:
            raise ConfigurationError("log-uniform grid needs 0 < r_min < r_max")
        nodes = np.geomspace(r_min, r_max, n)
        nodes[-1] = r_max
    else:
        raise ConfigurationError(f"unknown spacing kind {kind!r}")

    x = np.concatenate([[0.0], nodes])
    start, iw = _interval_weights(x)
    if kind == "log-uniform":
        # Clustered nodes make the cubic through [0, r_1] extrapolate; trapezoid keeps weights positive.
        iw[0] = [0.5 * nodes[0], 0.5 * nodes[0], 0.0, 0.0]
    full = np.zeros(n + 1)
    np.add.at(full, start[:, None] + np.arange(4)[None, :], iw)
    return RadialGrid(nodes=nodes, weights=full[1:], origin_weight=float(full[0]),
                      spacing_kind=kind, r_max=r_max, _start=start, _iw=iw)


@dataclass(frozen=True, eq=False)
class RadialField:
    """Samples ``chi(r_i)`` of a radial function on a grid.

    ``parity_hint`` controls how the origin value is recovered:
    ``"regular"`` extrapolates a cubic in r, ``"even"`` a quadratic in r**2,
    ``"odd"`` pins it to zero.
    """

    grid: RadialGrid
    values: np.ndarray
    parity_hint: str = "regular"

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise ConfigurationError(
                f"field has {values.shape} samples, grid has {self.grid.n} nodes")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("field values must be finite")
        if self.parity_hint not in ("regular", "even", "odd"):
            raise ConfigurationError(f"unknown parity hint {self.parity_hint!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid, func, parity_hint="regular"):
        return cls(grid, func(grid.nodes), parity_hint)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n))

    @property
    def r(self):
        return self.grid.nodes

    def origin_value(self) -> float:
        r = self.grid.nodes
        f = self.values
        if self.parity_hint == "odd":
            return 0.0
        if self.parity_hint == "even":
            c = np.polyfit(r[:3] ** 2, f[:3], 2)
            return float(c[-1])
        c = np.polyfit(r[:4], f[:4], 3)
        return float(c[-1])

    def extended(self) -> np.ndarray:
        """Values with ``chi(0)`` prepended."""
        return np.concatenate([[self.origin_value()], self.values])

    def with_values(self, values, parity_hint=None):
        return RadialField(self.grid, values,
                           self.parity_hint if parity_hint is None else parity_hint)

    def _check(self, other):
        if not self.grid.same_as(other.grid):
            raise ConfigurationError("fields live on different grids")

    def _combine_parity(self, other):
        return self.parity_hint if self.parity_hint == other.parity_hint else "regular"

    def __add__(self, other):
        if isinstance(other, RadialField):
            self._check(other)
            return RadialField(self.grid, self.values + other.values,
                               self._combine_parity(other))
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, RadialField):
            self._check(other)
            return RadialField(self.grid, self.values - other.values,
                               self._combine_parity(other))
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, RadialField):
            self._check(other)
            return RadialField(self.grid, self.values * other.values, "regular")
        if np.isscalar(other):
            return RadialField(self.grid, self.values * float(other), self.parity_hint)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return RadialField(self.grid, -self.values, self.parity_hint)

    def __truediv__(self, scalar):
        return RadialField(self.grid, self.values / float(scalar), self.parity_hint)

    def square(self):
        return RadialField(self.grid, self.values**2, "regular")

    def abs(self):
        return RadialField(self.grid, np.abs(self.values), self.parity_hint)

    # serialization -------------------------------------------------------

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "value"])
            for r, v in zip(self.grid.nodes, self.values):
                writer.writerow([repr(float(r)), repr(float(v))])
        return path

    def to_json(self) -> str:
        return json.dumps({"grid": self.grid.to_dict(), "parity_hint": self.parity_hint,
                           "values": [float(v) for v in self.values]})

    @classmethod
    def from_json(cls, text: str) -> "RadialField":
        data = json.loads(text)
        g = data["grid"]
        grid = build_grid(g["n"], g["r_max"], g["spacing_kind"])
        return cls(grid, np.array(data["values"]), data.get("parity_hint", "regular"))

    @classmethod
    def from_csv(cls, path, grid: RadialGrid, parity_hint="regular") -> "RadialField":
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        if not np.allclose(data[:, 0], grid.nodes, rtol=1e-12, atol=0):
            raise ConfigurationError("CSV radii do not match the grid")
        return cls(grid, data[:, 1], parity_hint)


def integrate_radial(f: RadialField, moment: int = 2) -> float:
    """``int_0^r_max f(r) r**moment dr`` (no 4*pi factor)."""
    if moment not in (0, 1, 2):
        raise ConfigurationError(f"moment must be 0, 1 or 2, got {moment}")
    g = f.grid
    total = float(np.dot(g.weights, f.values * g.nodes**moment))
    if moment == 0:
        total += g.origin_weight * f.origin_value()
    return total


def differentiate(f: RadialField, order: int = 1) -> RadialField:
    """First or second radial derivative by five-point finite differences.

    The stencil includes the (extrapolated) origin, is centred in the
    interior and one-sided near both ends.
    """
    if order not in (1, 2):
        raise ConfigurationError(f"derivative order must be 1 or 2, got {order}")
    idx, w = f.grid.derivative_stencil(order)
    y = f.extended()
    d = np.sum(w * y[idx], axis=1)[1:]
    parity = {"even": "odd", "odd": "even"}.get(f.parity_hint, "regular")
    if order == 2:
        parity = f.parity_hint
    return RadialField(f.grid, d, parity)


def norms(f: RadialField) -> tuple[float, float]:
    """Return ``(||f||_{L^2}^2, ||grad f||_{L^2}^2)`` of the radial function on R^3."""
    l2_sq = FOUR_PI * integrate_radial(f.square(), 2)
    df = differentiate(f, 1)
    h1dot_sq = FOUR_PI * integrate_radial(df.square(), 2)
    return l2_sq, h1dot_sq


def l2_inner(f: RadialField, g: RadialField) -> float:
    """``<f, g>_{L^2(R^3)}`` using the grid quadrature."""
    return FOUR_PI * integrate_radial(f * g, 2)


def dilate(f_func, lam):
    """``r -> f_func(lam * r)``; convenience for scaling experiments."""
    return lambda r: f_func(lam * np.asarray(r))
