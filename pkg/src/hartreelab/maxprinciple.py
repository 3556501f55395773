"""Comparison functions ``phi = exp(-beta r) Q(r)`` for ``-Delta - 1/|x| + omega``.

With ``beta = sqrt(omega)`` and ``Q(r) = A r^2 + B r + C`` one has

    exp(beta r) r h(r) = -(2B + C(1 - 2 beta)) - (6A + B(1 - 4 beta)) r + (6 beta - 1) A r^2

for ``h = (-Delta - 1/|x| + omega) phi``.  The coefficient choices below
cancel the constant and linear terms, leaving ``(6 beta - 1) r^2`` when
``A = 1`` and ``(1 - 4 beta) r`` when ``A = 0``; in both cases ``h >= 0``.
``Q`` stays positive exactly when ``omega >= 1/4``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConditioningWarning, PreconditionError, RegimeBoundaryError
from .radial import RadialField, build_grid
from .verify import IdentityReport

QUARTER = 0.25
SIXTEENTH = 1.0 / 16.0
THRESHOLD_GAP = 1e-12
STIFF_GAP = 1e-6
RESIDUAL_RTOL = 1e-6
RESIDUAL_NODES = 4096


@dataclass(frozen=True)
class TestFunctionSpec:
    """Regime and coefficients of ``phi = exp(-beta r) (A r^2 + B r + C)``."""

    __test__ = False  # keep pytest from collecting the class by name

    omega: float
    beta: float
    regime: str
    A: float
    B: float
    C: float

    def q(self, r):
        r = np.asarray(r, dtype=float)
        return self.A * r * r + self.B * r + self.C

    def closed_form(self, r):
        """``exp(beta r) r h(r)`` predicted for this regime."""
        r = np.asarray(r, dtype=float)
        if self.regime == "exactly_quarter":
            return np.zeros_like(r)
        if self.regime == "below_sixteenth":
            return (1.0 - 4.0 * self.beta) * r
        return (6.0 * self.beta - 1.0) * r * r

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def regime_of(omega: float) -> str:
    if abs(omega - QUARTER) <= THRESHOLD_GAP:
        return "exactly_quarter"
    if omega > QUARTER:
        return "above_quarter"
    if omega > SIXTEENTH:
        return "between_sixteenth_and_quarter"
    return "below_sixteenth"


def test_function_spec(omega: float) -> TestFunctionSpec:
    """Coefficients of the comparison function for ``omega``.

    Raises ``RegimeBoundaryError`` within ``1e-12`` of ``1/16`` and warns with
    ``ConditioningWarning`` when ``|4 beta - 1|`` or ``|2 beta - 1|`` is below
    ``1e-6``.
    """
    if not (np.isfinite(omega) and omega > 0):
        raise PreconditionError(f"omega must be positive, got {omega}")
    if abs(omega - SIXTEENTH) <= THRESHOLD_GAP:
        raise RegimeBoundaryError("omega = 1/16: both coefficient branches degenerate (4 beta = 1)")
    beta = float(np.sqrt(omega))
    regime = regime_of(omega)
    if regime == "exactly_quarter":
        return TestFunctionSpec(float(omega), 0.5, regime, 0.0, 0.0, 1.0)
    if abs(4 * beta - 1) < STIFF_GAP or abs(2 * beta - 1) < STIFF_GAP:
        warnings.warn(f"omega={omega} is within {STIFF_GAP} of a threshold in beta; "
                      "coefficients are large", ConditioningWarning, stacklevel=2)
    if regime == "below_sixteenth":
        return TestFunctionSpec(float(omega), beta, regime, 0.0, -1.0, 2.0 / (1.0 - 2.0 * beta))
    a = 1.0
    b = 6.0 / (4.0 * beta - 1.0)
    c = 12.0 / ((2.0 * beta - 1.0) * (4.0 * beta - 1.0))
    return TestFunctionSpec(float(omega), beta, regime, a, b, c)


test_function_spec.__test__ = False


def default_grid(beta: float, n: int = RESIDUAL_NODES):
    """Grid covering about 40 decay lengths, capped at r = 60."""
    return build_grid(n, min(60.0, 40.0 / beta))


def build_test_function(omega: float, grid=None):
    """Return ``(spec, phi)`` with ``phi`` sampled on ``grid``."""
    spec = test_function_spec(omega)
    grid = grid or default_grid(spec.beta)
    phi = RadialField.from_function(grid, lambda r: np.exp(-spec.beta * r) * spec.q(r))
    return spec, phi


def _coefficients(spec: TestFunctionSpec, dt):
    # Recompute in the working precision so that large B, C near 1/16 stay consistent.
    beta = dt(spec.omega) ** dt(0.5)
    if spec.regime == "exactly_quarter":
        return beta, dt(0), dt(0), dt(1)
    if spec.regime == "below_sixteenth":
        return beta, dt(0), dt(-1), 2 / (1 - 2 * beta)
    b4 = 4 * beta - 1
    return beta, dt(1), 6 / b4, 12 / ((2 * beta - 1) * b4)


def weighted_operator(spec: TestFunctionSpec, n: int, r_max: float, dtype=np.longdouble):
    """Finite-difference ``exp(beta r) r h(r)`` on the uniform nodes ``r_j = j r_max / n``.

    ``u = r phi`` is sampled from its closed form on two ghost nodes past
    either end (``u`` is entire, so the ghosts on ``r < 0`` use the same
    formula), then ``-u'' - u/r + omega u`` is taken with the five-point
    central stencil.  Arithmetic runs in ``dtype``: near ``omega = 1/16`` the
    coefficients of ``Q`` are large and float64 second differences lose
    the answer to cancellation.

    Returns ``(r, weighted)`` as float64 arrays.
    """
    dt = dtype
    h = dt(r_max) / n
    s = np.arange(-2, n + 3).astype(dt) * h
    beta, a, b, c = _coefficients(spec, dt)
    u = s * np.exp(-beta * s) * ((a * s + b) * s + c)
    upp = (-u[:-4] + 16 * u[1:-3] - 30 * u[2:-2] + 16 * u[3:-1] - u[4:]) / (12 * h * h)
    r, ui, upp = s[3:-2], u[3:-2], upp[1:]
    w = np.exp(beta * r) * (-upp - ui / r + dt(spec.omega) * ui)
    return r.astype(float), w.astype(float)


@dataclass(frozen=True)
class ResidualReport:
    report: IdentityReport
    h_min: float
    h_scale: float
    tol: float = RESIDUAL_RTOL

    @property
    def h_nonnegative(self) -> bool:
        """``h >= 0`` up to the residual tolerance (``h`` vanishes identically at 1/4)."""
        return bool(self.h_min >= -self.tol * self.h_scale)


def residual_h(spec: TestFunctionSpec, n: int = RESIDUAL_NODES, r_max: float | None = None,
               tol: float = RESIDUAL_RTOL) -> ResidualReport:
    """Compare the numerical ``exp(beta r) r h(r)`` with the closed form.

    The residual is the sup over nodes of the difference, relative to the sup
    of the closed form; at ``omega = 1/4``, where the closed form vanishes,
    it is relative to the sup of ``exp(beta r) r omega phi`` instead.
    ``h_min`` is the smallest nodal value of ``exp(beta r) h``.
    """
    r_max = min(60.0, 40.0 / spec.beta) if r_max is None else r_max
    r, w = weighted_operator(spec, n, r_max)
    closed = spec.closed_form(r)
    err = float(np.max(np.abs(w - closed)))
    scale = float(np.max(np.abs(closed)))
    if scale == 0.0:
        scale = float(np.max(np.abs(r * spec.omega * spec.q(r))))
    rel = err / scale
    rep = IdentityReport(name=f"max_principle_residual[{spec.regime}]",
                         lhs=float(np.max(np.abs(w))), rhs=float(np.max(np.abs(closed))),
                         abs_residual=err, rel_residual=rel, holds=bool(rel <= tol),
                         tolerance=tol, kind="identity",
                         details={"omega": spec.omega, "regime": spec.regime, "n": n,
                                  "r_max": r_max})
    h_scale = float(np.max(np.abs(spec.omega * spec.q(r))))
    return ResidualReport(rep, float(np.min(w / r)), h_scale, tol)


def q_sign_analysis(spec: TestFunctionSpec):
    """Return ``(always_positive, first_root)`` of ``Q`` on ``[0, inf)``."""
    coeffs = [spec.A, spec.B, spec.C]
    while coeffs and coeffs[0] == 0:
        coeffs = coeffs[1:]
    if len(coeffs) <= 1:
        return bool(spec.C > 0), None
    roots = np.roots(coeffs)
    real = np.sort(roots[np.abs(roots.imag) <= 1e-12 * np.maximum(1.0, np.abs(roots))].real)
    positive = real[real > 0]
    if positive.size == 0:
        return bool(spec.q(0.0) > 0), None
    return False, float(positive[0])


@dataclass(frozen=True)
class SweepRow:
    omega: float
    regime: str
    A: float
    B: float
    C: float
    q_always_positive: bool
    q_sampled_positive: bool
    first_root: float | None
    residual_rel: float
    residual_holds: bool
    h_min: float
    h_nonnegative: bool

    @property
    def consistent(self) -> bool:
        """Q positivity matches the regime and the residual and sign of h check out."""
        expect_positive = self.regime in ("above_quarter", "exactly_quarter")
        return bool(self.q_always_positive == expect_positive
                    and self.q_sampled_positive == expect_positive
                    and self.residual_holds and self.h_nonnegative)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["consistent"] = self.consistent
        return d

    @staticmethod
    def csv_header():
        return ["omega", "regime", "A", "B", "C", "q_always_positive", "q_sampled_positive",
                "first_root", "residual_rel", "residual_holds", "h_min", "h_nonnegative",
                "consistent"]

    def csv_row(self):
        d = self.to_dict()
        return ["" if d[k] is None else d[k] for k in self.csv_header()]


def analyse(omega: float, n: int = RESIDUAL_NODES) -> SweepRow:
    spec = test_function_spec(omega)
    always, root = q_sign_analysis(spec)
    r_max = min(60.0, 40.0 / spec.beta)
    sampled = bool(np.all(spec.q(np.linspace(0.0, r_max, n + 1)) > 0))
    res = residual_h(spec, n, r_max)
    return SweepRow(spec.omega, spec.regime, spec.A, spec.B, spec.C, always, sampled, root,
                    res.report.rel_residual, res.report.holds, res.h_min, res.h_nonnegative)


def sweep(omegas, n: int = RESIDUAL_NODES, workers: int = 1) -> list[SweepRow]:
    """Analyse every ``omega``; rows come back in input order."""
    omegas = [float(w) for w in omegas]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(analyse, omegas, [n] * len(omegas)))
    return [analyse(w, n) for w in omegas]
