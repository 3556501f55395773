"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line with the measured numbers; the
lines are printed in the terminal summary (and by ``python tests/test_acceptance.py``).
"""

import time

import numpy as np
import pytest

from hartreelab import functionals as fn
from hartreelab import verify as v
from hartreelab.cartesian import CartesianGrid, Config3D, minimize_action_3d, radial_distance
from hartreelab.maxprinciple import analyse, residual_h, test_function_spec
from hartreelab.radial import RadialField, build_grid, l2_inner
from hartreelab.solver import (SolverConfig, minimize_action, multistart_uniqueness,
                               relative_distance, scf_fixed_point, trial_action)
from hartreelab.spectral import hydrogen_eigenpairs

LINES = []


def record(number, title, ok, detail):
    LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}: {detail}")
    return ok


@pytest.fixture(scope="module")
def solved():
    return {w: minimize_action(SolverConfig(omega=w)) for w in (0.05, 0.1, 0.2)}


def test_hydrogen_spectrum():
    t0 = time.perf_counter()
    pairs = hydrogen_eigenpairs(build_grid(4096, 120.0), 2)
    errs = [abs(p.omega_k * 4 * (p.k + 1) ** 2 - 1) for p in pairs]
    e0 = pairs[0].e_k
    ref = RadialField.from_function(e0.grid, lambda r: np.exp(-r / 2))
    c = l2_inner(e0, ref) / l2_inner(ref, ref)
    diff = e0 - ref * c
    profile_err = np.sqrt(l2_inner(diff, diff) / l2_inner(e0, e0))
    elapsed = time.perf_counter() - t0
    ok = max(errs) <= 1e-5 and profile_err <= 1e-4 and elapsed <= 30
    assert record(1, "hydrogen spectrum", ok,
                  f"max rel err {max(errs):.1e} (<=1e-5), e0 L2 err {profile_err:.1e} (<=1e-4), "
                  f"{elapsed:.2f}s (<=30s)")


def test_existence_and_sign(solved):
    worst_margin, ok = np.inf, True
    for w, res in solved.items():
        ok &= res.converged and not res.collapsed and res.action < 0
        for delta in (0.05, 0.1):
            bound = trial_action(delta, w)
            ok &= res.action <= bound + 1e-10 * abs(bound)
            # the weaker bound with the quartic coefficient doubled holds a fortiori
            weaker = 0.5 * ((w - 0.25) * 8 * np.pi * delta ** 2 + 20 * np.pi ** 2 * delta ** 4)
            ok &= res.action <= weaker
            worst_margin = min(worst_margin, bound - res.action)
    actions = ", ".join(f"S({w})={r.action:.4e}" for w, r in solved.items())
    assert record(2, "existence and sign", ok,
                  f"{actions}; min trial margin {worst_margin:.2e}")


def test_pohozaev():
    ok, parts = True, []
    for w in (0.05, 0.1, 0.2):
        history = []
        for n in (1024, 2048, 4096):
            res = minimize_action(SolverConfig(omega=w, n=n))
            ok &= res.converged
            first, second = v.pohozaev_residuals(res.chi, w)
            ok &= first.holds and second.holds
            history.append((first.rel_residual, second.rel_residual))
        h = np.array(history)
        ok &= bool(np.all(np.diff(h, axis=0) < 0))
        parts.append(f"w={w}: {h[1, 0]:.1e}/{h[1, 1]:.1e}")
    probe = v.pohozaev_probe(0.2)
    ok &= probe.holds
    assert record(3, "Pohozaev identities", ok,
                  f"{'; '.join(parts)} (<=1e-3, decreasing over n=1024,2048,4096); "
                  f"probe {probe.lhs:.8f} vs {probe.rhs:.8f} rel {probe.rel_residual:.1e} (<=1e-6)")


def test_critical_point_relation(solved):
    reps = [v.action_a_relation(solved[w]) for w in (0.1, 0.2)]
    rel = [abs(r.lhs - r.rhs) / abs(r.lhs) for r in reps]
    ok = max(rel) <= 1e-3
    assert record(4, "S = -A/4", ok, f"rel {rel[0]:.1e}, {rel[1]:.1e} (<=1e-3)")


def test_clarkson_suite():
    t0 = time.perf_counter()
    summaries = []
    for pipeline in ("radial", "lattice"):
        for name, reports in v.clarkson_batch(500, seed=1, pipeline=pipeline).items():
            summaries.append(v.batch_summary(f"{pipeline}:{name}", reports))
    scan = v.quartic_bound_scan()
    elapsed = time.perf_counter() - t0
    l_res = max(s["max_rel_residual"] for s in summaries if s["name"].endswith("clarkson_L"))
    slack = min(s["min_slack"] for s in summaries if "min_slack" in s)
    ok = (all(s["holds"] for s in summaries) and l_res <= 1e-10 and slack >= -1e-9
          and scan.holds and elapsed <= 60)
    assert record(5, "Clarkson suite", ok,
                  f"Clark-L max rel {l_res:.1e} (<=1e-10), min slack {slack:.2e} (>=-1e-9), "
                  f"quartic max {scan.max_value:.15f} at mu^2={scan.argmax_mu_sq}, {elapsed:.1f}s (<=60s)")


def test_maximum_principle_dichotomy():
    omegas = np.geomspace(0.01, 4.0, 50)
    rows = [analyse(w) for w in omegas]
    above = [r for r in rows if r.omega > 0.25]
    below = [r for r in rows if r.omega < 0.25]
    ok = all(r.q_always_positive and r.q_sampled_positive for r in above)
    ok &= all(not r.q_always_positive and not r.q_sampled_positive for r in below)
    worst = max(r.residual_rel for r in rows)
    ok &= worst <= 1e-6 and all(r.h_nonnegative for r in rows)
    quarter = residual_h(test_function_spec(0.25))
    ok &= quarter.report.holds and quarter.h_nonnegative
    assert record(6, "maximum-principle dichotomy", ok,
                  f"{len(above)} above 1/4 with Q>0, {len(below)} below with a sign change, "
                  f"max residual {worst:.1e} (<=1e-6), h at 1/4 rel {quarter.report.rel_residual:.1e}")


def test_uniqueness(solved):
    rep = multistart_uniqueness(0.2, n_starts=10, seed=0)
    scf = scf_fixed_point(SolverConfig(omega=0.2))
    agree = relative_distance(scf.chi, solved[0.2].chi)
    ok = rep.holds and len(rep.excluded) == 0 and scf.converged and agree <= 1e-4
    assert record(7, "uniqueness", ok,
                  f"max pairwise {rep.max_distance:.1e} (<=1e-3) over 10 starts, "
                  f"SCF vs gradient {agree:.1e} (<=1e-4)")


def test_symmetry_probe(solved):
    t0 = time.perf_counter()
    res = minimize_action_3d(Config3D(omega=0.2, n=32, half_width=12.0))
    dist = radial_distance(res.field, solved[0.2].chi)
    elapsed = time.perf_counter() - t0
    ok = res.converged and res.symmetry_deficit <= 5e-2 and dist <= 5e-2 and elapsed <= 600
    assert record(8, "3D symmetry probe", ok,
                  f"deficit {res.symmetry_deficit:.1e} (<=5e-2), radial distance {dist:.4f} (<=5e-2), "
                  f"{elapsed:.1f}s (<=600s)")


def test_energy_action_connection():
    reps = [v.energy_action_connection(w) for w in (0.1, 0.2)]
    rel = [r.details["rel_to_action"] for r in reps]
    ok = max(rel) <= 1e-3
    assert record(9, "energy-action connection", ok, f"rel {rel[0]:.1e}, {rel[1]:.1e} (<=1e-3)")


def test_form_identities():
    summaries = []
    for pipeline in ("radial", "lattice"):
        for name, reports in v.form_batch(200, seed=7, pipeline=pipeline).items():
            summaries.append(v.batch_summary(f"{pipeline}:{name}", reports))
    probe = v.hminus1_probe()
    ok = all(s["holds"] for s in summaries) and probe.holds
    par = max(s["max_rel_residual"] for s in summaries if "max_rel_residual" in s)
    slack = min(s["min_slack"] for s in summaries if "min_slack" in s)
    assert record(10, "form identities", ok,
                  f"parallelogram max rel {par:.1e}, Cauchy min slack {slack:.2e}, "
                  f"A(e^-r)/(4pi) rel err {probe.rel_residual:.1e} (<=1e-6)")


if __name__ == "__main__":
    import sys
    code = pytest.main([__file__, "-q"])
    print("\n".join(LINES))
    sys.exit(code)
