"""Command-line front end: ``hartreelab {spectrum,solve,verify,sweep,maxprinciple,replay}``.

Every run writes into ``<out>/<timestamp>-<hash>/`` where the hash is taken
over the command and its fully resolved configuration.  ``manifest.json``
records the configuration, seeds, wall time and a SHA-256 of every output,
and ``hartreelab replay <manifest>`` reruns the command and compares them.

Exit codes: 0 success, 2 usage or invalid input, 3 non-convergence
(iteration cap or collapse to zero), 4 verification failure or unresolved
grid.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (ConfigurationError, ConvergenceError, GridTooSmallError,
                     PreconditionError, RegimeBoundaryError)

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_FAILED = 0, 2, 3, 4

SOLVER_DEFAULTS = {"n": 2048, "r_max": 60.0, "max_iters": 2000, "el_tol": 1e-8, "seed": 0,
                   "init": "gaussian-random", "init_amplitude": 0.1, "step_size": 1.0,
                   "mixing": 0.5}

DEFAULTS = {
    "spectrum": {"kmax": 2, "n": None, "r_max": None},
    "solve": {"omega": None, "method": "gradient", **SOLVER_DEFAULTS},
    "verify": {"clarkson": False, "forms": False, "pohozaev": False, "maxprinciple": False,
               "reflection": False, "all": False, "n": 500, "omega": 0.2,
               "sweep": "0.01:4:50", "seed": 0, "fields": 5},
    "sweep": {"omega": None, "what": "action", "starts": 10, "seed": 0, "lattice_n": 32,
              "half_width": 12.0, **{k: v for k, v in SOLVER_DEFAULTS.items() if k != "init"}},
    "maxprinciple": {"omega": None, "sweep": None, "n": 4096},
}
COMMON = {"out": "runs", "workers": 1}


class UsageError(Exception):
    pass


# argument types ---------------------------------------------------------------------

def positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not (math.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {text}")
    return value


def positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def nonnegative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def parse_range(text) -> list[float]:
    """``a:b:k`` -> ``k`` evenly spaced values from ``a`` to ``b``; empty ranges are errors."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise UsageError(f"range must look like a:b:k, got {text!r}")
    try:
        a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"range must look like a:b:k, got {text!r}")
    if k < 1 or b < a or (k == 1 and a != b) or not (math.isfinite(a) and math.isfinite(b)):
        raise UsageError(f"empty or malformed range {text!r}")
    return [float(w) for w in np.linspace(a, b, k)]


# parser ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--out", help="parent directory for run directories (default: runs)")
    common.add_argument("--config", help="JSON file of option values; flags override it")
    common.add_argument("--workers", type=positive_int, help="worker processes for sweeps")

    solver = argparse.ArgumentParser(add_help=False, argument_default=S)
    solver.add_argument("--n", type=positive_int, help="radial grid intervals")
    solver.add_argument("--r-max", dest="r_max", type=positive_float)
    solver.add_argument("--max-iters", dest="max_iters", type=positive_int)
    solver.add_argument("--el-tol", dest="el_tol", type=positive_float)
    solver.add_argument("--seed", type=nonnegative_int)
    solver.add_argument("--init-amplitude", dest="init_amplitude", type=positive_float)
    solver.add_argument("--step-size", dest="step_size", type=positive_float)
    solver.add_argument("--mixing", type=positive_float, help="SCF density mixing in (0, 1]")

    parser = argparse.ArgumentParser(prog="hartreelab", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"hartreelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], argument_default=S,
                       help="hydrogen levels and eigenfunctions")
    p.add_argument("--kmax", type=nonnegative_int)
    p.add_argument("--n", type=positive_int)
    p.add_argument("--r-max", dest="r_max", type=positive_float)

    p = sub.add_parser("solve", parents=[common, solver], argument_default=S,
                       help="ground state at one frequency")
    p.add_argument("--omega", type=positive_float)
    p.add_argument("--method", choices=["gradient", "scf"])
    p.add_argument("--init", choices=["gaussian-random", "scaled-e0"])

    p = sub.add_parser("verify", parents=[common], argument_default=S,
                       help="identity and inequality batches")
    for name in ("clarkson", "forms", "pohozaev", "maxprinciple", "reflection", "all"):
        p.add_argument(f"--{name}", action="store_true")
    p.add_argument("--n", type=positive_int, help="pairs per Clarkson/form batch")
    p.add_argument("--omega", type=positive_float)
    p.add_argument("--sweep", help="maximum-principle range a:b:k")
    p.add_argument("--seed", type=nonnegative_int)
    p.add_argument("--fields", type=positive_int, help="lattice fields for the reflection chain")

    p = sub.add_parser("sweep", parents=[common, solver], argument_default=S,
                       help="per-frequency tables")
    p.add_argument("--omega", help="range a:b:k")
    p.add_argument("--what", choices=["action", "N", "uniqueness", "symmetry3d"])
    p.add_argument("--starts", type=positive_int)
    p.add_argument("--lattice-n", dest="lattice_n", type=positive_int)
    p.add_argument("--half-width", dest="half_width", type=positive_float)

    p = sub.add_parser("maxprinciple", parents=[common], argument_default=S,
                       help="comparison-function regime table")
    p.add_argument("--omega", type=positive_float)
    p.add_argument("--sweep", help="range a:b:k")
    p.add_argument("--n", type=positive_int)

    p = sub.add_parser("replay", help="rerun a manifest and compare outputs")
    p.add_argument("manifest")
    p.add_argument("--out", default=None)
    return parser


def resolve_config(command: str, ns: argparse.Namespace) -> tuple[dict, dict]:
    """Defaults, then the JSON config file, then explicit flags."""
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    from_file = {}
    if getattr(ns, "config", None):
        try:
            data = json.loads(Path(ns.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}")
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        nested = data.get(command)
        from_file = {k: v for k, v in data.items() if not isinstance(v, dict)}
        if isinstance(nested, dict):
            from_file.update(nested)
    known = set(DEFAULTS[command]) | set(COMMON)
    unknown = sorted(set(from_file) - known)
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")
    merged = {**COMMON, **DEFAULTS[command], **from_file, **flags}
    common = {k: merged.pop(k) for k in COMMON}
    return merged, common


# run directory and manifest -----------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dump_json(obj, path: Path) -> Path:
    path.write_text(json.dumps(_clean(obj), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def write_csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating))
                                                   else v) for v in row])
    return path


def input_hash(command: str, config: dict) -> str:
    blob = json.dumps({"command": command, "config": _clean(config)}, sort_keys=True)
    return hashlib.sha1(blob.encode("utf-8")).hexdigest()


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def make_run_dir(out: str, digest: str) -> Path:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    base = Path(out) / f"{stamp}-{digest[:10]}"
    path, i = base, 1
    while path.exists():
        path = base.with_name(f"{base.name}-{i}")
        i += 1
    path.mkdir(parents=True)
    return path


def seeds_of(command: str, config: dict) -> dict:
    from .solver import start_seeds
    if command == "sweep" and config.get("what") == "uniqueness":
        return {"seed": config["seed"], "start_seeds": start_seeds(config["seed"], config["starts"])}
    return {"seed": config.get("seed")} if "seed" in config else {}


# commands --------------------------------------------------------------------------------

def _solver_config(cfg: dict, omega: float):
    from .solver import SolverConfig
    return SolverConfig(omega=omega, n=cfg["n"], r_max=cfg["r_max"], step_size=cfg["step_size"],
                        max_iters=cfg["max_iters"], el_tol=cfg["el_tol"], seed=cfg["seed"],
                        init_kind=cfg.get("init", "gaussian-random"),
                        init_amplitude=cfg["init_amplitude"], mixing=cfg["mixing"])


def status_of(result) -> str:
    if result.collapsed:
        return "collapsed"
    return "converged" if result.converged else "iteration-capped"


def cmd_spectrum(cfg, common, run: Path):
    from .radial import build_grid
    from .spectral import default_spectral_grid, eigenpairs_to_csv, eigenvalues_json, hydrogen_eigenpairs

    if cfg["n"] is None and cfg["r_max"] is None:
        grid = default_spectral_grid()
    else:
        ref = default_spectral_grid()
        grid = build_grid(cfg["n"] or ref.n, cfg["r_max"] or ref.r_max)
    try:
        pairs = hydrogen_eigenpairs(grid, cfg["kmax"])
    except GridTooSmallError as exc:
        print(f"grid too small: {exc}", file=sys.stderr)
        return EXIT_FAILED, [], {"status": "grid-too-small", "error": str(exc)}
    path = run / "eigenvalues.json"
    path.write_text(eigenvalues_json(pairs) + "\n", encoding="utf-8")
    outputs = [path, eigenpairs_to_csv(pairs, run / "eigenfunctions.csv")]
    for p in pairs:
        print(f"k={p.k}  omega_k={p.omega_k:.10f}  exact={1 / (4 * (p.k + 1) ** 2):.10f}")
    return EXIT_OK, outputs, {"status": "ok"}


def cmd_solve(cfg, common, run: Path):
    from .solver import minimize_action, scf_fixed_point
    from .verify import pohozaev_residuals

    if cfg["omega"] is None:
        raise UsageError("solve needs --omega")
    config = _solver_config(cfg, cfg["omega"])
    solve = scf_fixed_point if cfg["method"] == "scf" else minimize_action
    result = solve(config)
    status = status_of(result)
    outputs = [result.to_csv(run / "profile.csv")]
    summary = result.summary()
    summary["status"] = status
    summary["trace"] = list(result.trace)
    outputs.append(dump_json(summary, run / "report.json"))
    if result.report is not None:
        reports = [r.to_dict() for r in pohozaev_residuals(result.chi, result.omega)]
        outputs.append(dump_json(reports, run / "pohozaev.json"))
        print(f"omega={result.omega:g}  status={status}  iterations={result.iterations}  "
              f"S={result.report.action:.10g}  N={result.report.l2_sq:.10g}  "
              f"residual={result.el_residual:.2e}")
    if status != "converged":
        print(f"{status}: {result.message}", file=sys.stderr)
        return EXIT_NONCONVERGED, outputs, {"status": status}
    return EXIT_OK, outputs, {"status": status}


def _summaries(batches: dict) -> list[dict]:
    from .verify import batch_summary
    return [batch_summary(name, reports) for name, reports in batches.items()]


def _print_summary(suite: str, rows):
    for row in rows:
        worst = row.get("max_rel_residual", row.get("min_slack"))
        label = "max_rel_residual" if "max_rel_residual" in row else "min_slack"
        print(f"[{suite}] {row['name']:<28} n={row['count']:<5} {label}={worst:.3e}  "
              f"{'PASS' if row['holds'] else 'FAIL'}")


def cmd_verify(cfg, common, run: Path):
    from . import verify as v

    selected = [s for s in ("clarkson", "forms", "pohozaev", "maxprinciple", "reflection")
                if cfg["all"] or cfg[s]]
    if not selected:
        raise UsageError("select at least one of --clarkson --forms --pohozaev --maxprinciple "
                         "--reflection or --all")
    results, failed, code = {}, False, EXIT_OK
    outputs = []
    if "clarkson" in selected:
        rows = []
        for pipeline in ("radial", "lattice"):
            batches = v.clarkson_batch(cfg["n"], cfg["seed"], cfg["omega"], pipeline)
            for row in _summaries(batches):
                row["name"] = f"{pipeline}:{row['name']}"
                rows.append(row)
        scan = v.quartic_bound_scan()
        rows.append({"name": "quartic_scan", "count": scan.samples, "holds": scan.holds,
                     "failures": int(not scan.holds), "max_rel_residual": abs(scan.max_value - 1),
                     "argmax_mu_sq": scan.argmax_mu_sq})
        results["clarkson"] = rows
        _print_summary("clarkson", rows)
    if "forms" in selected:
        rows = []
        for pipeline in ("radial", "lattice"):
            for row in _summaries(v.form_batch(cfg["n"], cfg["seed"], pipeline)):
                row["name"] = f"{pipeline}:{row['name']}"
                rows.append(row)
        rows.append(v.batch_summary("hminus1_exponential", [v.hminus1_probe()]))
        results["forms"] = rows
        _print_summary("forms", rows)
    if "pohozaev" in selected:
        from .solver import minimize_action
        result = minimize_action(_solver_config({**SOLVER_DEFAULTS, "seed": cfg["seed"]},
                                                cfg["omega"]))
        if not result.converged or result.collapsed:
            print(f"solver {status_of(result)} at omega={cfg['omega']}: {result.message}",
                  file=sys.stderr)
            results["pohozaev"] = {"status": status_of(result)}
            code = EXIT_NONCONVERGED
        else:
            reports = [*v.pohozaev_residuals(result.chi, cfg["omega"]),
                       v.action_a_relation(result), v.pohozaev_probe(cfg["omega"])]
            try:
                reports.append(v.energy_action_connection(cfg["omega"]))
            except ConvergenceError as exc:
                print(f"energy-action check skipped: {exc}", file=sys.stderr)
            results["pohozaev"] = [r.to_dict() for r in reports]
            print(v.summary_table(reports))
            failed |= not all(r.holds for r in reports)
    if "maxprinciple" in selected:
        rows = _maxprinciple_rows(parse_range(cfg["sweep"]), 4096)
        outputs.append(_write_maxprinciple(rows, run))
        results["maxprinciple"] = rows
        _print_maxprinciple(rows)
        failed |= not all(r["consistent"] for r in rows)
    if "reflection" in selected:
        from .cartesian import CartesianGrid
        rng = np.random.default_rng(cfg["seed"])
        grid = CartesianGrid(16, 10.0)
        chains = [v.reflection_chain_check(v.random_lattice_field(grid, rng), cfg["omega"], axis)
                  for axis in (1, 2, 3) for _ in range(cfg["fields"])]
        rows = [c.to_dict() for c in chains]
        results["reflection"] = rows
        ok = sum(c.holds for c in chains)
        print(f"[reflection] chains={len(chains)} holding={ok} "
              f"strict_A_step={sum(c.a_step_strict for c in chains)}  "
              f"{'PASS' if ok == len(chains) else 'FAIL'}")
        failed |= ok != len(chains)
    for suite in ("clarkson", "forms"):
        if suite in results:
            failed |= not all(r["holds"] for r in results[suite])
    outputs.insert(0, dump_json(results, run / "verify.json"))
    if failed:
        code = EXIT_FAILED
    return code, outputs, {"status": "failed" if failed else ("ok" if code == 0 else "nonconverged")}


def _maxprinciple_rows(omegas, n):
    from .maxprinciple import analyse
    rows = []
    for w in omegas:
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                row = analyse(w, n).to_dict()
            row["warning"] = "; ".join(str(c.message) for c in caught) or None
        except RegimeBoundaryError as exc:
            row = {"omega": w, "regime": "threshold", "consistent": False, "warning": str(exc)}
        rows.append(row)
    return rows


def _write_maxprinciple(rows, run: Path) -> Path:
    from .maxprinciple import SweepRow
    header = SweepRow.csv_header() + ["warning"]
    return write_csv(run / "maxprinciple.csv", header, [[r.get(k) for k in header] for r in rows])


def _print_maxprinciple(rows):
    print(f"{'omega':>10} {'regime':<30} {'Q>0':>5} {'root':>10} {'residual':>10} {'h>=0':>5} ok")
    for r in rows:
        root = r.get("first_root")
        print(f"{r['omega']:>10.5f} {r['regime']:<30} {str(r.get('q_always_positive', '-')):>5} "
              f"{(f'{root:.4f}' if root is not None else '-'):>10} "
              f"{r.get('residual_rel', float('nan')):>10.2e} {str(r.get('h_nonnegative', '-')):>5} "
              f"{'PASS' if r['consistent'] else 'FAIL'}")


def cmd_maxprinciple(cfg, common, run: Path):
    if (cfg["omega"] is None) == (cfg["sweep"] is None):
        raise UsageError("give exactly one of --omega or --sweep")
    if cfg["omega"] is not None:
        from .maxprinciple import analyse
        rows = [analyse(cfg["omega"], cfg["n"]).to_dict()]
    else:
        rows = _maxprinciple_rows(parse_range(cfg["sweep"]), cfg["n"])
    outputs = [_write_maxprinciple(rows, run), dump_json(rows, run / "maxprinciple.json")]
    _print_maxprinciple(rows)
    ok = all(r["consistent"] for r in rows)
    return (EXIT_OK if ok else EXIT_FAILED), outputs, {"status": "ok" if ok else "failed"}


SWEEP_COLUMNS = {
    "N": ["omega", "status", "N", "action", "el_residual", "iterations", "in_regime", "error"],
    "action": ["omega", "status", "action", "N", "a_quad", "el_residual", "iterations",
               "action_relation_rel", "pohozaev_mass_rel", "pohozaev_dilation_rel",
               "energy_action_rel", "in_regime", "error"],
    "uniqueness": ["omega", "status", "starts", "converged_starts", "max_distance", "holds",
                   "error"],
    "symmetry3d": ["omega", "status", "iterations", "symmetry_deficit", "radial_distance",
                   "boundary_shell", "action", "el_residual", "error"],
}


def _sweep_row(job):
    what, omega, cfg, index, run = job
    from . import verify as v
    from .solver import LOWER_THRESHOLD, UPPER_THRESHOLD, minimize_action, multistart_uniqueness

    row = {"omega": omega, "status": "converged", "error": None}
    in_regime = LOWER_THRESHOLD < omega < UPPER_THRESHOLD
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if what in ("N", "action"):
                result = minimize_action(_solver_config(cfg, omega))
                row.update(status=status_of(result), el_residual=result.el_residual,
                           iterations=result.iterations, in_regime=in_regime,
                           N=result.report.l2_sq, action=result.report.action)
                if what == "action" and row["status"] == "converged":
                    rep = result.report
                    pm, pd = v.pohozaev_residuals(result.chi, omega)
                    row.update(a_quad=rep.a_quad,
                               action_relation_rel=v.action_a_relation(result).rel_residual,
                               pohozaev_mass_rel=pm.rel_residual,
                               pohozaev_dilation_rel=pd.rel_residual,
                               energy_action_rel=v.energy_action_connection(
                                   omega, _solver_config(cfg, omega)).rel_residual)
            elif what == "uniqueness":
                rep = multistart_uniqueness(omega, cfg["starts"], cfg["seed"],
                                            _solver_config(cfg, omega))
                converged = rep.distances.shape[0]
                row.update(starts=cfg["starts"], converged_starts=converged,
                           max_distance=rep.max_distance, holds=rep.holds,
                           status="converged" if converged == cfg["starts"] else "partial")
            else:
                from .cartesian import Config3D, minimize_action_3d, radial_distance
                res = minimize_action_3d(Config3D(omega=omega, n=cfg["lattice_n"],
                                                  half_width=cfg["half_width"], seed=cfg["seed"]))
                radial = minimize_action(_solver_config(cfg, omega))
                row.update(status="converged" if res.converged else "iteration-capped",
                           iterations=res.iterations, symmetry_deficit=res.symmetry_deficit,
                           radial_distance=radial_distance(res.field, radial.chi),
                           boundary_shell=res.boundary_shell, action=res.action,
                           el_residual=res.el_residual)
                res.field.to_binary(Path(run) / f"field_{index:03d}.bin")
    except (ConvergenceError, PreconditionError, ConfigurationError) as exc:
        row.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return row


def cmd_sweep(cfg, common, run: Path):
    if cfg["omega"] is None:
        raise UsageError("sweep needs --omega a:b:k")
    omegas = parse_range(cfg["omega"])
    what = cfg["what"]
    jobs = [(what, w, cfg, i, str(run)) for i, w in enumerate(omegas)]
    if common["workers"] > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=common["workers"]) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(job) for job in jobs]
    cols = SWEEP_COLUMNS[what]
    outputs = [write_csv(run / f"sweep_{what}.csv", cols, [[r.get(c) for c in cols] for r in rows])]
    if what == "symmetry3d":
        for i in range(len(rows)):
            for suffix in (".bin", ".bin.json"):
                p = run / f"field_{i:03d}{suffix}"
                if p.exists():
                    outputs.append(p)
    shown = [c for c in cols if c != "error"]
    print(" ".join(f"{c:>14}" for c in shown))
    for r in rows:
        print(" ".join(f"{_fmt(r.get(c)):>14}" for c in shown))
    code = EXIT_OK
    if any(r["status"] != "converged" for r in rows):
        code = EXIT_NONCONVERGED
    if what == "uniqueness" and not all(r.get("holds") for r in rows):
        code = EXIT_FAILED
    return code, outputs, {"status": "ok" if code == 0 else "partial"}


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


COMMANDS = {"spectrum": cmd_spectrum, "solve": cmd_solve, "verify": cmd_verify,
            "sweep": cmd_sweep, "maxprinciple": cmd_maxprinciple}


def execute(command: str, cfg: dict, common: dict, argv) -> tuple[int, Path]:
    digest = input_hash(command, cfg)
    run = make_run_dir(common["out"], digest)
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    try:
        code, outputs, extra = COMMANDS[command](cfg, common, run)
    except BaseException:
        if not any(run.iterdir()):
            run.rmdir()
        raise
    wall = time.perf_counter() - t0
    manifest = {
        "command": command, "argv": list(argv), "version": __version__,
        "config": cfg, "workers": common["workers"], "seeds": seeds_of(command, cfg),
        "input_hash": digest, "started": started, "wall_time_s": wall,
        "exit_code": code, **extra,
        "outputs": [{"path": p.name, "sha256": sha256_file(p)} for p in outputs],
    }
    dump_json(manifest, run / "manifest.json")
    print(f"run directory: {run}")
    return code, run


def cmd_replay(manifest_path: str, out: str | None):
    path = Path(manifest_path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read manifest {manifest_path}: {exc}")
    command = manifest["command"]
    if command not in COMMANDS:
        raise UsageError(f"manifest command {command!r} cannot be replayed")
    common = {"out": out or str(path.parent.parent), "workers": manifest.get("workers", 1)}
    code, run = execute(command, manifest["config"], common, ["replay", str(manifest_path)])
    new = json.loads((run / "manifest.json").read_text(encoding="utf-8"))
    old_hashes = {o["path"]: o["sha256"] for o in manifest["outputs"]}
    new_hashes = {o["path"]: o["sha256"] for o in new["outputs"]}
    differing = sorted(k for k in old_hashes.keys() | new_hashes.keys()
                       if old_hashes.get(k) != new_hashes.get(k))
    if differing or code != manifest["exit_code"]:
        print(f"replay differs: {', '.join(differing) or 'exit code'}", file=sys.stderr)
        return EXIT_FAILED
    print(f"replay identical: {len(new_hashes)} outputs")
    return EXIT_OK


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        if ns.command == "replay":
            return cmd_replay(ns.manifest, ns.out)
        cfg, common = resolve_config(ns.command, ns)
        code, _ = execute(ns.command, cfg, common, argv)
        return code
    except UsageError as exc:
        parser.error(str(exc))
    except (ConfigurationError, PreconditionError) as exc:
        print(f"hartreelab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"hartreelab: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except GridTooSmallError as exc:
        print(f"hartreelab: grid too small: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
