"""Command line front end.

    fatcoag <command> [--config PATH] [--out DIR] [--grid-nodes N] [--seed S] [--strict]

Commands: exact, verify-kernel, verify-inverse, solve, diagnose, sweep.
Configs are JSON objects validated against :data:`CONFIG_SCHEMA`; outputs
are CSV files with one header line and 17 significant digits, and JSON
files with sorted keys.  Every failure prints one line
``error <code>: <reason>`` on stderr and exits with

    0 ok, 1 numerical failure, 2 invalid config, 3 non-contraction, 4 verification failed.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .diagnostics import (
    FitInstabilityError,
    MomentDivergenceError,
    boundary_layer_report,
    distance_report,
    is_extension,
    kappa,
    moments,
    tail_normalization_check,
)
from .grids import CoverageError, LaplaceProfile, QuadratureError, log_grid
from .kernels import phi_explicit, phi_plemelj, power_law_kernel, verify_laplace_identity
from .linop import admissible_examples, apply_LL, apply_LLinv
from .operators import fbar_profile
from .solver import NonContractionError, SolverConfig, SolverReport, residual_Qode, solve_profile
from .special import (
    ExactProfileParams,
    eval_Fbar,
    eval_Fbar_deriv,
    eval_fbar,
    eval_Qbar,
    exact_moment,
    fbar_small_x_coefficient,
    fbar_tail_coefficient,
)

__all__ = ["main", "CONFIG_SCHEMA", "EXIT_OK", "EXIT_NUMERICAL", "EXIT_CONFIG", "EXIT_NONCONTRACTION", "EXIT_VERIFY"]

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2
EXIT_NONCONTRACTION = 3
EXIT_VERIFY = 4

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_COUNT = {"type": "integer", "minimum": 16}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "rho": _NUM,
        "alpha": _NUM,
        "epsilon": _NUM,
        "epsilon_cap": _POS,
        "theta": _NUM,
        "mu": _NUM,
        "damping": _NUM,
        "tol": _POS,
        "step_tol": _POS,
        "max_iter": {"type": "integer", "minimum": 1},
        "scheme": {"type": "string"},
        "gain": _NUM,
        "q_min": _POS,
        "q_max": _POS,
        "q_nodes": _COUNT,
        "z_min": _POS,
        "z_max": _POS,
        "z_nodes": _COUNT,
        "x_min": _POS,
        "x_max": _POS,
        "x_nodes": _COUNT,
        "gammas": {"type": "array", "items": _NUM, "minItems": 1},
        "epsilons": {"type": "array", "items": _NUM, "minItems": 1},
        "profile": {"type": "string"},
        "kernel_points": {"type": "integer", "minimum": 1},
    },
}

_SOLVER_KEYS = (
    "rho", "alpha", "epsilon", "epsilon_cap", "theta", "mu", "damping", "tol", "step_tol", "max_iter",
    "scheme", "gain", "q_min", "q_max", "q_nodes", "z_min", "z_max", "z_nodes", "x_min", "x_max", "x_nodes",
)

# verification thresholds (halved by --strict)
KERNEL_THRESHOLD = 1e-3
INVERSE_THRESHOLD = 1e-6
QODE_THRESHOLD = 1e-5


class ConfigError(ValueError):
    """The run configuration violates the schema or a parameter invariant."""


class VerificationError(RuntimeError):
    """A verification residual exceeded its threshold."""


# -- plumbing -----------------------------------------------------------------


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], columns) -> None:
    cols = [np.asarray(c, dtype=float) for c in columns]
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in zip(*cols)]
    path.write_text("\n".join(lines) + "\n")


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    text = Path(path).read_text().splitlines()
    header = text[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in text[1:] if line], dtype=float)
    return header, data


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=True) + "\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"schema: {exc.message}") from exc
    return cfg


def _solver_config(cfg: dict, grid_nodes: int | None, **override) -> SolverConfig:
    kw = {k: cfg[k] for k in _SOLVER_KEYS if k in cfg}
    kw.setdefault("rho", 0.7)
    kw.setdefault("alpha", 1.0 / 3.0)
    if grid_nodes is not None:
        kw["q_nodes"] = grid_nodes
    kw.update(override)
    try:
        return SolverConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# -- commands -----------------------------------------------------------------


def cmd_exact(cfg: dict, out: Path, args) -> int:
    rho = cfg.get("rho", 0.7)
    try:
        params = ExactProfileParams(rho)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    n = args.grid_nodes or cfg.get("q_nodes", 1000)
    grid = log_grid(cfg.get("q_min", 1e-12), cfg.get("q_max", 1e10), n)
    q = grid.nodes
    write_csv(out / "exact_q.csv", ["q", "Fbar", "Fbar_d1", "Fbar_d2", "Qbar"],
              [q, eval_Fbar(q, params), eval_Fbar_deriv(q, 1, params), eval_Fbar_deriv(q, 2, params),
               eval_Qbar(q, params)])
    xg = log_grid(cfg.get("x_min", 1e-6), cfg.get("x_max", 1e4), cfg.get("x_nodes", 201))
    write_csv(out / "exact_x.csv", ["x", "fbar"], [xg.nodes, eval_fbar(xg.nodes, params)])
    F = fbar_profile(grid, rho)
    gammas = cfg.get("gammas", [f * rho for f in (-0.5, -0.25, 0.0, 0.25, 0.5)])
    table = []
    for g in gammas:
        try:
            closed = exact_moment(g, params)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        table.append({"gamma": g, "closed_form": closed, "quadrature": moments(F, g), "extension": is_extension(g)})
    summary = {
        "rho": rho,
        "m0": exact_moment(0.0, params),
        "moments": table,
        "small_x_coefficient": fbar_small_x_coefficient(params),
        "tail_coefficient": fbar_tail_coefficient(params),
        "qode_identity_residual": residual_Qode(F),
        "grid": {"q_min": grid.x_min, "q_max": grid.x_max, "q_nodes": grid.size},
    }
    write_json(out / "summary.json", summary)
    return EXIT_OK


def cmd_verify_kernel(cfg: dict, out: Path, args) -> int:
    alpha = cfg.get("alpha", 1.0 / 3.0)
    try:
        spec = power_law_kernel(alpha)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    threshold = KERNEL_THRESHOLD * (0.5 if args.strict else 1.0)
    pts = np.geomspace(0.1, 10.0, 5)
    rows = [(x, y, verify_laplace_identity(x, y, spec)) for x in pts for y in pts]
    rng = np.random.default_rng(args.seed)
    extra = 10.0 ** rng.uniform(-1.0, 1.0, size=(cfg.get("kernel_points", 5), 2))
    rows += [(x, y, verify_laplace_identity(x, y, spec)) for x, y in extra]
    xs, ys, res = (np.array(c) for c in zip(*rows))
    write_csv(out / "kernel_residuals.csv", ["x", "y", "residual"], [xs, ys, res])
    s = np.concatenate([np.geomspace(1e-3, 1e3, 50), 10.0 ** rng.uniform(-3.0, 3.0, 10)])
    phi_dev = float(np.max(np.abs(phi_plemelj(s, spec) - phi_explicit(s, alpha))))
    worst = float(np.max(np.abs(res)))
    passed = worst <= threshold
    write_json(out / "kernel_report.json", {
        "alpha": alpha, "max_residual": worst, "phi_max_deviation": phi_dev,
        "threshold": threshold, "passed": passed, "seed": args.seed,
    })
    if not passed:
        raise VerificationError(f"kernel identity residual {worst:.3g} above {threshold:g}")
    return EXIT_OK


def cmd_verify_inverse(cfg: dict, out: Path, args) -> int:
    rho = cfg.get("rho", 0.7)
    if not 0.0 < rho < 1.0:
        raise ConfigError(f"rho out of (0,1): {rho}")
    threshold = INVERSE_THRESHOLD * (0.5 if args.strict else 1.0)
    n = args.grid_nodes or cfg.get("q_nodes", 1000)
    grid = log_grid(cfg.get("q_min", 1e-12), cfg.get("q_max", 1e10), n)
    cases = admissible_examples(grid, rho)
    rng = np.random.default_rng(args.seed)
    c = rng.uniform(-1.0, 1.0, size=3)
    cases["random_combination"] = c[0] * cases["diff_exp"] + c[1] * cases["bump"] + c[2] * cases["mixed"]
    names, fwd, bwd, bnd = [], [], [], []
    for name, G in cases.items():
        scale = float(np.max(np.abs(G.values)))
        inv = apply_LLinv(G)
        names.append(name)
        fwd.append(float(np.max(np.abs((apply_LLinv(apply_LL(G)) - G).values))) / scale)
        bwd.append(float(np.max(np.abs((apply_LL(inv) - G).values))) / scale)
        bnd.append(abs(inv.value0 + G.value0 / rho))
    write_csv(out / "inverse_roundtrip.csv", ["case", "inv_after_LL", "LL_after_inv", "boundary_value"],
              [np.arange(len(names)), fwd, bwd, bnd])
    worst = max(max(fwd), max(bwd))
    passed = worst <= threshold and max(bnd) <= 1e-10
    write_json(out / "inverse_report.json", {
        "cases": names, "max_roundtrip": worst, "max_boundary_error": max(bnd), "threshold": threshold,
        "passed": passed, "seed": args.seed, "combination": list(c),
    })
    if not passed:
        raise VerificationError(f"round-trip error {worst:.3g} above {threshold:g}")
    return EXIT_OK


def _profile_csv(path: Path, F: LaplaceProfile) -> None:
    write_csv(path, ["q", "F", "F_d1", "F_d2", "Q"], [F.q, F.values, F.d1, F.d2, F.drop])


def _diagnostics(F: LaplaceProfile, cfg: SolverConfig) -> dict:
    spec = cfg.kernel()
    Fbar = fbar_profile(F.grid, cfg.rho)
    gammas = [f * cfg.rho for f in (-0.5, -0.25, 0.25, 0.5)] + [cfg.alpha]
    table = []
    for g in gammas:
        try:
            m = moments(F, g)
        except MomentDivergenceError:
            m = float("inf")
        table.append({"gamma": g, "moment": m, "extension": is_extension(g)})
    try:
        tail = tail_normalization_check(F)
    except FitInstabilityError:
        tail = float("nan")
    q = F.q
    Qbar = eval_Qbar(q, cfg.rho)
    out = {
        "moments": table,
        "kappa": kappa(F),
        "tail_normalization": tail,
        "tail_target": cfg.rho**2,
        "boundary_layer": boundary_layer_report(F, spec, cfg.epsilon).to_dict(),
        "apriori": {
            "max_Q_minus_Qbar": float(np.max(F.drop - Qbar)),
            "sup_q_power_Qprime": float(np.max(-(q ** (1.0 - cfg.rho)) * F.d1)),
            "Q_infinity": F.value0,
        },
    }
    out.update(distance_report(F, Fbar, cfg.mu, cfg.theta))
    return out


def _qode_threshold(args) -> float:
    return QODE_THRESHOLD * (0.5 if args.strict else 1.0)


def cmd_solve(cfg: dict, out: Path, args) -> int:
    scfg = _solver_config(cfg, args.grid_nodes)
    F, report = solve_profile(scfg)
    _profile_csv(out / "profile.csv", F)
    threshold = _qode_threshold(args)
    body = {"report": report.to_dict(), "diagnostics": _diagnostics(F, scfg), "qode_threshold": threshold}
    write_json(out / "report.json", body)
    if not report.converged:
        raise VerificationError("solver did not converge")
    if report.residual_Qode > threshold:
        raise VerificationError(f"Q-ODE residual {report.residual_Qode:.3g} above {threshold:g}")
    return EXIT_OK


def load_profile(path: Path, cfg: SolverConfig) -> LaplaceProfile:
    """Rebuild a profile from the CSV written by ``solve``."""
    header, data = read_csv(path)
    if header != ["q", "F", "F_d1", "F_d2", "Q"]:
        raise ConfigError(f"unexpected profile header {header}")
    q = data[:, 0]
    grid = log_grid(q[0], q[-1], q.size)
    if not np.allclose(grid.nodes, q, rtol=1e-12, atol=0):
        raise ConfigError("profile nodes are not log-uniform")
    value0 = float(np.median(data[:, 1] + data[:, 4]))
    return LaplaceProfile(grid, data[:, 1], data[:, 2], data[:, 3], value0, cfg.rho, data[:, 4])


def cmd_diagnose(cfg: dict, out: Path, args) -> int:
    if "profile" not in cfg:
        raise ConfigError("diagnose needs 'profile' (path to a profile CSV)")
    scfg = _solver_config(cfg, None)
    path = Path(cfg["profile"])
    if not path.is_absolute() and args.config is not None:
        path = Path(args.config).parent / path
    try:
        F = load_profile(path, scfg)
    except OSError as exc:
        raise ConfigError(f"cannot read profile: {exc}") from exc
    write_json(out / "diagnostics.json", _diagnostics(F, scfg))
    return EXIT_OK


def cmd_sweep(cfg: dict, out: Path, args) -> int:
    epsilons = cfg.get("epsilons", [0.05, 0.02, 0.01])
    configs = [_solver_config(cfg, args.grid_nodes, epsilon=e) for e in epsilons]
    reports: list[SolverReport] = []
    for c in configs:
        _, rep = solve_profile(c)
        reports.append(rep)
    cols = {
        "epsilon": [r.epsilon for r in reports],
        "iterations": [r.iterations for r in reports],
        "residual_selfsim": [r.residual_selfsim for r in reports],
        "residual_Qode": [r.residual_Qode for r in reports],
        "kappa": [r.kappa for r in reports],
        "norm_distance": [r.norm_distance for r in reports],
        "sup_distance": [r.sup_distance for r in reports],
        "max_ratio": [max(r.ratios) if r.ratios else 0.0 for r in reports],
    }
    write_csv(out / "sweep.csv", list(cols), list(cols.values()))
    order = np.argsort(-np.asarray(epsilons))

    def decreasing(values):
        v = np.asarray(values)[order]
        return bool(np.all(np.diff(v) < 0))

    trends = {
        "norm_distance_decreasing": decreasing(cols["norm_distance"]),
        "sup_distance_decreasing": decreasing(cols["sup_distance"]),
        "abs_kappa_decreasing": decreasing(np.abs(cols["kappa"])),
    }
    threshold = _qode_threshold(args)
    passed = all(trends.values()) and all(r.converged and r.residual_Qode <= threshold for r in reports)
    write_json(out / "sweep.json", {"reports": [r.to_dict() for r in reports], "trends": trends, "passed": passed})
    if not passed:
        raise VerificationError("sweep trends or residuals failed")
    return EXIT_OK


COMMANDS = {
    "exact": cmd_exact,
    "verify-kernel": cmd_verify_kernel,
    "verify-inverse": cmd_verify_inverse,
    "solve": cmd_solve,
    "diagnose": cmd_diagnose,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fatcoag", description="Fat-tailed self-similar coagulation profiles.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", default=None, help="JSON run configuration")
    p.add_argument("--out", default="fatcoag-out", help="output directory")
    p.add_argument("--grid-nodes", type=int, default=None, help="number of q nodes")
    p.add_argument("--seed", type=int, default=0, help="seed for sampled verification points")
    p.add_argument("--strict", action="store_true", help="halve verification thresholds")
    return p


def _fail(code: str, exit_code: int, msg: str) -> int:
    print(f"error {code}: {' '.join(str(msg).split())}", file=sys.stderr)
    return exit_code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.grid_nodes is not None and args.grid_nodes < 16:
            raise ConfigError("--grid-nodes must be at least 16")
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        return _fail("config-invalid", EXIT_CONFIG, exc)
    except NonContractionError as exc:
        return _fail("non-contraction", EXIT_NONCONTRACTION, exc)
    except VerificationError as exc:
        return _fail("verification-failed", EXIT_VERIFY, exc)
    except (QuadratureError, CoverageError, ArithmeticError) as exc:
        return _fail("numerical-error", EXIT_NUMERICAL, exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
