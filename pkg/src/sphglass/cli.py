"""Config-driven command line interface.

Subcommands: ``evaluate``, ``minimize``, ``verify-identities``,
``cascade-check``, ``mc-estimate``, ``sweep``.  Every run loads one JSON
config describing the model (n, mixture, Q, h), task parameters, and a seed;
the report is JSON (or CSV for tabular sweeps) with the timestamp isolated in
a header so rerunning with the same seed and worker count reproduces the
body byte for byte.

Exit status: 0 on success, 2 when the constraint is degenerate and the
infimum diverges (the certificate is in the report), 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np

from sphglass import cascade as cascade_mod
from sphglass import montecarlo as mc_mod
from sphglass.functional import InvalidPath, NotInL, closed_form_Y0, evaluate, theta_term
from sphglass.geometry import ConstraintMatrix, DiscretePath, validate_path
from sphglass.mixture import MixtureSpec
from sphglass.optimizer import PathSearchConfig, minimize_over_paths
from sphglass.reporting import make_report, render_report, to_json
from sphglass import verify as verify_mod

__all__ = ["ConfigError", "RunConfig", "load_config", "serialize_config", "run", "main"]

TASKS = ("evaluate", "minimize", "verify-identities", "cascade-check", "mc-estimate", "sweep")
STOCHASTIC_TASKS = ("minimize", "verify-identities", "cascade-check", "mc-estimate", "sweep")


class ConfigError(ValueError):
    """Semantic config problem; the message names the offending field.

    ``details`` optionally carries a machine-readable payload (for example a
    path validation report) that the CLI renders as structured JSON.
    """

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details


@dataclass
class RunConfig:
    n: int
    mixture: MixtureSpec
    q: ConstraintMatrix
    h: np.ndarray
    task: str | None = None
    seed: int | None = None
    workers: int = 1
    out: str | None = None
    fmt: str = "json"
    path: DiscretePath | None = None
    lam: np.ndarray | None = None
    search: PathSearchConfig = dataclass_field(default_factory=PathSearchConfig)
    budgets: dict = dataclass_field(default_factory=dict)
    sweep: dict = dataclass_field(default_factory=dict)


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def _parse_matrix(raw, n: int, name: str) -> np.ndarray:
    mat = np.asarray(raw, dtype=float)
    _require(mat.shape == (n, n), f'"{name}" must be an {n}x{n} matrix, got shape {mat.shape}')
    _require(bool(np.all(np.isfinite(mat))), f'"{name}" contains non-finite entries')
    _require(bool(np.allclose(mat, mat.T, atol=0.0)), f'"{name}" must be symmetric')
    return (mat + mat.T) / 2.0


def load_config(text: str) -> RunConfig:
    """Parse and validate a config document.

    JSON syntax errors surface with line/column; semantic errors name the
    violated field and invariant.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config parse error at line {err.lineno}, column {err.colno}: {err.msg}") from None
    _require(isinstance(raw, dict), "config must be a JSON object")

    _require("n" in raw, 'missing required field "n"')
    n = raw["n"]
    _require(isinstance(n, int) and n >= 1, '"n" must be a positive integer')

    mixture_raw = raw.get("mixture", {})
    _require(isinstance(mixture_raw, dict), '"mixture" must map degree strings to coefficient arrays')
    try:
        mixture = MixtureSpec.from_json_terms(n, mixture_raw)
    except ValueError as err:
        raise ConfigError(f'"mixture" invalid: {err}') from None

    _require("Q" in raw, 'missing required field "Q"')
    qmat = _parse_matrix(raw["Q"], n, "Q")
    _require(bool(np.array_equal(np.diag(qmat), np.ones(n))), '"Q" constraint diagonal must equal 1')
    try:
        q = ConstraintMatrix(qmat)
    except ValueError as err:
        raise ConfigError(f'"Q" invalid: {err}') from None

    h = np.asarray(raw.get("h", np.zeros(n)), dtype=float)
    _require(h.shape == (n,), f'"h" must be a length-{n} vector')
    _require(bool(np.all(np.isfinite(h))), '"h" contains non-finite entries')

    task = raw.get("task")
    if task is not None:
        _require(task in TASKS, f'"task" must be one of {TASKS}, got {task!r}')

    seed = raw.get("seed")
    if seed is not None:
        _require(isinstance(seed, int) and 0 <= seed < 2**64, '"seed" must be a u64 integer')

    workers = raw.get("workers", 1)
    _require(isinstance(workers, int) and workers >= 1, '"workers" must be a positive integer')

    fmt = raw.get("format", "json")
    _require(fmt in ("json", "csv"), '"format" must be "json" or "csv"')

    path = None
    if "path" in raw:
        praw = raw["path"]
        _require(isinstance(praw, dict) and "xs" in praw and "Qs" in praw, '"path" needs "xs" and "Qs"')
        xs = np.asarray(praw["xs"], dtype=float)
        qs = np.asarray(praw["Qs"], dtype=float)
        try:
            path = DiscretePath(xs=xs, qs=qs)
        except ValueError as err:
            raise ConfigError(f'"path" invalid: {err}') from None
        report = validate_path(path, q)
        if not report.ok:
            first = report.violations[0]
            raise ConfigError(
                f'"path" violates invariant {first.invariant!r} at index {first.index} '
                f"(magnitude {first.magnitude:.3e})",
                details=report.to_dict(),
            )

    lam = None
    if "lambda" in raw:
        lam = _parse_matrix(raw["lambda"], n, "lambda")

    search_raw = raw.get("search", {})
    _require(isinstance(search_raw, dict), '"search" must be an object')
    try:
        search = PathSearchConfig(**search_raw)
    except (TypeError, ValueError) as err:
        raise ConfigError(f'"search" invalid: {err}') from None

    budgets = raw.get("budgets", {})
    _require(isinstance(budgets, dict), '"budgets" must be an object')
    sweep = raw.get("sweep", {})
    _require(isinstance(sweep, dict), '"sweep" must be an object')

    return RunConfig(
        n=n,
        mixture=mixture,
        q=q,
        h=h,
        task=task,
        seed=seed,
        workers=workers,
        out=raw.get("output"),
        fmt=fmt,
        path=path,
        lam=lam,
        search=search,
        budgets=budgets,
        sweep=sweep,
    )


def serialize_config(config: RunConfig) -> dict:
    out = {
        "n": config.n,
        "mixture": config.mixture.json_terms(),
        "Q": config.q.matrix.tolist(),
        "h": config.h.tolist(),
        "workers": config.workers,
        "format": config.fmt,
        "search": {
            "max_levels": config.search.max_levels,
            "x_grid_resolution": config.search.x_grid_resolution,
            "q_parameterization": config.search.q_parameterization,
            "restarts": config.search.restarts,
            "tolerance_value": config.search.tolerance_value,
            "max_iterations": config.search.max_iterations,
            "inner_max_iterations": config.search.inner_max_iterations,
            "inner_gradient_tolerance": config.search.inner_gradient_tolerance,
        },
    }
    if config.task is not None:
        out["task"] = config.task
    if config.seed is not None:
        out["seed"] = config.seed
    if config.out is not None:
        out["output"] = config.out
    if config.path is not None:
        out["path"] = {"xs": config.path.xs.tolist(), "Qs": config.path.qs.tolist()}
    if config.lam is not None:
        out["lambda"] = config.lam.tolist()
    if config.budgets:
        out["budgets"] = config.budgets
    if config.sweep:
        out["sweep"] = config.sweep
    return out


# ---------------------------------------------------------------------------
# task runners


def _run_evaluate(config: RunConfig) -> tuple[int, dict]:
    _require(config.path is not None, 'task "evaluate" requires a "path"')
    _require(config.lam is not None, 'task "evaluate" requires a "lambda"')
    breakdown = evaluate(config.lam, config.path, config.q, config.h, config.mixture)
    return 0, breakdown.to_dict()


def _run_minimize(config: RunConfig) -> tuple[int, dict]:
    report = minimize_over_paths(
        config.q, config.h, config.mixture, config.search, seed=config.seed or 0
    )
    return (2 if report.degenerate else 0), report.to_dict()


def _run_verify(config: RunConfig) -> tuple[int, dict]:
    seed = config.seed or 0
    budgets = config.budgets
    checks = verify_mod.identity_suite(seed, count=int(budgets.get("identity_instances", 100)))
    checks += verify_mod.jacobi_suite(seed, count=int(budgets.get("jacobi_instances", 50)))
    mc_count = int(budgets.get("mc_instances", 0))
    if mc_count:
        checks += verify_mod.mc_identity_check(
            seed, count=mc_count, samples=int(budgets.get("mc_samples", 1_000_000))
        )
    passed = all(c["pass"] for c in checks)
    body = {
        "checks": checks,
        "total": len(checks),
        "failures": sum(1 for c in checks if not c["pass"]),
        "passed": passed,
    }
    return (0 if passed else 1), body


def _run_cascade_check(config: RunConfig) -> tuple[int, dict]:
    _require(config.path is not None, 'task "cascade-check" requires a "path"')
    _require(config.lam is not None, 'task "cascade-check" requires a "lambda"')
    seed = config.seed or 0
    budgets = config.budgets
    samples = budgets.get("samples_per_level", [2000] * config.path.r)
    cspec = cascade_mod.CascadeSpec(
        path=config.path, spec=config.mixture, lam=config.lam, h=config.h
    )
    target = closed_form_Y0(config.lam, config.path, config.h, config.mixture)
    result = cascade_mod.nested_recursion_mc(cspec, samples, seed)
    gap = abs(result.estimate - target)
    recursion_pass = bool(gap <= 3.0 * result.stderr or gap <= 1e-12)
    tt = theta_term(config.path, config.mixture)
    tc = cascade_mod.theta_cascade_value(config.path, config.mixture)
    theta_pass = bool(abs(tt - tc) <= 1e-12 * max(1.0, abs(tt)))
    body = {
        "closed_form_target": target,
        "nested_mc": result.to_dict(),
        "recursion_abs_gap": gap,
        "recursion_pass": recursion_pass,
        "theta_term": tt,
        "theta_cascade_value": tc,
        "theta_pass": theta_pass,
        "passed": recursion_pass and theta_pass,
    }
    return (0 if body["passed"] else 1), body


def _run_mc_estimate(config: RunConfig) -> tuple[int, dict]:
    budgets = config.budgets
    result = mc_mod.estimate_free_energy(
        config.q,
        int(budgets.get("N", 32)),
        float(budgets.get("epsilon", 0.01)),
        config.mixture,
        config.h,
        int(budgets.get("disorder_reps", 100)),
        int(budgets.get("config_samples", 2000)),
        config.seed or 0,
        workers=config.workers,
    )
    return 0, result.to_dict()


def _run_sweep(config: RunConfig) -> tuple[int, dict]:
    sweep = config.sweep
    _require(bool(sweep), 'task "sweep" requires a "sweep" object')
    parameter = sweep.get("parameter")
    values = sweep.get("values")
    _require(parameter in ("beta_scale", "q12"), '"sweep.parameter" must be "beta_scale" or "q12"')
    _require(isinstance(values, list) and values, '"sweep.values" must be a non-empty array')
    rows = []
    for i, value in enumerate(values):
        value = float(value)
        if parameter == "beta_scale":
            terms = {p: value * beta for p, beta in config.mixture.terms.items()}
            spec_i = MixtureSpec(n=config.n, terms=terms)
            q_i = config.q
        else:
            _require(config.n == 2, 'sweep over "q12" requires n = 2')
            spec_i = config.mixture
            q_i = ConstraintMatrix(np.array([[1.0, value], [value, 1.0]]))
        report = minimize_over_paths(
            q_i, config.h, spec_i, config.search, seed=(config.seed or 0) + i
        )
        rows.append(
            {
                "parameter": parameter,
                "value": value,
                "best_value": report.best_value,
                "degenerate": report.degenerate,
            }
        )
    return 0, {"rows": rows, "columns": ["parameter", "value", "best_value", "degenerate"]}


_RUNNERS = {
    "evaluate": _run_evaluate,
    "minimize": _run_minimize,
    "verify-identities": _run_verify,
    "cascade-check": _run_cascade_check,
    "mc-estimate": _run_mc_estimate,
    "sweep": _run_sweep,
}


def run(config: RunConfig) -> tuple[int, dict]:
    """Dispatch to the configured task; returns (exit status, report)."""
    _require(config.task in TASKS, f'"task" must be set to one of {TASKS}')
    if config.task in STOCHASTIC_TASKS:
        _require(config.seed is not None, f'task "{config.task}" requires a "seed"')
    code, body = _RUNNERS[config.task](config)
    report = make_report(config.task, config.seed, config.workers, body)
    return code, report


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sphglass",
        description="Constrained free energy of coupled spherical mixed p-spin glasses",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in TASKS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--workers", type=int, default=None, help="worker count for parallel tasks")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--format", dest="fmt", choices=["json", "csv"], default=None)
    args = parser.parse_args(argv)

    try:
        config = load_config(Path(args.config).read_text())
        if config.task is not None and config.task != args.command:
            raise ConfigError(
                f'config task {config.task!r} conflicts with subcommand {args.command!r}'
            )
        config.task = args.command
        if args.seed is not None:
            config.seed = args.seed
        if args.workers is not None:
            config.workers = args.workers
        if args.out is not None:
            config.out = args.out
        if args.fmt is not None:
            config.fmt = args.fmt
        code, report = run(config)
    except ConfigError as err:
        payload = {"error": {"kind": "config", "message": str(err)}}
        if err.details is not None:
            payload["error"]["details"] = err.details
        print(to_json(payload), file=sys.stderr)
        return 1
    except (NotInL, InvalidPath) as err:
        print(to_json({"error": {"kind": type(err).__name__, "message": str(err)}}), file=sys.stderr)
        return 1
    except (ValueError, np.linalg.LinAlgError) as err:
        print(to_json({"error": {"kind": "value", "message": str(err)}}), file=sys.stderr)
        return 1

    columns = report["body"].get("columns") if isinstance(report["body"], dict) else None
    if config.fmt == "csv" and columns:
        text = render_report({"header": report["header"], "body": report["body"]["rows"]}, "csv", columns=columns)
    else:
        text = render_report(report, config.fmt)
    if config.out:
        Path(config.out).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
