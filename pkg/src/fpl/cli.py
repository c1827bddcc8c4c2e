"""``fpl`` experiment runner.

    fpl table|compare|stability|datadep|ivp --config run.json [--out DIR] [--format csv|md|both]
    fpl eval --expr "cos(x/2)" --at 1.65895

Exit status: 0 success, 2 configuration error, 3 numeric or invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import analysis, datadep, ivp, stability
from .expr import CompiledExpression, EvaluationError, ExpressionError, parse_expression, evaluate
from .operators import OperatorError, ScalarOperator, from_expression, get_operator, oracle_fixed_point
from .schemes import (
    ControlSequence,
    ControlSequences,
    SchemeError,
    SchemeId,
    StopRule,
    constant,
    explicit,
    reciprocal,
    run,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

COMMANDS = ("table", "compare", "stability", "datadep", "ivp")


class ConfigError(ValueError):
    pass


class InvariantFailure(RuntimeError):
    """A run finished but a checked property does not hold; outputs are still written."""


# --- config parsing -------------------------------------------------------


def _number(cfg: dict, key: str, default: Any = None) -> float:
    value = cfg.get(key, default)
    if value is None:
        raise ConfigError(f"missing numeric field {key!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ConfigError(f"field {key!r} must be a finite number, got {value!r}")
    return float(value)


def _int(cfg: dict, key: str, default: Any = None) -> int:
    value = cfg.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"field {key!r} must be a positive integer, got {value!r}")
    return value


def parse_operator(spec: Any) -> ScalarOperator:
    if isinstance(spec, str):
        try:
            return get_operator(spec)
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None
    if isinstance(spec, dict) and "expr" in spec:
        lo, hi = _domain(spec)
        return from_expression(spec["expr"], lo, hi, spec.get("name"))
    if isinstance(spec, dict) and "name" in spec:
        # catalog operator, optionally restricted to a sub-domain
        op = parse_operator(spec["name"])
        if "domain" not in spec:
            return op
        return op.with_domain(*_domain(spec))
    raise ConfigError(f"operator must be a catalog name, {{'name', 'domain'}} or {{'expr', 'domain'}}, got {spec!r}")


def _domain(spec: dict) -> tuple[float, float]:
    domain = spec.get("domain")
    if not (isinstance(domain, list) and len(domain) == 2):
        raise ConfigError("operator 'domain' must be a two-element list")
    lo, hi = (_number({"v": v}, "v") for v in domain)
    return lo, hi


def _parse_sequence(spec: Any) -> ControlSequence:
    try:
        if isinstance(spec, (int, float)) and not isinstance(spec, bool):
            return constant(spec)
        if isinstance(spec, list):
            return explicit(spec)
        if isinstance(spec, dict) and "reciprocal" in spec:
            return reciprocal(spec["reciprocal"])
    except SchemeError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"control sequence must be a number, list or {{'reciprocal': k}}, got {spec!r}")


def parse_control(spec: Any) -> ControlSequences:
    if spec is None:
        spec = 0.5
    if not isinstance(spec, dict) or "reciprocal" in spec:
        seq = _parse_sequence(spec)
        return ControlSequences(a=seq, c=seq, d=seq)
    unknown = set(spec) - {"a", "c", "d"}
    if unknown:
        raise ConfigError(f"unknown control sequences {sorted(unknown)}")
    return ControlSequences(**{k: _parse_sequence(v) for k, v in spec.items()})


def _scheme(name: Any) -> SchemeId:
    try:
        return SchemeId(name)
    except ValueError:
        raise ConfigError(f"unknown scheme {name!r}; have {[s.value for s in SchemeId]}") from None


def _perturbation(spec: dict) -> stability.PerturbationModel:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"perturbation needs a 'kind', got {spec!r}")
    kind = spec["kind"]
    default_sign = "always_positive" if kind == "nonsummable_constant" else "alternating"
    return stability.PerturbationModel(
        kind=kind,
        c=float(spec.get("c", 0.0)),
        p=float(spec.get("p", 2.0)),
        values=tuple(spec.get("values", ())),
        sign_rule=spec.get("sign", default_sign),
    )


# --- report formatting ----------------------------------------------------


def fmt(value: Any) -> str:
    """Shortest round-trip text for floats."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def to_csv(header: list[str], rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def to_markdown(header: list[str], rows: list[list[Any]], digits: int = 6) -> str:
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.{digits}f}" if abs(v) >= 1e-4 or v == 0 else f"{float(v):.3e}"
        return fmt(v)

    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(cell(v) for v in row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


class Report:
    def __init__(self):
        self.tables: list[tuple[str, list[str], list[list[Any]]]] = []

    def add(self, name: str, header: list[str], rows: list[list[Any]]) -> None:
        self.tables.append((name, header, rows))

    def files(self, fmt_choice: str) -> dict[str, str]:
        out = {}
        for name, header, rows in self.tables:
            if fmt_choice in ("csv", "both"):
                out[f"{name}.csv"] = to_csv(header, rows)
            if fmt_choice in ("md", "both"):
                out[f"{name}.md"] = to_markdown(header, rows)
        return out


# --- commands -------------------------------------------------------------


def cmd_table(cfg: dict) -> Report:
    op = parse_operator(cfg.get("operator", "cos_half"))
    schemes = [_scheme(s) for s in cfg.get("schemes", [s.value for s in SchemeId])]
    s0 = _number(cfg, "s0")
    iterations = _int(cfg, "iterations", 9)
    ctrl = parse_control(cfg.get("control"))
    stop = StopRule(max_iters=iterations, step_tol=0.0)
    columns = [run(s, op, s0, ctrl, stop).iterates for s in schemes]
    rows = [[m] + [col[m] for col in columns] for m in range(iterations + 1)]
    report = Report()
    report.add("table", ["iteration"] + [s.value for s in schemes], rows)
    return report


def cmd_compare(cfg: dict) -> Report:
    op = parse_operator(cfg.get("operator", "cos_half"))
    reference = _scheme(cfg.get("reference", "at"))
    against = [_scheme(s) for s in cfg.get("against", [s.value for s in SchemeId if s is not SchemeId.AT])]
    s0 = _number(cfg, "s0")
    iterations = _int(cfg, "iterations", 60)
    ctrl = parse_control(cfg.get("control"))
    s_star = oracle_fixed_point(op, 1e-15).value
    stop = StopRule(max_iters=iterations, step_tol=0.0)
    ref_trace = run(reference, op, s0, ctrl, stop)
    ratio_rows, verdict_rows = [], []
    for other in against:
        cmp = analysis.compare_rates(ref_trace, run(other, op, s0, ctrl, stop), s_star)
        ratio_rows += [[other.value, m, r] for m, r in enumerate(cmp.ratios)]
        verdict_rows.append([reference.value, other.value, cmp.verdict.value, len(cmp.ratios), s_star])
    report = Report()
    report.add("compare_ratios", ["against", "m", "ratio"], ratio_rows)
    report.add("compare_verdicts", ["reference", "against", "verdict", "valid_ratios", "s_star"], verdict_rows)
    return report


def cmd_stability(cfg: dict) -> Report:
    op = parse_operator(cfg.get("operator", "cos_half"))
    scheme = _scheme(cfg.get("scheme", "at"))
    r0 = _number(cfg, "r0")
    m_max = _int(cfg, "m_max", 200)
    ctrl = parse_control(cfg.get("control"))
    models = [_perturbation(p) for p in cfg.get("perturbations", [])]
    if not models:
        raise ConfigError("stability needs a non-empty 'perturbations' list")
    reports = stability.stability_sweep(scheme, op, models, r0, ctrl, m_max)
    detail, summary = [], []
    for rep in reports:
        label = rep.model.label
        gaps = rep.gaps
        for m in range(m_max):
            detail.append([label, m, rep.gamma[m], rep.gamma_partial_sums[m], rep.r[m + 1], gaps[m + 1]])
        summary.append(
            [label, rep.final_gap, rep.converged, rep.classified_summable, rep.tail_min_gap, rep.s_star]
        )
    report = Report()
    report.add("stability", ["model", "m", "gamma", "gamma_partial_sum", "r", "gap"], detail)
    report.add(
        "stability_summary",
        ["model", "final_gap", "converged", "classified_summable", "tail_min_gap", "s_star"],
        summary,
    )
    return report


def cmd_datadep(cfg: dict) -> Report:
    R = parse_operator(cfg.get("R", {"name": "cos_half", "domain": [0, 1]}))
    F = parse_operator(cfg.get("F", "poly_approx"))
    zeta = _number(cfg, "zeta", 0.5)
    L = _number(cfg, "L", 0.0)
    epsilon = cfg.get("epsilon")
    grid = _int(cfg, "grid_points", datadep.EPSILON_GRID_POINTS)
    pair = datadep.make_pair(R, F, zeta, L, epsilon=epsilon, epsilon_grid_points=grid)
    ctrl, v0 = None, None
    if "v0" in cfg:
        v0 = _number(cfg, "v0")
        ctrl = parse_control(cfg.get("control"))
    stop = StopRule(max_iters=_int(cfg, "max_iters", 100), step_tol=_number(cfg, "step_tol", 1e-12))
    res = datadep.verify_bound(pair, ctrl, stop, v0)
    report = Report()
    report.add(
        "datadep",
        ["epsilon", "zeta", "L", "bound", "classical_bound", "s_star", "t_star", "distance", "holds"],
        [[res.epsilon, res.zeta, res.L, res.bound, res.classical, res.s_star, res.t_star, res.distance, res.holds]],
    )
    if res.trace is not None:
        report.add("datadep_trace", ["m", "v"], [[m, v] for m, v in enumerate(res.trace.iterates)])
    if not res.holds:
        raise InvariantFailure(report, f"distance {res.distance} exceeds bound {res.bound}")
    return report


def _ivp_problem(cfg: dict):
    spec = cfg.get("problem", "decay")
    if isinstance(spec, str):
        if spec not in ivp.PROBLEMS:
            raise ConfigError(f"unknown IVP problem {spec!r}; have {sorted(ivp.PROBLEMS)}")
        make, exact = ivp.PROBLEMS[spec]
        return (make(_number(cfg, "b")) if "b" in cfg else make()), exact
    if not isinstance(spec, dict):
        raise ConfigError("'problem' must be a catalog name or an object")
    order = _int(spec, "order")
    names = ["s"] + [f"y{i}" for i in range(order)]
    try:
        rhs = CompiledExpression(spec["rhs"], names)
        kernel = CompiledExpression(spec.get("kernel", "1"), ("t", "s"))
        exact = CompiledExpression(spec["exact"], ("t",)) if "exact" in spec else None
        prob = ivp.IVPProblem(
            order=order,
            rhs=rhs,
            lipschitz=tuple(spec["lipschitz"]),
            kernel=kernel,
            initial_values=tuple(spec["initial"]),
            interval=tuple(spec["interval"]),
            name=spec.get("name", "ivp"),
        )
    except KeyError as exc:
        raise ConfigError(f"IVP problem missing field {exc.args[0]!r}") from None
    except ivp.IVPError as exc:
        raise ConfigError(str(exc)) from None
    return prob, exact


def cmd_ivp(cfg: dict) -> Report:
    prob, exact = _ivp_problem(cfg)
    n_nodes = _int(cfg, "n_nodes", 2001)
    ctrl = parse_control(cfg.get("control"))
    stop = StopRule(max_iters=_int(cfg, "max_iters", 200), step_tol=_number(cfg, "step_tol", 1e-10))
    sol = ivp.solve_via_at(prob, ctrl, stop, n_nodes)
    t = sol.solution.nodes
    y = sol.solution.values
    header = ["t", "y"]
    if exact is not None:
        ref = np.broadcast_to(exact(t), t.shape)
        rows = [[t[i], y[i], ref[i], abs(y[i] - ref[i])] for i in range(len(t))]
        header += ["exact", "error"]
        sup_error = float(np.max(np.abs(y - ref)))
    else:
        rows = [[t[i], y[i]] for i in range(len(t))]
        sup_error = None
    report = Report()
    report.add("ivp", header, rows)
    summary = [prob.name, sol.alpha, sol.budget.M, sol.iterations, sol.step_norms[-1]]
    report.add(
        "ivp_summary",
        ["problem", "alpha", "M", "iterations", "last_step_norm"] + (["sup_error"] if exact else []),
        [summary + ([sup_error] if exact else [])],
    )
    return report


HANDLERS = {
    "table": cmd_table,
    "compare": cmd_compare,
    "stability": cmd_stability,
    "datadep": cmd_datadep,
    "ivp": cmd_ivp,
}


def load_config(path: str, command: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("command", command) != command:
        raise ConfigError(f"config is for {cfg['command']!r}, not {command!r}")
    return cfg


def write_files(out_dir: Path, files: dict[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        with open(out_dir / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def run_command(command: str, config_path: str, out_dir: str, fmt_choice: str) -> int:
    try:
        cfg = load_config(config_path, command)
        report = HANDLERS[command](cfg)
    except (ConfigError, ExpressionError) as exc:
        print(f"fpl {command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantFailure as exc:
        report, message = exc.args
        write_files(Path(out_dir), report.files(fmt_choice))
        print(f"fpl {command}: invariant failed: {message}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SchemeError, OperatorError, EvaluationError, ivp.IVPError, ArithmeticError) as exc:
        print(f"fpl {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError) as exc:
        print(f"fpl {command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_files(Path(out_dir), report.files(fmt_choice))
    return EXIT_OK


def cmd_eval(expr: str, at: float) -> int:
    try:
        value = evaluate(parse_expression(expr), {"x": at})
    except ExpressionError as exc:
        print(f"fpl eval: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EvaluationError as exc:
        print(f"fpl eval: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(repr(float(value)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fpl", description="Fixed-point iteration laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=".")
        p.add_argument("--format", choices=("csv", "md", "both"), default="both")
        p.add_argument("--seedless", action="store_true", help="accepted for scripts; runs never use an RNG")
    p = sub.add_parser("eval")
    p.add_argument("--expr", required=True)
    p.add_argument("--at", required=True, type=float)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "eval":
        return cmd_eval(args.expr, args.at)
    return run_command(args.command, args.config, args.out, args.format)


if __name__ == "__main__":
    sys.exit(main())
