"""
Command-line interface: ``mow <subcommand> ...``.

Exit codes: 0 on success (or all relations passing), 1 when a verification
fails, 2 for usage or input errors. Reports go to standard output, as JSON with
``--json`` and as aligned text otherwise; diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, TextIO

import numpy as np

from .exceptions import ErrorCode, ErrorHandler, WorkbenchException, WorkbenchSystemError
from .expr_parser import ExpressionParser, render
from .fock_numeric import (
    BlockState,
    block_generator_matrix,
    build_grid,
    commutant_dimension,
    evolve,
    nested_commutator_rank,
    triplet_operators,
)
from .mass_lab import MassLab, kappa_spectrum, von_neumann_generator
from .models.mass_models import MassFormulaKind, QuantumNumbers, as_fraction
from .models.workbench_config import WorkbenchConfig
from .relation_suite import RelationId, RelationSuite
from .spectral_measure import load_measure, make_measure, moment, sample, support
from .utils.config_utils import create_default_config, get_default_config_path, load_runtime_config
from .utils.logging_utils import close_logging, get_logger, log_duration, log_file_path, setup_logging
from .wick_engine import anticommutator, commutator, normal_order

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

SIGNIFICANT_DIGITS = 12
CONSERVATION_TOLERANCE = 1e-12
SPECTRUM_TOLERANCE = 1e-9

SUITES: Dict[str, List[RelationId]] = {
    "u": [RelationId.U_CONTINUUM],
    "sp2n": [RelationId.SP_19, RelationId.SP_20, RelationId.SP_21, RelationId.SP_22, RelationId.SP_23, RelationId.SP_24],
    "deriv": [RelationId.DERIV_26, RelationId.DERIV_27, RelationId.DERIV_28, RelationId.DERIV_29, RelationId.DERIV_30],
    "osc": [RelationId.OSC_10_BLOCK],
    "jacobi": [RelationId.JACOBI],
    "poincare": [RelationId.POINCARE],
    "higher": [RelationId.HIGHER_PRODUCTS],
}

logger = get_logger("cli")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="Emit the report as JSON.")
    common.add_argument("--dim", type=int, choices=[1, 2, 3], help="Momentum dimension (default 3 symbolic, 1 numeric).")
    common.add_argument("-c", "--config", default="", help=f"YAML or JSON configuration (default {get_default_config_path()}).")
    common.add_argument("--log-level", default=None, help="Log verbosity (DEBUG, INFO, WARNING, ERROR).")
    common.add_argument("--log-file", action="store_true", help="Also write logs to mow.log in the configured logs directory.")
    return common


def build_parser() -> argparse.ArgumentParser:
    """
    Build the argument parser with one subparser per capability.
    """
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="mow",
        description="Symbolic and numeric workbench for mass operators and continuum Lie algebras.",
    )
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    normal = commands.add_parser("no", parents=[common], help="Normal-order an expression.")
    normal.add_argument("expr")

    for name, text in (("comm", "Commutator"), ("anti", "Anticommutator")):
        sub = commands.add_parser(name, parents=[common], help=f"{text} of two expressions, normal ordered.")
        sub.add_argument("first")
        sub.add_argument("second")

    verify = commands.add_parser("verify", parents=[common], help="Run a relation suite.")
    verify.add_argument("--suite", required=True, choices=sorted(SUITES))
    verify.add_argument("--n", type=int, help="Jacobi sample count or higher-product order.")
    verify.add_argument("--seed", type=int, help="Seed for sampled suites.")

    triplet = commands.add_parser("triplet", parents=[common], help="Triplet construction: spectrum, commutant, nested ranks.")
    triplet.add_argument("--masses", required=True, help="Comma-separated masses.")
    triplet.add_argument("--grid", type=int, help="Grid points per axis.")
    triplet.add_argument("--profile-sigma", type=float, help="Width of the coupling profile F.")
    triplet.add_argument("--depth", type=int, default=4, help="Nested commutator depth.")

    evolve_parser = commands.add_parser("evolve", parents=[common], help="Free evolution of a block state.")
    evolve_parser.add_argument("--masses", required=True)
    evolve_parser.add_argument("--t", type=float, required=True)
    evolve_parser.add_argument("--state", required=True, help="State JSON (path or inline).")
    evolve_parser.add_argument("--doubled", action="store_true", help="Use the sign-of-energy labels.")
    evolve_parser.add_argument("--output", help="Write the evolved state JSON to this path.")

    fit = commands.add_parser("fit", parents=[common], help="Least-squares fit of a mass formula.")
    fit.add_argument("--csv", required=True)
    fit.add_argument("--formula", required=True, choices=[kind.value for kind in MassFormulaKind])
    fit.add_argument("--multiplet", help="Restrict the fit to one multiplet tag.")

    solve = commands.add_parser("solve-triplet", parents=[common], help="Exact triplet coefficients.")
    solve.add_argument("--masses", required=True, help="Three comma-separated masses.")
    solve.add_argument("--qnums", required=True, help="Three comma-separated Y:J (or S:Y:J) groups, e.g. 1:1/2,0:1,-1:1/2.")
    solve.add_argument("--kind", default=MassFormulaKind.TRIPLET_LINEAR.value,
                       choices=[MassFormulaKind.TRIPLET_LINEAR.value, MassFormulaKind.TRIPLET_SPIN.value])

    vn = commands.add_parser("vn", parents=[common], help="Single generator of commuting diagonal operators.")
    vn.add_argument("--ops", required=True, help="JSON list of diagonals or diagonal matrices (path or inline).")

    kappa = commands.add_parser("kappa", parents=[common], help="Kappa spectrum from masses and eigenvalues.")
    kappa.add_argument("--masses", required=True)
    kappa.add_argument("--lambdas", required=True)

    smear = commands.add_parser("smear", parents=[common], help="Moment of a mass measure.")
    smear.add_argument("--measure", required=True, help="Measure JSON (path or inline).")
    smear.add_argument("--moment", type=int, required=True)
    smear.add_argument("--of", choices=["M", "M2"], default="M")

    sampler = commands.add_parser("sample", parents=[common], help="Sample masses from a measure.")
    sampler.add_argument("--measure", required=True)
    sampler.add_argument("--seed", type=int, required=True)
    sampler.add_argument("--count", type=int, required=True)

    config = commands.add_parser("config", parents=[common], help="Configuration helpers.")
    config.add_argument("--write-template", required=True, help="Write a default configuration file to this path.")
    return parser


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def stable_value(value: Any) -> Any:
    """Convert a report to JSON-ready values with floats at a fixed precision."""
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else str(value)
    if isinstance(value, (float, np.floating)):
        rounded = float(f"{float(value):.{SIGNIFICANT_DIGITS}g}")
        return 0.0 if rounded == 0 else rounded
    if isinstance(value, (complex, np.complexfloating)):
        return [stable_value(value.real), stable_value(value.imag)]
    if isinstance(value, np.ndarray):
        return [stable_value(item) for item in value.tolist()]
    if isinstance(value, dict):
        return {str(key): stable_value(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [stable_value(item) for item in value]
    return str(value)


def format_report(report: Dict[str, Any], as_json: bool) -> str:
    data = stable_value(report)
    if as_json:
        return json.dumps(data, indent=2, sort_keys=False, ensure_ascii=False)
    return "\n".join(_text_lines(data))


def _text_lines(data: Any, indent: int = 0) -> List[str]:
    pad = " " * indent
    if isinstance(data, dict):
        width = max((len(key) for key in data), default=0)
        lines = []
        for key, value in data.items():
            if isinstance(value, dict) or (isinstance(value, list) and value and isinstance(value[0], dict)):
                lines.append(f"{pad}{key}:")
                lines.extend(_text_lines(value, indent + 2))
            else:
                lines.append(f"{pad}{key.ljust(width)}  {_text_scalar(value)}")
        return lines
    if isinstance(data, list):
        lines = []
        for item in data:
            lines.extend(_text_lines(item, indent) if isinstance(item, dict) else [f"{pad}{_text_scalar(item)}"])
            if isinstance(item, dict):
                lines.append("")
        return lines[:-1] if lines and lines[-1] == "" else lines
    return [f"{pad}{_text_scalar(data)}"]


def _text_scalar(value: Any) -> str:
    if isinstance(value, list):
        return ", ".join(_text_scalar(item) for item in value)
    if value is None or value == "":
        return "-"
    return str(value)


# ---------------------------------------------------------------------------
# Argument helpers
# ---------------------------------------------------------------------------

def _numbers(text: str) -> List[float]:
    try:
        return [float(as_fraction(item)) for item in text.split(",") if item.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"invalid number list '{text}'") from exc


def _exact_numbers(text: str) -> List[Fraction]:
    try:
        return [as_fraction(item) for item in text.split(",") if item.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"invalid number list '{text}'") from exc


def _quantum_numbers(text: str, kind: MassFormulaKind) -> List[QuantumNumbers]:
    names = ("S", "Y", "J") if kind == MassFormulaKind.TRIPLET_SPIN else ("Y", "J")
    result = []
    for group in text.split(","):
        parts = group.strip().split(":")
        if len(parts) != len(names):
            raise argparse.ArgumentTypeError(f"quantum-number group '{group}' needs {':'.join(names)}")
        try:
            result.append(QuantumNumbers(**dict(zip(names, (as_fraction(part) for part in parts)))))
        except (ValueError, ZeroDivisionError) as exc:
            raise argparse.ArgumentTypeError(f"invalid quantum numbers '{group}': {exc}") from exc
    return result


def _is_file(value: str) -> bool:
    try:
        return Path(value).is_file()
    except OSError:
        # Inline documents can exceed the file-name length limit.
        return False


def _read_json_argument(value: str) -> Any:
    """A path to a JSON file or an inline JSON document."""
    try:
        if _is_file(value):
            return json.loads(Path(value).read_text(encoding="utf-8"))
        return json.loads(value)
    except (OSError, json.JSONDecodeError) as exc:
        raise argparse.ArgumentTypeError(f"cannot read JSON from '{value}': {exc}") from exc


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _symbolic_config(config: WorkbenchConfig, dim: Optional[int]) -> WorkbenchConfig:
    return config.update(momentum_dimension=dim) if dim else config


def _numeric_config(config: WorkbenchConfig, dim: Optional[int], grid: Optional[int] = None) -> WorkbenchConfig:
    updates: Dict[str, Any] = {"numeric_dimension": dim or 1}
    if grid:
        updates["grid_points"] = grid
    return config.update(**updates)


def _cmd_normal_order(args, config: WorkbenchConfig) -> Dict[str, Any]:
    parser = ExpressionParser.from_config(_symbolic_config(config, args.dim))
    result = normal_order(parser.parse(args.expr))
    return {"input": args.expr, "result": render(result), "terms": len(result)}


def _cmd_bracket(args, config: WorkbenchConfig) -> Dict[str, Any]:
    parser = ExpressionParser.from_config(_symbolic_config(config, args.dim))
    operation = commutator if args.command == "comm" else anticommutator
    result = operation(parser.parse(args.first), parser.parse(args.second))
    return {"first": args.first, "second": args.second, "result": render(result), "terms": len(result)}


def _cmd_verify(args, config: WorkbenchConfig) -> Dict[str, Any]:
    config = _symbolic_config(config, args.dim)
    if args.seed is not None:
        config = config.update(seed=args.seed)
    suite = RelationSuite(config)
    reports = []
    for relation_id in SUITES[args.suite]:
        if relation_id == RelationId.JACOBI:
            reports.append(suite.verify_jacobi(samples=args.n, seed=args.seed))
        elif relation_id == RelationId.HIGHER_PRODUCTS:
            reports.append(suite.verify_relation(relation_id, order=args.n))
        else:
            reports.append(suite.verify_relation(relation_id))
    passed = all(report.is_pass() for report in reports)
    return {"suite": args.suite, "status": "pass" if passed else "fail", "reports": [report.to_dict() for report in reports]}


def _distinct(values: np.ndarray) -> List[float]:
    ordered = np.sort(np.asarray(values, dtype=float))
    result: List[float] = []
    for value in ordered:
        if not result or abs(value - result[-1]) > SPECTRUM_TOLERANCE * max(1.0, abs(value)):
            result.append(float(value))
    return result


def _cmd_triplet(args, config: WorkbenchConfig) -> Dict[str, Any]:
    config = _numeric_config(config, args.dim, args.grid)
    masses = _numbers(args.masses)
    grid = build_grid(config)
    sigma = args.profile_sigma or config.profile_sigma

    m_squared = block_generator_matrix("M2", grid, masses)
    spectrum = _distinct(np.diag(m_squared.to_dense()).real)
    expected = _distinct(np.array(masses) ** 2)
    ops = triplet_operators(grid, masses, sigma)
    depth = min(args.depth, config.nested_depth_cap)
    return {
        "masses": masses,
        "grid": grid.to_dict(),
        "mass_squared_spectrum": spectrum,
        "spectrum_matches": len(spectrum) == len(expected)
        and all(abs(a - b) <= SPECTRUM_TOLERANCE * max(1.0, b) for a, b in zip(spectrum, expected)),
        "operators": list(ops),
        "commutant_dimension": commutant_dimension(list(ops.values()), config.commutant_dim_cap),
        "nested_ranks": nested_commutator_rank(list(ops.values()), depth, config.nested_depth_cap),
    }


def _mass_square_expectation(state: BlockState, masses: Sequence[float]) -> float:
    probabilities = state.block_probabilities()
    return float(sum(probability * masses[species - 1] ** 2 for probability, species in zip(probabilities, state.species)))


def _cmd_evolve(args, config: WorkbenchConfig) -> Dict[str, Any]:
    masses = _numbers(args.masses)
    state = BlockState.from_dict(_read_json_argument(args.state))
    variant = "doubled" if args.doubled else "plus"
    evolved = evolve(state, masses, args.t, variant=variant, strict=config.strict_normalization)

    before = {"norm": state.norm(), "probabilities": state.block_probabilities(), "mass_squared": _mass_square_expectation(state, masses)}
    after = {"norm": evolved.norm(), "probabilities": evolved.block_probabilities(), "mass_squared": _mass_square_expectation(evolved, masses)}
    drift = max(
        abs(after["norm"] - before["norm"]),
        float(np.max(np.abs(after["probabilities"] - before["probabilities"]))),
        abs(after["mass_squared"] - before["mass_squared"]) / max(1.0, abs(before["mass_squared"])),
    )
    if args.output:
        Path(args.output).write_text(json.dumps(evolved.to_dict()), encoding="utf-8")
    return {
        "t": args.t,
        "variant": variant,
        "before": before,
        "after": after,
        "max_drift": drift,
        "conserved": drift <= CONSERVATION_TOLERANCE,
    }


def _cmd_fit(args, config: WorkbenchConfig) -> Dict[str, Any]:
    result = MassLab(config).fit(args.csv, MassFormulaKind.parse(args.formula), args.multiplet)
    return result.to_dict()


def _cmd_solve_triplet(args, config: WorkbenchConfig) -> Dict[str, Any]:
    kind = MassFormulaKind.parse(args.kind)
    masses = _exact_numbers(args.masses)
    numbers = _quantum_numbers(args.qnums, kind)
    lab = MassLab(config)
    squares = [mass ** 2 for mass in masses]
    formula = lab.solve_triplet(squares, numbers, kind)
    predicted = [lab.evaluate(formula, item).value for item in numbers]
    return {
        **formula.to_dict(),
        "mass_squares": squares,
        "predicted": predicted,
        "exact": predicted == squares,
    }


def _diagonal_of(operator: Any) -> np.ndarray:
    values = np.asarray(operator)
    return np.diag(values) if values.ndim == 2 else values


def _cmd_vn(args, config: WorkbenchConfig) -> Dict[str, Any]:
    operators = _read_json_argument(args.ops)
    if not isinstance(operators, list):
        raise argparse.ArgumentTypeError("--ops must be a JSON list")
    spectrum = von_neumann_generator(operators)
    reconstructed = all(
        np.array_equal(spectrum.reconstruct(index), _diagonal_of(operator)) for index, operator in enumerate(operators)
    )
    return {**spectrum.to_dict(), "reconstructed": reconstructed}


def _cmd_kappa(args, config: WorkbenchConfig) -> Dict[str, Any]:
    masses = _exact_numbers(args.masses)
    lambdas = _exact_numbers(args.lambdas)
    kappas = kappa_spectrum(masses, lambdas)
    return {"masses": masses, "lambdas": lambdas, "kappa": kappas}


def _measure_from_argument(value: str):
    if _is_file(value):
        return load_measure(value)
    data = _read_json_argument(value)
    if not isinstance(data, dict):
        raise argparse.ArgumentTypeError("--measure must be a JSON object")
    return make_measure(data.get("atoms", []), data.get("intervals", []))


def _cmd_smear(args, config: WorkbenchConfig) -> Dict[str, Any]:
    measure = _measure_from_argument(args.measure)
    value = moment(measure, args.moment, args.of, config.quadrature_nodes)
    bounds = support(measure)
    return {
        "moment": args.moment,
        "of": args.of,
        "value": value,
        "support": bounds.to_dict(),
        "mass_squared_support": bounds.squared().to_dict(),
    }


def _cmd_sample(args, config: WorkbenchConfig) -> Dict[str, Any]:
    measure = _measure_from_argument(args.measure)
    batch = sample(measure, args.seed, args.count)
    masses = batch.masses()
    return {**batch.to_dict(), "mean": float(masses.mean()), "expected_mean": moment(measure, 1, "M", config.quadrature_nodes)}


COMMANDS: Dict[str, Callable[[argparse.Namespace, WorkbenchConfig], Dict[str, Any]]] = {
    "no": _cmd_normal_order,
    "comm": _cmd_bracket,
    "anti": _cmd_bracket,
    "verify": _cmd_verify,
    "triplet": _cmd_triplet,
    "evolve": _cmd_evolve,
    "fit": _cmd_fit,
    "solve-triplet": _cmd_solve_triplet,
    "vn": _cmd_vn,
    "kappa": _cmd_kappa,
    "smear": _cmd_smear,
    "sample": _cmd_sample,
}


def _exit_code(command: str, report: Dict[str, Any]) -> int:
    if command == "verify":
        return EXIT_OK if report["status"] == "pass" else EXIT_FAILED
    if command == "triplet":
        ranks = report["nested_ranks"]
        irreducible = report["commutant_dimension"] == 1
        monotone = all(a <= b for a, b in zip(ranks, ranks[1:]))
        return EXIT_OK if report["spectrum_matches"] and irreducible and monotone else EXIT_FAILED
    if command == "evolve":
        return EXIT_OK if report["conserved"] else EXIT_FAILED
    if command == "solve-triplet":
        return EXIT_OK if report["exact"] else EXIT_FAILED
    if command == "vn":
        return EXIT_OK if report["reconstructed"] else EXIT_FAILED
    return EXIT_OK


def run(argv: Optional[Sequence[str]] = None, stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> int:
    """
    Parse ``argv``, run one subcommand and print its report.

    Returns the process exit code.
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(list(sys.argv[1:] if argv is None else argv))
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    if args.command == "config":
        create_default_config(args.write_template)
        print(f"Sample configuration written to {Path(args.write_template).resolve()}", file=stdout)
        return EXIT_OK

    handler = ErrorHandler(logger)
    try:
        config = load_runtime_config(args.config)
        setup_logging(
            log_level=args.log_level or config.log_level,
            log_file=log_file_path(config.logs_directory) if args.log_file else None,
        )
        with log_duration(logger, f"mow {args.command}"):
            report = COMMANDS[args.command](args, config)
        print(format_report(report, args.json), file=stdout)
        return _exit_code(args.command, report)
    except (WorkbenchException, argparse.ArgumentTypeError, ValueError) as exc:
        details = handler.handle_error(exc, {"command": args.command})
        code = details["error_code"] if isinstance(exc, WorkbenchException) else "usage"
        print(f"mow {args.command}: [{code}] {details['message']}", file=stderr)
        return EXIT_USAGE
    except Exception as exc:
        error_code = ErrorCode.SYSTEM_RESOURCE_EXHAUSTED if isinstance(exc, MemoryError) else ErrorCode.SYSTEM_UNKNOWN_ERROR
        failure = WorkbenchSystemError(f"Unexpected failure: {exc}", error_code, args.command, exc)
        details = handler.handle_error(failure, {"command": args.command})
        print(f"mow {args.command}: [{details['error_code']}] {details['message']}", file=stderr)
        return EXIT_USAGE
    finally:
        close_logging()


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Console entry point."""
    return run(argv)


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
