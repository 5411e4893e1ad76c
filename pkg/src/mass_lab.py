"""
Mass operators as functions of quantum numbers.

Covers the exact triplet coefficient solve, evaluation of the triplet, spin
trajectory and Okubo formulas, the hyperbolic-paraboloid and Gell-Mann-Okubo
identities, least-squares fitting over CSV particle tables, the single
generator of a commuting diagonal family and the kappa spectrum.
"""

from __future__ import annotations

import csv
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

from .exceptions import ErrorCode, MassLabError
from .models.mass_models import (
    FitResult,
    FormulaValue,
    JointSpectrum,
    MassFormula,
    MassFormulaKind,
    ParticleRow,
    ParticleTable,
    QuantumNumbers,
    as_fraction,
)
from .models.workbench_config import WorkbenchConfig
from .utils.logging_utils import LoggerMixin, get_logger

logger = get_logger("mass_lab")

TABLE_COLUMNS = ("name", "mass_mev", "Y", "J", "S", "multiplet")
OCTET_NUMBERS = {
    "N": QuantumNumbers(Y=1, J=Fraction(1, 2)),
    "Xi": QuantumNumbers(Y=-1, J=Fraction(1, 2)),
    "Lambda": QuantumNumbers(Y=0, J=0),
    "Sigma": QuantumNumbers(Y=0, J=1),
}


def _require(numbers: QuantumNumbers, kind: MassFormulaKind) -> None:
    missing = [name for name in kind.required_numbers if numbers.get(name) is None]
    if missing:
        raise MassLabError(
            f"{kind.value} needs quantum numbers {', '.join(missing)}",
            ErrorCode.MASS_MISSING_QUANTUM_NUMBER,
            {"missing": missing, "kind": kind.value},
        )


def _isospin_term(isospin, casimir: bool):
    return isospin * (isospin + 1) if casimir else isospin


def _okubo_term(numbers: QuantumNumbers):
    return numbers.J * (numbers.J + 1) - numbers.Y ** 2 / 4


def design_row(kind: MassFormulaKind, numbers: QuantumNumbers, casimir_isospin: bool = False) -> List[Any]:
    """Row of the linear system in the formula's linear parameters (exact for Fraction inputs)."""
    _require(numbers, kind)
    if kind == MassFormulaKind.TRIPLET_LINEAR:
        return [1, numbers.Y, _isospin_term(numbers.J, casimir_isospin)]
    if kind == MassFormulaKind.TRIPLET_SPIN:
        return [numbers.S, numbers.Y, _isospin_term(numbers.J, casimir_isospin)]
    if kind in (MassFormulaKind.TRAJ_HADRON, MassFormulaKind.TRAJ_MESON):
        return [1, numbers.S * (numbers.S + 1)]
    return [1, numbers.Y, _okubo_term(numbers)]


def _linear_coefficients(formula: MassFormula) -> List[Any]:
    coeffs = [formula.coeffs[name] for name in formula.kind.coefficient_names]
    if formula.kind == MassFormulaKind.TRAJ_MESON:
        return [value ** 2 for value in coeffs]
    return coeffs


def _square_root(value):
    if isinstance(value, sympy.Basic):
        return sympy.sqrt(value)
    if value < 0:
        raise MassLabError(
            f"Negative M^2 = {float(value):g}: unphysical parameter region",
            ErrorCode.MASS_UNPHYSICAL,
            {"mass_squared": float(value)},
        )
    return math.sqrt(value)


def formula_eval(formula: MassFormula, numbers: QuantumNumbers, casimir_isospin: bool = False) -> FormulaValue:
    """
    Evaluate a mass formula; M^2 kinds also report ``M = +sqrt(M^2)``.

    Raises:
        MassLabError: missing quantum numbers, or M^2 < 0
    """
    row = design_row(formula.kind, numbers, casimir_isospin)
    value = sum(weight * entry for weight, entry in zip(_linear_coefficients(formula), row))
    if formula.kind.predicts_square:
        return FormulaValue(value, True, _square_root(value))
    return FormulaValue(value, False, value)


# ---------------------------------------------------------------------------
# Triplet solve
# ---------------------------------------------------------------------------

def _rational(value) -> sympy.Rational:
    exact = as_fraction(value)
    return sympy.Rational(exact.numerator, exact.denominator)


def solve_triplet_coeffs(
    mass_squares: Sequence[Union[str, float, Fraction]],
    numbers: Sequence[QuantumNumbers],
    kind: MassFormulaKind = MassFormulaKind.TRIPLET_LINEAR,
    casimir_isospin: bool = False,
) -> MassFormula:
    """
    Exact coefficients of a triplet formula from three masses squared.

    Raises:
        MassLabError: wrong kind or sizes, or a degenerate quantum-number assignment
    """
    if kind not in (MassFormulaKind.TRIPLET_LINEAR, MassFormulaKind.TRIPLET_SPIN):
        raise MassLabError(f"{kind.value} is not a triplet formula", ErrorCode.MASS_INVALID_INPUT, {"kind": kind.value})
    if len(mass_squares) != 3 or len(numbers) != 3:
        raise MassLabError("A triplet needs exactly three masses and three quantum-number sets", ErrorCode.MASS_INVALID_INPUT)

    rows = [[_rational(entry) for entry in design_row(kind, item, casimir_isospin)] for item in numbers]
    matrix = sympy.Matrix(rows)
    if matrix.det() == 0:
        dependent = [
            index + 1 for index in range(3)
            if sympy.Matrix([rows[other] for other in range(3) if other != index]).rank() == matrix.rank()
        ]
        raise MassLabError(
            f"Singular triplet system: rows {dependent} are linearly dependent",
            ErrorCode.MASS_SINGULAR_SYSTEM,
            {"dependent_rows": dependent},
        )
    targets = [as_fraction(value) for value in mass_squares]
    solution = matrix.LUsolve(sympy.Matrix([_rational(value) for value in targets]))
    coeffs = {
        name: Fraction(int(value.p), int(value.q))
        for name, value in zip(kind.coefficient_names, solution)
    }
    logger.debug("Solved %s coefficients %s", kind.value, coeffs)
    return MassFormula(kind, coeffs)


# ---------------------------------------------------------------------------
# Symbolic identities
# ---------------------------------------------------------------------------

def okubo_from_paraboloid() -> sympy.Expr:
    """Solve ``c/4 y^2 - c z^2 - c z - b y + x - a = 0`` for x after x->M, y->Y, z->J."""
    a, b, c, x, y, z = sympy.symbols("a b c x y z")
    mass, hypercharge, isospin = sympy.symbols("M Y J")
    surface = c / 4 * y ** 2 - c * z ** 2 - c * z - b * y + x - a
    substituted = surface.subs({x: mass, y: hypercharge, z: isospin})
    (solved,) = sympy.solve(sympy.Eq(substituted, 0), mass)
    return sympy.expand(solved)


def okubo_paraboloid_identity() -> sympy.Expr:
    """Difference between the solved paraboloid and the Okubo hadron formula; expands to 0."""
    a, b, c = sympy.symbols("a b c")
    hypercharge, isospin = sympy.symbols("Y J")
    okubo = a + b * hypercharge + c * (isospin * (isospin + 1) - hypercharge ** 2 / 4)
    return sympy.expand(okubo_from_paraboloid() - okubo)


def gell_mann_okubo_residual(kind: MassFormulaKind = MassFormulaKind.OKUBO_HADRON) -> sympy.Expr:
    """``(M_N + M_Xi)/2 - (3 M_Lambda + M_Sigma)/4`` for symbolic coefficients, expanded."""
    a, b, c = sympy.symbols("a b c")
    formula = MassFormula(kind, {"a": a, "b": b, "c": c})
    values = {name: formula_eval(formula, numbers).value for name, numbers in OCTET_NUMBERS.items()}
    residual = (values["N"] + values["Xi"]) / 2 - (3 * values["Lambda"] + values["Sigma"]) / 4
    return sympy.expand(residual)


# ---------------------------------------------------------------------------
# Tables and fitting
# ---------------------------------------------------------------------------

def load_particle_table(path: Union[str, Path]) -> ParticleTable:
    """
    Read ``name,mass_mev,Y,J,S,multiplet`` rows; ``#`` lines are comments.

    Raises:
        MassLabError: missing file, wrong header or an invalid row
    """
    path = Path(path)
    if not path.exists():
        raise MassLabError(f"Particle table not found: {path}", ErrorCode.MASS_INVALID_TABLE, {"path": str(path)})

    with open(path, "r", encoding="utf-8", newline="") as handle:
        lines = [line for line in handle if line.strip() and not line.lstrip().startswith("#")]
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None or tuple(column.strip() for column in header) != TABLE_COLUMNS:
        raise MassLabError(
            f"Particle table header must be {','.join(TABLE_COLUMNS)}",
            ErrorCode.MASS_INVALID_TABLE,
            {"path": str(path), "header": header},
        )

    rows = []
    for number, record in enumerate(reader, start=2):
        if len(record) != len(TABLE_COLUMNS):
            raise MassLabError(f"Row {number} has {len(record)} columns", ErrorCode.MASS_INVALID_TABLE, {"row": number})
        name, mass, hypercharge, isospin, spin, multiplet = (field.strip() for field in record)
        try:
            numbers = QuantumNumbers(
                Y=as_fraction(hypercharge) if hypercharge else None,
                J=as_fraction(isospin) if isospin else None,
                S=as_fraction(spin) if spin else None,
            )
            rows.append(ParticleRow(name, float(as_fraction(mass)), numbers, multiplet))
        except (ValueError, ZeroDivisionError) as exc:
            raise MassLabError(f"Row {number}: {exc}", ErrorCode.MASS_INVALID_TABLE, {"row": number}, exc) from exc

    logger.info("Loaded %d particles from %s", len(rows), path)
    return ParticleTable(rows, str(path))


def fit_formula(table: ParticleTable, kind: MassFormulaKind, casimir_isospin: bool = False) -> FitResult:
    """
    Ordinary least squares on the formula's linear parameters.

    TRAJ-MESON is fitted linearly in (a^2, b^2) and reported as (a, b).

    Raises:
        MassLabError: too few rows, rank-deficient design, or negative a^2/b^2
    """
    if len(table) < kind.arity:
        raise MassLabError(
            f"{kind.value} needs at least {kind.arity} particles, got {len(table)}",
            ErrorCode.MASS_INVALID_TABLE,
            {"rows": len(table)},
        )
    design = np.array([[float(entry) for entry in design_row(kind, row.numbers, casimir_isospin)] for row in table.rows])
    masses = np.array([row.mass_mev for row in table.rows])
    target = masses ** 2 if kind.predicts_square else masses

    solution, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < kind.arity:
        raise MassLabError(
            f"Design matrix for {kind.value} has rank {rank} < {kind.arity}",
            ErrorCode.MASS_SINGULAR_SYSTEM,
            {"rank": int(rank)},
        )
    residuals = target - design @ solution

    if kind == MassFormulaKind.TRAJ_MESON:
        if np.any(solution < 0):
            raise MassLabError("Fitted a^2 or b^2 is negative", ErrorCode.MASS_UNPHYSICAL, {"solution": solution.tolist()})
        solution = np.sqrt(solution)
    coeffs = {name: float(value) for name, value in zip(kind.coefficient_names, solution)}
    rms = float(np.sqrt(np.mean(residuals ** 2)))
    logger.info("Fitted %s over %d particles: rms=%.6g", kind.value, len(table), rms)
    return FitResult(kind, coeffs, [float(value) for value in residuals], rms, [row.name for row in table.rows])


def trajectory_points(formula: MassFormula, spins: Sequence[Union[str, float, Fraction]]) -> List[Tuple[float, float]]:
    """(S, M) pairs along a spin trajectory."""
    points = []
    for spin in spins:
        value = formula_eval(formula, QuantumNumbers(S=as_fraction(spin)))
        points.append((float(as_fraction(spin)), float(value.mass)))
    return points


# ---------------------------------------------------------------------------
# Commuting families and kappa
# ---------------------------------------------------------------------------

def _diagonal(operator, index: int) -> np.ndarray:
    values = np.asarray(operator)
    if values.ndim == 2:
        if values.shape[0] != values.shape[1] or np.count_nonzero(values - np.diag(np.diag(values))):
            raise MassLabError(f"Operator {index + 1} is not diagonal", ErrorCode.MASS_INVALID_INPUT, {"operator": index + 1})
        values = np.diag(values)
    if values.ndim != 1 or values.size == 0:
        raise MassLabError(f"Operator {index + 1} has no diagonal", ErrorCode.MASS_INVALID_INPUT, {"operator": index + 1})
    if np.iscomplexobj(values):
        if np.any(values.imag != 0):
            raise MassLabError(f"Operator {index + 1} is not self-adjoint", ErrorCode.MASS_INVALID_INPUT, {"operator": index + 1})
        values = values.real
    return values


def von_neumann_generator(operators: Sequence[Any]) -> JointSpectrum:
    """
    One diagonal A with every input a function of it.

    Distinct joint-spectrum points are numbered in order of first appearance
    along the diagonal; that number is the eigenvalue of A.
    """
    if not operators:
        raise MassLabError("At least one operator is required", ErrorCode.MASS_INVALID_INPUT)
    diagonals = [_diagonal(operator, index) for index, operator in enumerate(operators)]
    size = diagonals[0].size
    if any(values.size != size for values in diagonals):
        raise MassLabError("Operators must share one dimension", ErrorCode.MASS_INVALID_INPUT, {"sizes": [d.size for d in diagonals]})

    numbering: Dict[Tuple[float, ...], int] = {}
    generator = []
    for position in range(size):
        point = tuple(float(values[position]) for values in diagonals)
        generator.append(numbering.setdefault(point, len(numbering)))
    points = sorted(numbering, key=numbering.get)
    lookups = [{numbering[point]: point[index] for point in points} for index in range(len(diagonals))]
    logger.debug("Joint spectrum of %d operators has %d points", len(diagonals), len(points))
    return JointSpectrum(generator, lookups, points)


def lift_function(spectrum: JointSpectrum, function: Callable[..., float]) -> Dict[int, float]:
    """Lookup for f~ with f~(A) = f(A_1, ..., A_n)."""
    return {index: function(*point) for index, point in enumerate(spectrum.points)}


def check_kappa_recovery(
    kappas: Sequence[Fraction],
    masses: Sequence[Union[str, float, Fraction]],
    lambdas: Sequence[Union[str, float, Fraction]],
) -> None:
    """
    ``kappa / lambda_i`` must give back ``+m_i`` and ``-m_i`` exactly.

    Raises:
        MassLabError: on the first pair that does not round-trip
    """
    if len(kappas) != 2 * len(masses):
        raise MassLabError("Expected two kappa values per mass", ErrorCode.MASS_INVALID_INPUT)
    for index, (mass, eigenvalue) in enumerate(zip(masses, lambdas)):
        mass, eigenvalue = as_fraction(mass), as_fraction(eigenvalue)
        recovered = (kappas[2 * index] / eigenvalue, kappas[2 * index + 1] / eigenvalue)
        if recovered != (mass, -mass):
            raise MassLabError(
                f"kappa/lambda gives {recovered[0]}, {recovered[1]} instead of +-{mass}",
                ErrorCode.MASS_INVALID_INPUT,
                {"index": index, "mass": str(mass), "lambda": str(eigenvalue)},
            )


def kappa_spectrum(masses: Sequence[Union[str, float, Fraction]], lambdas: Sequence[Union[str, float, Fraction]]) -> List[Fraction]:
    """
    ``+m_i lambda_i`` and ``-m_i lambda_i`` for each pair, in input order.

    Raises:
        MassLabError: unequal lengths, a zero eigenvalue or a failed recovery of the masses
    """
    if len(masses) != len(lambdas):
        raise MassLabError("Masses and eigenvalues must have equal length", ErrorCode.MASS_INVALID_INPUT)
    exact_masses = [as_fraction(value) for value in masses]
    exact_lambdas = [as_fraction(value) for value in lambdas]
    if any(value == 0 for value in exact_lambdas):
        raise MassLabError("Eigenvalues must be nonzero", ErrorCode.MASS_ZERO_EIGENVALUE, {"lambdas": [str(v) for v in exact_lambdas]})

    kappas = []
    for mass, eigenvalue in zip(exact_masses, exact_lambdas):
        kappa = mass * eigenvalue
        kappas.extend([kappa, -kappa])
    check_kappa_recovery(kappas, exact_masses, exact_lambdas)
    return kappas


class MassLab(LoggerMixin):
    """Mass-formula operations bound to a configuration."""

    def __init__(self, config: Optional[WorkbenchConfig] = None):
        self.config = config or WorkbenchConfig()

    @property
    def casimir_isospin(self) -> bool:
        return self.config.okubo_casimir_isospin

    def solve_triplet(self, mass_squares, numbers, kind: MassFormulaKind = MassFormulaKind.TRIPLET_LINEAR) -> MassFormula:
        return solve_triplet_coeffs(mass_squares, numbers, kind, self.casimir_isospin)

    def evaluate(self, formula: MassFormula, numbers: QuantumNumbers) -> FormulaValue:
        return formula_eval(formula, numbers, self.casimir_isospin)

    def fit(self, path: Union[str, Path], kind: MassFormulaKind, multiplet: Optional[str] = None) -> FitResult:
        table = load_particle_table(path)
        if multiplet:
            table = table.select(multiplet)
        self.log_debug(f"Fitting {kind.value} over {len(table)} rows")
        return fit_formula(table, kind, self.casimir_isospin)
