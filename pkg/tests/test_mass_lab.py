"""
Tests for mass formulas, fitting, the single-generator construction and kappa.
"""

from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from src.exceptions import ErrorCode, MassLabError
from src.mass_lab import (
    MassLab,
    check_kappa_recovery,
    fit_formula,
    formula_eval,
    gell_mann_okubo_residual,
    kappa_spectrum,
    lift_function,
    load_particle_table,
    okubo_from_paraboloid,
    okubo_paraboloid_identity,
    solve_triplet_coeffs,
    trajectory_points,
    von_neumann_generator,
)
from src.models.mass_models import MassFormula, MassFormulaKind, ParticleRow, ParticleTable, QuantumNumbers
from src.models.workbench_config import WorkbenchConfig

TRIPLET_NUMBERS = [
    QuantumNumbers(Y=1, J=Fraction(1, 2)),
    QuantumNumbers(Y=0, J=1),
    QuantumNumbers(Y=-1, J=Fraction(1, 2)),
]
quarters = st.integers(min_value=-8, max_value=8).map(lambda value: Fraction(value, 4))
half_integers = st.integers(min_value=0, max_value=4).map(lambda value: Fraction(value, 2))


class TestQuantumNumbers:
    """Test cases for quantum-number validation."""

    def test_strings_are_exact(self):
        numbers = QuantumNumbers(Y="-1", J="1/2", S="3/2")
        assert numbers.J == Fraction(1, 2) and numbers.S == Fraction(3, 2)

    @pytest.mark.parametrize("isospin", [-1, Fraction(1, 3)])
    def test_isospin_must_be_half_integer(self, isospin):
        with pytest.raises(ValueError):
            QuantumNumbers(Y=0, J=isospin)

    def test_round_trip(self):
        numbers = QuantumNumbers(Y=1, J=Fraction(1, 2))
        assert QuantumNumbers.from_dict(numbers.to_dict()) == numbers

    def test_formula_kind_parse(self):
        assert MassFormulaKind.parse("okubo_hadron") == MassFormulaKind.OKUBO_HADRON
        with pytest.raises(ValueError):
            MassFormulaKind.parse("GMOR")


class TestTripletSolve:
    """Test cases for the exact triplet coefficient solve."""

    def test_known_solution(self):
        formula = solve_triplet_coeffs([1, 4, 9], TRIPLET_NUMBERS)
        assert formula.coeffs == {"a": 6, "b": -4, "c": -2}
        for square, numbers in zip([1, 4, 9], TRIPLET_NUMBERS):
            assert formula_eval(formula, numbers).value == square

    def test_equal_masses_give_constant(self):
        formula = solve_triplet_coeffs(["5/2"] * 3, TRIPLET_NUMBERS)
        assert formula.coeffs == {"a": Fraction(5, 2), "b": 0, "c": 0}

    def test_singular_system_names_rows(self):
        numbers = [TRIPLET_NUMBERS[0], TRIPLET_NUMBERS[0], TRIPLET_NUMBERS[1]]
        with pytest.raises(MassLabError) as exc_info:
            solve_triplet_coeffs([1, 4, 9], numbers)
        assert exc_info.value.error_code == ErrorCode.MASS_SINGULAR_SYSTEM
        assert exc_info.value.details["dependent_rows"] == [1, 2]

    def test_spin_variant(self):
        numbers = [QuantumNumbers(Y=1, J=Fraction(1, 2), S=Fraction(1, 2)),
                   QuantumNumbers(Y=0, J=1, S=Fraction(3, 2)),
                   QuantumNumbers(Y=-1, J=0, S=Fraction(1, 2))]
        formula = solve_triplet_coeffs([1, 2, 3], numbers, MassFormulaKind.TRIPLET_SPIN)
        for square, item in zip([1, 2, 3], numbers):
            assert formula_eval(formula, item).value == square

    def test_casimir_switch(self):
        lab = MassLab(WorkbenchConfig(okubo_casimir_isospin=True))
        formula = lab.solve_triplet([1, 4, 9], TRIPLET_NUMBERS)
        assert formula.coeffs["c"] == Fraction(-4, 5)
        assert [lab.evaluate(formula, item).value for item in TRIPLET_NUMBERS] == [1, 4, 9]

    def test_invalid_input(self):
        with pytest.raises(MassLabError) as exc_info:
            solve_triplet_coeffs([1, 4, 9], TRIPLET_NUMBERS, MassFormulaKind.OKUBO_HADRON)
        assert exc_info.value.error_code == ErrorCode.MASS_INVALID_INPUT
        with pytest.raises(MassLabError):
            solve_triplet_coeffs([1, 4], TRIPLET_NUMBERS[:2])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(quarters, half_integers), min_size=3, max_size=3),
           st.lists(st.fractions(min_value=1, max_value=50, max_denominator=8), min_size=3, max_size=3))
    def test_round_trip_is_exact(self, assignments, squares):
        numbers = [QuantumNumbers(Y=y, J=j) for y, j in assignments]
        try:
            formula = solve_triplet_coeffs(squares, numbers)
        except MassLabError as exc:
            assert exc.error_code == ErrorCode.MASS_SINGULAR_SYSTEM
            return
        assert [formula_eval(formula, item).value for item in numbers] == squares


class TestFormulaEvaluation:
    """Test cases for evaluating mass formulas."""

    def test_constant_okubo(self):
        formula = MassFormula(MassFormulaKind.OKUBO_HADRON, {"a": 1, "b": 0, "c": 0})
        result = formula_eval(formula, QuantumNumbers(Y=-2, J=Fraction(3, 2)))
        assert result.mass == 1 and not result.squared

    def test_hadron_trajectory(self):
        formula = MassFormula(MassFormulaKind.TRAJ_HADRON, {"a": 1, "b": 1})
        assert formula_eval(formula, QuantumNumbers(S=1)).mass == 3

    def test_meson_trajectory_reports_root(self):
        formula = MassFormula(MassFormulaKind.TRAJ_MESON, {"a": 1, "b": 1})
        result = formula_eval(formula, QuantumNumbers(S=1))
        assert result.squared and result.value == 3
        assert result.mass == pytest.approx(np.sqrt(3))

    def test_unphysical_region(self):
        formula = MassFormula(MassFormulaKind.OKUBO_MESON, {"a": -10, "b": 0, "c": 0})
        with pytest.raises(MassLabError) as exc_info:
            formula_eval(formula, QuantumNumbers(Y=0, J=0))
        assert exc_info.value.error_code == ErrorCode.MASS_UNPHYSICAL

    def test_missing_quantum_number(self):
        formula = MassFormula(MassFormulaKind.TRIPLET_SPIN, {"a": 1, "b": 1, "c": 1})
        with pytest.raises(MassLabError) as exc_info:
            formula_eval(formula, QuantumNumbers(Y=0, J=0))
        assert exc_info.value.error_code == ErrorCode.MASS_MISSING_QUANTUM_NUMBER
        assert exc_info.value.details["missing"] == ["S"]

    def test_wrong_coefficients(self):
        with pytest.raises(ValueError):
            MassFormula(MassFormulaKind.TRAJ_HADRON, {"a": 1, "b": 1, "c": 1})

    def test_trajectory_points(self):
        formula = MassFormula(MassFormulaKind.TRAJ_HADRON, {"a": 1, "b": 1})
        assert trajectory_points(formula, ["0", "1"]) == [(0.0, 1.0), (1.0, 3.0)]

    def test_formula_serialization(self):
        formula = MassFormula(MassFormulaKind.OKUBO_HADRON, {"a": Fraction(1, 2), "b": 2, "c": 0})
        assert formula.to_dict()["coeffs"] == {"a": "1/2", "b": 2, "c": 0}


class TestSymbolicIdentities:
    """Test cases for the paraboloid and Gell-Mann-Okubo identities."""

    def test_paraboloid_gives_okubo(self):
        assert okubo_paraboloid_identity() == 0

    def test_paraboloid_coefficients(self):
        solved = okubo_from_paraboloid()
        c, hypercharge = sympy.symbols("c Y")
        assert sympy.simplify(solved.coeff(hypercharge, 2) + c / 4) == 0

    @pytest.mark.parametrize("kind", [MassFormulaKind.OKUBO_HADRON, MassFormulaKind.OKUBO_MESON])
    def test_gell_mann_okubo(self, kind):
        assert gell_mann_okubo_residual(kind) == 0


class TestTablesAndFits:
    """Test cases for particle tables and least-squares fits."""

    def test_bundled_table(self, octet_csv):
        table = load_particle_table(octet_csv)
        assert len(table) == 8
        assert table.multiplets() == ["decuplet", "octet"]
        assert len(table.select("decuplet")) == 4
        assert table.rows[0].numbers.J == Fraction(1, 2)

    def test_missing_table(self, temp_directory):
        with pytest.raises(MassLabError) as exc_info:
            load_particle_table(temp_directory / "absent.csv")
        assert exc_info.value.error_code == ErrorCode.MASS_INVALID_TABLE

    def test_wrong_header(self, write_csv):
        path = write_csv(["N,938.9,1,1/2,1/2,octet"], header="name,mass,Y,J,S,multiplet")
        with pytest.raises(MassLabError) as exc_info:
            load_particle_table(path)
        assert exc_info.value.error_code == ErrorCode.MASS_INVALID_TABLE

    @pytest.mark.parametrize("row", ["N,938.9,1,1/2,octet", "N,heavy,1,1/2,1/2,octet", "N,-5,1,1/2,1/2,octet"])
    def test_invalid_rows(self, write_csv, row):
        with pytest.raises(MassLabError) as exc_info:
            load_particle_table(write_csv([row]))
        assert exc_info.value.error_code == ErrorCode.MASS_INVALID_TABLE

    def test_comments_and_blank_lines(self, write_csv):
        path = write_csv(["# a comment", "", "N,938.9,1,1/2,1/2,octet"])
        assert len(load_particle_table(path)) == 1

    def test_noiseless_okubo_recovery(self, write_csv):
        rows = ["N,930,1,1/2,1/2,octet", "Lambda,1100,0,0,1/2,octet", "Sigma,1180,0,1,1/2,octet", "Xi,1310,-1,1/2,1/2,octet"]
        result = fit_formula(load_particle_table(write_csv(rows)), MassFormulaKind.OKUBO_HADRON)
        assert result.coeffs["a"] == pytest.approx(1100, rel=1e-9)
        assert result.coeffs["b"] == pytest.approx(-190, rel=1e-9)
        assert result.coeffs["c"] == pytest.approx(40, rel=1e-9)
        assert result.rms < 1e-9

    def test_octet_fit(self, octet_csv):
        result = MassLab().fit(octet_csv, MassFormulaKind.OKUBO_HADRON, multiplet="octet")
        assert result.names == ["N", "Lambda", "Sigma", "Xi"]
        assert len(result.residuals) == 4
        assert 0 < result.rms < 10

    def test_interpolating_fit(self):
        rows = [ParticleRow(f"p{spin}", 1 + spin * (spin + 1), QuantumNumbers(S=spin)) for spin in (0, 1)]
        result = fit_formula(ParticleTable(rows), MassFormulaKind.TRAJ_HADRON)
        assert result.coeffs["a"] == pytest.approx(1.0)
        assert result.coeffs["b"] == pytest.approx(1.0)
        assert max(abs(value) for value in result.residuals) < 1e-9

    def test_meson_trajectory_fit_reports_roots(self):
        rows = [ParticleRow(f"p{spin}", float(np.sqrt(4 + 9 * spin * (spin + 1))), QuantumNumbers(S=spin)) for spin in (0, 1, 2)]
        result = fit_formula(ParticleTable(rows), MassFormulaKind.TRAJ_MESON)
        assert result.coeffs["a"] == pytest.approx(2.0)
        assert result.coeffs["b"] == pytest.approx(3.0)

    def test_rank_deficient_design(self):
        rows = [ParticleRow(f"p{index}", 100.0 + index, QuantumNumbers(Y=0, J=0)) for index in range(3)]
        with pytest.raises(MassLabError) as exc_info:
            fit_formula(ParticleTable(rows), MassFormulaKind.OKUBO_HADRON)
        assert exc_info.value.error_code == ErrorCode.MASS_SINGULAR_SYSTEM

    def test_too_few_rows(self):
        rows = [ParticleRow("p", 100.0, QuantumNumbers(Y=0, J=0))]
        with pytest.raises(MassLabError):
            fit_formula(ParticleTable(rows), MassFormulaKind.OKUBO_HADRON)

    def test_fit_to_dict(self, octet_csv):
        data = MassLab().fit(octet_csv, MassFormulaKind.OKUBO_HADRON, multiplet="octet").to_dict()
        assert set(data) == {"kind", "coeffs", "residuals", "rms"}
        assert data["kind"] == "OKUBO-HADRON"


class TestSingleGenerator:
    """Test cases for the single generator of a commuting family."""

    def test_joint_spectrum_enumeration(self):
        spectrum = von_neumann_generator([np.diag([0, 0, 1, 1]), np.diag([0, 1, 0, 1])])
        assert spectrum.generator == [0, 1, 2, 3]
        assert spectrum.lookups[0] == {0: 0, 1: 0, 2: 1, 3: 1}
        assert spectrum.lookups[1] == {0: 0, 1: 1, 2: 0, 3: 1}

    def test_repeated_points_collapse(self):
        spectrum = von_neumann_generator([[5, 5], [5, 5]])
        assert spectrum.generator == [0, 0]

    def test_lift_function(self):
        spectrum = von_neumann_generator([[0, 0, 1, 1], [0, 1, 0, 1]])
        assert lift_function(spectrum, lambda first, second: first + 2 * second) == {0: 0, 1: 2, 2: 1, 3: 3}

    def test_non_diagonal_rejected(self):
        with pytest.raises(MassLabError) as exc_info:
            von_neumann_generator([np.array([[1, 1], [0, 1]])])
        assert exc_info.value.error_code == ErrorCode.MASS_INVALID_INPUT

    def test_complex_eigenvalues_rejected(self):
        with pytest.raises(MassLabError):
            von_neumann_generator([np.array([1j, 1])])

    def test_dimensions_must_match(self):
        with pytest.raises(MassLabError):
            von_neumann_generator([[1, 2], [1, 2, 3]])
        with pytest.raises(MassLabError):
            von_neumann_generator([])

    @settings(max_examples=100, deadline=None)
    @given(st.integers(min_value=1, max_value=64).flatmap(
        lambda size: st.lists(st.lists(st.integers(-3, 3), min_size=size, max_size=size), min_size=1, max_size=4)))
    def test_reconstruction_is_exact(self, diagonals):
        spectrum = von_neumann_generator(diagonals)
        for index, values in enumerate(diagonals):
            assert spectrum.reconstruct(index) == [float(value) for value in values]


class TestKappa:
    """Test cases for the kappa spectrum."""

    def test_products(self):
        assert kappa_spectrum([1, 2], [3, 4]) == [3, -3, 8, -8]

    def test_round_trip(self):
        masses, lambdas = ["1/2", "3"], ["-2", "5/3"]
        kappas = kappa_spectrum(masses, lambdas)
        recovered = [kappa / Fraction(lambdas[index // 2]) for index, kappa in enumerate(kappas)]
        assert recovered == [Fraction(1, 2), Fraction(-1, 2), Fraction(3), Fraction(-3)]

    def test_zero_eigenvalue(self):
        with pytest.raises(MassLabError) as exc_info:
            kappa_spectrum([1, 2], [1, 0])
        assert exc_info.value.error_code == ErrorCode.MASS_ZERO_EIGENVALUE

    def test_length_mismatch(self):
        with pytest.raises(MassLabError) as exc_info:
            kappa_spectrum([1, 2], [1])
        assert exc_info.value.error_code == ErrorCode.MASS_INVALID_INPUT

    def test_recovery_accepts_exact_spectrum(self):
        masses, lambdas = ["1/2", "3"], ["-2", "5/3"]
        check_kappa_recovery(kappa_spectrum(masses, lambdas), masses, lambdas)

    def test_recovery_rejects_wrong_sign(self):
        with pytest.raises(MassLabError) as exc_info:
            check_kappa_recovery([Fraction(3), Fraction(3)], [1], [3])
        assert exc_info.value.error_code == ErrorCode.MASS_INVALID_INPUT
        assert exc_info.value.details["index"] == 0

    def test_recovery_needs_pairs(self):
        with pytest.raises(MassLabError):
            check_kappa_recovery([Fraction(3)], [1], [3])
