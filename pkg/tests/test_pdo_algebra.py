"""
Unit tests for one-particle pseudo-differential operators and the Poincaré generators.
"""

from fractions import Fraction

import pytest

from src.exceptions import ErrorCode, PDOError
from src.expr_parser import parse
from src.models.scalar import Scalar
from src.pdo_algebra import (
    PDO,
    combine,
    expected_commutator,
    express_in_span,
    generator_names,
    levi_civita,
    mass_square,
    pauli_lubanski_square,
    pdo_commutator,
    pdo_compose,
    poincare_generators,
    second_quantize,
)
from src.symbolic_core import apply_sifting
from src.wick_engine import commutator


class TestComposition:
    """Test cases for Leibniz-rule composition."""

    def test_derivative_of_component(self):
        d = PDO.derivative(1, dimension=1)
        k = PDO.component(1, dimension=1)
        assert pdo_commutator(d, k) == PDO.identity(dimension=1)

    def test_leibniz_second_order(self):
        d = PDO.derivative(1, dimension=1)
        k2 = pdo_compose(PDO.component(1, dimension=1), PDO.component(1, dimension=1))
        result = pdo_commutator(pdo_compose(d, d), k2)
        expected = pdo_compose(PDO.component(1, dimension=1), d).scale(Scalar.of(4)) + PDO.scalar(Scalar.of(2), dimension=1)
        assert result == expected

    def test_energy_derivative(self):
        d = PDO.derivative(1, dimension=1)
        w = PDO.energy(1, dimension=1)
        expected = pdo_compose(PDO.component(1, dimension=1), PDO.energy(1, -1, dimension=1))
        assert pdo_commutator(d, w) == expected

    def test_mass_mismatch(self):
        with pytest.raises(PDOError) as exc_info:
            pdo_compose(PDO.energy(1), PDO.energy(2))
        assert exc_info.value.error_code == ErrorCode.PDO_MASS_MISMATCH

    def test_dimension_mismatch(self):
        with pytest.raises(PDOError):
            PDO.component(1, dimension=1) + PDO.component(1, dimension=2)

    def test_scalar_value(self):
        assert PDO.scalar(Scalar.of(3)).scalar_value() == Scalar.of(3)
        assert PDO.component(1).scalar_value() is None
        assert PDO().scalar_value() == Scalar.zero()


class TestPoincareGenerators:
    """Test cases for the one-particle representation."""

    @pytest.mark.parametrize("dimension", [1, 2, 3])
    def test_generator_count(self, dimension):
        gens = poincare_generators(1, dimension)
        assert list(gens) == generator_names(dimension)
        assert len(gens) == (dimension + 1) * (dimension + 2) // 2

    @pytest.mark.parametrize("dimension", [1, 2, 3])
    def test_structure_constants(self, dimension):
        gens = poincare_generators(1, dimension)
        names = generator_names(dimension)
        for index, first in enumerate(names):
            for second in names[index + 1:]:
                expected = combine(expected_commutator(first, second), gens)
                assert pdo_commutator(gens[first], gens[second]) == expected, (first, second)

    def test_rotation_on_momentum(self):
        assert expected_commutator("M12", "P1") == {"P2": Scalar(Fraction(0), Fraction(-1))}

    def test_boost_on_momentum(self):
        assert expected_commutator("M01", "P1") == {"P0": Scalar(Fraction(0), Fraction(1))}
        assert expected_commutator("P1", "M01") == {"P0": Scalar(Fraction(0), Fraction(-1))}

    def test_momenta_commute(self):
        assert expected_commutator("P0", "P2") == {}

    def test_mass_square_is_scalar(self):
        value = mass_square(poincare_generators(2, 3)).scalar_value()
        assert value == Scalar.symbol("m2", 2)

    def test_pauli_lubanski_vanishes(self):
        assert pauli_lubanski_square(poincare_generators(1, 3)).is_zero

    def test_pauli_lubanski_needs_three_dimensions(self):
        with pytest.raises(PDOError):
            pauli_lubanski_square(poincare_generators(1, 2))

    def test_unsupported_dimension(self):
        with pytest.raises(PDOError):
            poincare_generators(1, 4)

    def test_levi_civita(self):
        assert levi_civita((0, 1, 2, 3)) == 1
        assert levi_civita((1, 0, 2, 3)) == -1
        assert levi_civita((0, 0, 2, 3)) == 0


class TestSpan:
    """Test cases for exact linear decomposition."""

    def test_commutator_in_span(self):
        gens = poincare_generators(1, 3)
        target = pdo_commutator(gens["M01"], gens["M02"])
        assert express_in_span(target, gens) == expected_commutator("M01", "M02")

    def test_not_in_span(self):
        gens = poincare_generators(1, 1)
        target = pdo_compose(PDO.component(1, dimension=1), PDO.component(1, dimension=1))
        with pytest.raises(PDOError) as exc_info:
            express_in_span(target, gens)
        assert exc_info.value.error_code == ErrorCode.PDO_NOT_IN_SPAN


class TestSecondQuantization:
    """Test cases for lifting one-particle operators to Fock space."""

    def test_momentum_generator(self):
        lifted = second_quantize(PDO.component(1, dimension=1), 1)
        assert lifted == parse("int(q) k[1](q) a+_1(q) a_1(q)", species_count=1, dimension=1)

    def test_momentum_acts_on_creator(self):
        lifted = second_quantize(PDO.component(1, dimension=1), 1)
        result = apply_sifting(commutator(lifted, parse("a+_1(k)", species_count=1, dimension=1)))
        assert result == parse("k[1](k) a+_1(k)", species_count=1, dimension=1)
