"""
Unit tests for scalars, the expression model and canonical-form operations.
"""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.exceptions import ErrorCode, SymbolicError
from src.expr_parser import parse
from src.models.expression import DeltaFactor, Expr, KernelFactor, MomentumLabel, OperatorFactor, Profile, Term
from src.models.scalar import Scalar
from src.symbolic_core import (
    add_exprs,
    apply_sifting,
    canonicalize,
    differentiate,
    expr_of,
    exprs_equal,
    multiply_exprs,
    negate,
    rename_labels,
    subtract,
)
from src.wick_engine import formal_derivative

fractions = st.fractions(min_value=-20, max_value=20, max_denominator=12)
scalars = st.builds(Scalar, fractions, fractions)


def p1(source):
    return parse(source, species_count=2, dimension=1)


class TestScalar:
    """Test cases for exact Gaussian-rational scalars."""

    def test_i_squared_is_minus_one(self):
        assert Scalar.i() * Scalar.i() == Scalar.of(-1)

    def test_zero_drops_atoms(self):
        assert Scalar(Fraction(0), Fraction(0), (("m1", 2),)).atoms == ()

    def test_atoms_merge_and_cancel(self):
        value = Scalar.symbol("m1", 2) * Scalar.symbol("m1", -2)
        assert value == Scalar.one()

    def test_adding_different_monomials_raises(self):
        with pytest.raises(SymbolicError) as exc_info:
            Scalar.symbol("m1") + Scalar.symbol("m2")
        assert exc_info.value.error_code == ErrorCode.SYMBOLIC_MALFORMED_TERM

    def test_evaluate_binds_symbols(self):
        value = Scalar.of(Fraction(1, 2), 1, (("m2", 2),))
        assert value.evaluate({"m2": 3.0}) == pytest.approx(4.5 + 9.0j)

    def test_evaluate_missing_binding(self):
        with pytest.raises(KeyError):
            Scalar.symbol("m3").evaluate({"m1": 1.0})

    def test_serialization_round_trip(self):
        value = Scalar.of(Fraction(-3, 4), Fraction(5, 7), (("m1", 1), ("m2", -2)))
        assert Scalar.from_dict(value.to_dict()) == value

    @given(scalars, scalars)
    def test_multiplication_commutes(self, left, right):
        assert left * right == right * left

    @given(scalars)
    def test_conjugate_is_involution(self, value):
        assert value.conjugate().conjugate() == value
        assert (value * value.conjugate()).is_real()

    @given(scalars, scalars, scalars)
    def test_distributive(self, a, b, c):
        assert a * (b + c) == a * b + a * c


class TestCanonicalForm:
    """Test cases for canonicalization."""

    def test_corpus_is_canonical(self, corpus_lines):
        for line in corpus_lines:
            e = parse(line)
            assert canonicalize(e) == e, line

    def test_delta_orientation(self):
        assert parse("delta(q,k)") == parse("delta(k,q)")

    def test_odd_derivative_delta_flips_sign(self):
        assert parse("delta(q,k)'[1]") == parse("-delta(k,q)'[1]")

    def test_even_derivative_delta_keeps_sign(self):
        assert parse("delta(q,k)'[1,2]") == parse("delta(k,q)'[1,2]")

    def test_odd_derivative_on_coincident_labels_vanishes(self):
        assert parse("delta(k,k)'[2]").is_zero

    def test_commuting_runs_are_sorted(self):
        assert parse("a_2(k) a_1(q)") == parse("a_1(q) a_2(k)")

    def test_rename_is_simultaneous(self):
        (term,) = parse("k[1](k) a+_1(k) a_2(q)").terms
        swapped = rename_labels(term, {"k": "q", "q": "k"})
        assert expr_of([swapped]) == parse("k[1](q) a+_1(q) a_2(k)")
        assert rename_labels(term, {}) is term
        assert parse("a+_3(p) a+_1(k)") == parse("a+_1(k) a+_3(p)")

    def test_mixed_runs_keep_order(self):
        assert parse("a_1(k) a+_1(q)") != parse("a+_1(q) a_1(k)")

    def test_alpha_equivalent_bound_labels(self):
        assert parse("int(q) fn_F(q) a+_1(q) a_1(q)") == parse("int(p) fn_F(p) a+_1(p) a_1(p)")

    def test_bound_labels_are_renamed(self):
        (term,) = parse("int(q) a+_1(q) a_1(q)").terms
        assert [label.name for label in term.bound] == ["b1"]

    def test_like_terms_merge(self):
        assert parse("a_1(k) + a_1(k)") == parse("2 a_1(k)")
        assert parse("a_1(k) - a_1(k)").is_zero

    def test_energy_powers_expand(self):
        assert p1("w_1(k)^2") == p1("k[1](k)^2 + m1^2")
        assert p1("w_2(k)^3") == p1("k[1](k)^2 w_2(k) + m2^2 w_2(k)")

    def test_kernel_powers_merge(self):
        assert p1("k[1](k) k[1](k)^2") == p1("k[1](k)^3")
        assert p1("w_1(k) w_1(k)^-1").terms == p1("1").terms

    def test_mixed_dimensions_rejected(self):
        term = Term(
            Scalar.one(),
            ops=(OperatorFactor(1, False, MomentumLabel("k", 1)), OperatorFactor(1, True, MomentumLabel("q", 3))),
        )
        with pytest.raises(SymbolicError) as exc_info:
            canonicalize(Expr((term,)))
        assert exc_info.value.error_code == ErrorCode.SYMBOLIC_DIMENSION_MISMATCH

    def test_unused_bound_label_rejected(self):
        term = Term(Scalar.one(), ops=(OperatorFactor(1, False, MomentumLabel("k", 1)),), bound=(MomentumLabel("q", 1),))
        with pytest.raises(SymbolicError) as exc_info:
            canonicalize(Expr((term,)))
        assert exc_info.value.error_code == ErrorCode.SYMBOLIC_UNUSED_BOUND_LABEL

    def test_axis_out_of_range_rejected(self):
        term = Term(Scalar.one(), deltas=(DeltaFactor(MomentumLabel("k", 1), MomentumLabel("q", 1), (2,)),))
        with pytest.raises(SymbolicError):
            canonicalize(Expr((term,)))

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.sampled_from(["a_1(k)", "a+_2(q)", "delta(k,q)", "2 k[1](k)", "i a+_1(k) a_2(q)"]), min_size=1, max_size=4))
    def test_canonicalize_is_idempotent(self, pieces):
        e = p1(" + ".join(pieces))
        assert canonicalize(e) == e
        assert canonicalize(canonicalize(e)) == canonicalize(e)


class TestArithmetic:
    """Test cases for sums and products of expressions."""

    def test_subtract_self_is_zero(self):
        e = parse("int(q) fn_F(q) a+_1(q) a_2(k) + 1/2 delta(k,p)")
        assert subtract(e, e).is_zero

    def test_negate_twice(self):
        e = parse("i a_1(k) a+_2(q)")
        assert negate(negate(e)) == e

    def test_product_renames_bound_labels_apart(self):
        e = parse("int(q) a+_1(q)")
        assert multiply_exprs(e, e) == parse("int(q) int(p) a+_1(q) a+_1(p)")

    def test_product_is_bilinear(self):
        left = parse("a_1(k) + a_2(k)")
        right = parse("a+_1(q)")
        expected = add_exprs(parse("a_1(k) a+_1(q)"), parse("a_2(k) a+_1(q)"))
        assert multiply_exprs(left, right) == expected


class TestDifferentiation:
    """Test cases for the product-rule derivative."""

    def test_component_power(self):
        assert differentiate(p1("k[1](k)^3"), "k", 1) == p1("3 k[1](k)^2")

    def test_energy_kernel(self):
        assert differentiate(p1("w_1(k)"), "k", 1) == p1("k[1](k) w_1(k)^-1")

    def test_operator_gets_derivative(self):
        assert differentiate(parse("a_1(k)"), "k", 2) == parse("da_1[2](k)")

    def test_delta_derivative_on_either_side(self):
        assert differentiate(parse("delta(k,q)"), "k", 1) == parse("delta(k,q)'[1]")
        assert differentiate(parse("delta(k,q)"), "q", 1) == parse("-delta(k,q)'[1]")

    def test_product_rule(self):
        e = p1("k[1](k) a_1(k)")
        assert differentiate(e, "k", 1) == p1("a_1(k) + k[1](k) da_1[1](k)")

    def test_profile_has_no_rule(self):
        with pytest.raises(SymbolicError) as exc_info:
            differentiate(parse("fn_F(k)"), "k", 1)
        assert exc_info.value.error_code == ErrorCode.SYMBOLIC_NO_DERIVATIVE_RULE

    def test_bound_label_rejected(self):
        with pytest.raises(SymbolicError) as exc_info:
            formal_derivative(parse("int(q) a+_1(q) a_1(q)"), "b1", 1)
        assert exc_info.value.error_code == ErrorCode.SYMBOLIC_LABEL_NOT_FREE

    def test_untouched_label_gives_zero(self):
        assert differentiate(parse("a_1(k)"), "q", 1).is_zero


class TestSifting:
    """Test cases for integrating out delta functions."""

    def test_plain_delta(self):
        e = parse("int(q) delta(k,q) fn_F(q) a_1(q)")
        assert apply_sifting(e) == parse("fn_F(k) a_1(k)")

    def test_derivative_delta_differentiates_the_integrand(self):
        e = p1("int(q) delta(k,q)'[1] k[1](q)^2 a_1(k)")
        assert apply_sifting(e) == p1("2 k[1](k) a_1(k)")

    def test_derivative_on_integrated_side_changes_sign(self):
        e = p1("int(q) delta(q,k)'[1] k[1](q)^2 a_1(k)")
        assert apply_sifting(e) == p1("-2 k[1](k) a_1(k)")

    def test_free_deltas_stay(self):
        e = parse("delta(k,q) a_1(p)")
        assert apply_sifting(e) == e

    def test_two_bound_labels(self):
        e = parse("int(p) int(q) delta(p,q) fn_F(p) fn_G(q) a+_1(p) a_2(q)")
        assert apply_sifting(e) == parse("int(q) fn_F(q) fn_G(q) a+_1(q) a_2(q)")

    def test_equality_modulo_sifting(self):
        e1 = parse("int(q) delta(k,q) a_1(q)")
        e2 = parse("a_1(k)")
        assert not exprs_equal(e1, e2)
        assert exprs_equal(e1, e2, sift=True)

    def test_profile_kernel_preserved_under_product_with_delta(self):
        e = parse("int(q) delta(k,q) fn_F(k) a_1(q)")
        expected = Expr((Term(Scalar.one(), (KernelFactor(Profile("F"), MomentumLabel("k")),), (),
                              (OperatorFactor(1, False, MomentumLabel("k")),)),))
        assert apply_sifting(e) == canonicalize(expected)
