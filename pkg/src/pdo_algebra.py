"""
One-particle pseudo-differential operators in momentum space.

A ``PDO`` is a finite sum ``c * f(k) * ∂^α`` with kernels ``f`` built from
momentum components, energies ``(k^2 + m_i^2)^(n/2)`` and profiles. Composition
follows the Leibniz rule exactly, so commutators and Casimirs are symbolic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import comb
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

import sympy

from .exceptions import ErrorCode, PDOError
from .models.expression import (
    ComponentPower,
    Energy,
    Expr,
    KernelFactor,
    MomentumLabel,
    OperatorFactor,
    Term,
    multi_index,
    sorted_axes,
)
from .models.scalar import Scalar
from .symbolic_core import canonicalize, differentiate_term, expand_energy, merge_kernels
from .utils.logging_utils import get_logger

logger = get_logger("pdo_algebra")

PDO_LABEL = "k"

# Conventions table: every expected Poincaré structure constant is generated from these.
METRIC = (1, -1, -1, -1)
OVERALL_SIGN = -1
LEVI_CIVITA_0123 = 1


@dataclass(frozen=True)
class PDOTerm:
    coeff: Scalar
    kernels: Tuple[KernelFactor, ...] = ()
    deriv: Tuple[int, ...] = ()

    def key(self) -> Tuple:
        return (
            tuple(kernel.sort_key() for kernel in self.kernels),
            self.deriv,
            self.coeff.atoms,
        )

    def energy_species(self) -> FrozenSet[int]:
        return frozenset(kernel.kind.species for kernel in self.kernels if isinstance(kernel.kind, Energy))


@dataclass(frozen=True)
class PDO:
    """Canonical sum of PDO terms acting on functions of a single momentum label."""
    terms: Tuple[PDOTerm, ...] = field(default_factory=tuple)
    dimension: int = 3

    @classmethod
    def from_terms(cls, terms: Iterable[PDOTerm], dimension: int) -> "PDO":
        return cls(_canonical_terms(terms, dimension), dimension)

    @classmethod
    def identity(cls, dimension: int = 3) -> "PDO":
        return cls.from_terms([PDOTerm(Scalar.one())], dimension)

    @classmethod
    def scalar(cls, value: Scalar, dimension: int = 3) -> "PDO":
        return cls.from_terms([PDOTerm(value)], dimension)

    @classmethod
    def component(cls, axis: int, dimension: int = 3) -> "PDO":
        return cls.from_terms([PDOTerm(Scalar.one(), (_kernel(ComponentPower(axis, 1), dimension),))], dimension)

    @classmethod
    def energy(cls, species: int, exponent: int = 1, dimension: int = 3) -> "PDO":
        return cls.from_terms([PDOTerm(Scalar.one(), (_kernel(Energy(species, exponent), dimension),))], dimension)

    @classmethod
    def derivative(cls, axis: int, dimension: int = 3) -> "PDO":
        return cls.from_terms([PDOTerm(Scalar.one(), (), (axis,))], dimension)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def energy_species(self) -> FrozenSet[int]:
        species = set()
        for term in self.terms:
            species.update(term.energy_species())
        return frozenset(species)

    def scale(self, factor: Scalar) -> "PDO":
        return PDO.from_terms((PDOTerm(term.coeff * factor, term.kernels, term.deriv) for term in self.terms), self.dimension)

    def __add__(self, other: "PDO") -> "PDO":
        _check_dimensions(self, other)
        return PDO.from_terms(self.terms + other.terms, self.dimension)

    def __neg__(self) -> "PDO":
        return self.scale(Scalar.of(-1))

    def __sub__(self, other: "PDO") -> "PDO":
        return self + (-other)

    def __matmul__(self, other: "PDO") -> "PDO":
        return pdo_compose(self, other)

    def scalar_value(self) -> Optional[Scalar]:
        """The constant c when this PDO is ``c * identity``, else None."""
        if not self.terms:
            return Scalar.zero()
        if len(self.terms) == 1 and not self.terms[0].kernels and not self.terms[0].deriv:
            return self.terms[0].coeff
        return None

    def render(self) -> str:
        from .expr_parser import render

        if not self.terms:
            return "0"
        pieces = []
        for term in self.terms:
            text = render(Expr((Term(term.coeff, term.kernels),)))
            if term.deriv:
                text += " D[" + ",".join(str(axis) for axis in term.deriv) + "]"
            pieces.append(text)
        return " + ".join(pieces)

    def to_dict(self) -> Dict[str, object]:
        return {
            "dimension": self.dimension,
            "terms": [
                {
                    "coeff": term.coeff.to_dict(),
                    "kernels": [[type(kernel.kind).__name__, list(vars(kernel.kind).values())] for kernel in term.kernels],
                    "deriv": list(multi_index(term.deriv, self.dimension)),
                }
                for term in self.terms
            ],
        }


def _kernel(kind, dimension: int) -> KernelFactor:
    return KernelFactor(kind, MomentumLabel(PDO_LABEL, dimension))


def _check_dimensions(a: PDO, b: PDO) -> None:
    if a.dimension != b.dimension:
        raise PDOError(
            f"PDO dimensions differ ({a.dimension} vs {b.dimension})",
            ErrorCode.PDO_DIMENSION_UNSUPPORTED,
        )


def _canonical_terms(terms: Iterable[PDOTerm], dimension: int) -> Tuple[PDOTerm, ...]:
    merged: Dict[Tuple, PDOTerm] = {}
    for term in terms:
        if term.coeff.is_zero():
            continue
        deriv = sorted_axes(term.deriv)
        for axis in deriv:
            if not 1 <= axis <= dimension:
                raise PDOError(f"Derivative axis {axis} outside dimension {dimension}", ErrorCode.PDO_DIMENSION_UNSUPPORTED)
        for expanded in expand_energy(Term(term.coeff, merge_kernels(term.kernels))):
            candidate = PDOTerm(expanded.coeff, merge_kernels(expanded.kernels), deriv)
            key = candidate.key()
            if key in merged:
                previous = merged[key]
                merged[key] = PDOTerm(previous.coeff + candidate.coeff, previous.kernels, previous.deriv)
            else:
                merged[key] = candidate
    result = [term for term in merged.values() if not term.coeff.is_zero()]
    result.sort(key=lambda term: (term.key(), term.coeff.re, term.coeff.im))
    return tuple(result)


def _kernel_derivatives(coeff: Scalar, kernels: Tuple[KernelFactor, ...], gamma: Tuple[int, ...]) -> List[Term]:
    """All terms of ∂^gamma applied to ``coeff * prod(kernels)``."""
    pending = [Term(coeff, kernels)]
    for axis_index, count in enumerate(gamma, start=1):
        for _ in range(count):
            pending = [derived for term in pending for derived in differentiate_term(term, PDO_LABEL, axis_index)]
    return pending


def pdo_compose(a: PDO, b: PDO) -> PDO:
    """
    Exact composition ``a ∘ b`` by the Leibniz rule:
    ``f ∂^α ∘ g ∂^β = Σ_γ C(α, γ) f (∂^γ g) ∂^(α-γ+β)``.

    Raises:
        PDOError: if both operands carry energy kernels of different species
    """
    _check_dimensions(a, b)
    species_a, species_b = a.energy_species(), b.energy_species()
    if species_a and species_b and species_a != species_b:
        raise PDOError(
            f"Incompatible mass parameters {sorted(species_a)} and {sorted(species_b)}",
            ErrorCode.PDO_MASS_MISMATCH,
        )

    dimension = a.dimension
    terms: List[PDOTerm] = []
    for left in a.terms:
        alpha = multi_index(left.deriv, dimension)
        for right in b.terms:
            for gamma in product(*(range(order + 1) for order in alpha)):
                binomial = 1
                for order, part in zip(alpha, gamma):
                    binomial *= comb(order, part)
                remaining = [axis for axis, (order, part) in enumerate(zip(alpha, gamma), start=1) for _ in range(order - part)]
                for derived in _kernel_derivatives(right.coeff, right.kernels, gamma):
                    terms.append(
                        PDOTerm(
                            left.coeff * derived.coeff * binomial,
                            left.kernels + derived.kernels,
                            tuple(remaining) + right.deriv,
                        )
                    )
    return PDO.from_terms(terms, dimension)


def pdo_commutator(a: PDO, b: PDO) -> PDO:
    return pdo_compose(a, b) - pdo_compose(b, a)


# ---------------------------------------------------------------------------
# Poincaré generators and conventions
# ---------------------------------------------------------------------------

def generator_names(dimension: int) -> List[str]:
    names = [f"P{mu}" for mu in range(dimension + 1)]
    names += [f"M0{l}" for l in range(1, dimension + 1)]
    names += [f"M{l}{r}" for l in range(1, dimension + 1) for r in range(l + 1, dimension + 1)]
    return names


def poincare_generators(species: int = 1, dimension: int = 3) -> Dict[str, PDO]:
    """
    One-particle Poincaré generators for a scalar particle of mass ``m{species}``:
    ``P_j = k_j``, ``P_0 = w``, ``M_lr = i(k_l ∂_r - k_r ∂_l)`` and the symmetrized
    boost ``M_0l = i w ∂_l + (i/2) k_l w^-1``.
    """
    if dimension not in (1, 2, 3):
        raise PDOError(f"Unsupported momentum dimension {dimension}", ErrorCode.PDO_DIMENSION_UNSUPPORTED)

    i = Scalar.i()
    half_i = Scalar(Fraction(0), Fraction(1, 2))
    energy = _kernel(Energy(species, 1), dimension)
    inverse_energy = _kernel(Energy(species, -1), dimension)

    gens: Dict[str, PDO] = {"P0": PDO.energy(species, 1, dimension)}
    for axis in range(1, dimension + 1):
        gens[f"P{axis}"] = PDO.component(axis, dimension)
    for l in range(1, dimension + 1):
        component = _kernel(ComponentPower(l, 1), dimension)
        gens[f"M0{l}"] = PDO.from_terms(
            [PDOTerm(i, (energy,), (l,)), PDOTerm(half_i, (component, inverse_energy))],
            dimension,
        )
    for l in range(1, dimension + 1):
        for r in range(l + 1, dimension + 1):
            gens[f"M{l}{r}"] = PDO.from_terms(
                [
                    PDOTerm(i, (_kernel(ComponentPower(l, 1), dimension),), (r,)),
                    PDOTerm(-i, (_kernel(ComponentPower(r, 1), dimension),), (l,)),
                ],
                dimension,
            )
    logger.debug("Built %d Poincaré generators for species %d in d=%d", len(gens), species, dimension)
    return {name: gens[name] for name in generator_names(dimension)}


def metric(mu: int, nu: int) -> int:
    return METRIC[mu] if mu == nu else 0


def levi_civita(indices: Tuple[int, ...]) -> int:
    """Totally antisymmetric symbol with ε_0123 taken from the conventions table."""
    if len(set(indices)) != len(indices):
        return 0
    sign = 1
    values = list(indices)
    for first in range(len(values)):
        for second in range(first + 1, len(values)):
            if values[first] > values[second]:
                sign = -sign
    return sign * LEVI_CIVITA_0123


def _parse_generator(name: str) -> Tuple[str, Tuple[int, ...]]:
    return name[0], tuple(int(character) for character in name[1:])


def _m_entry(mu: int, nu: int) -> Optional[Tuple[str, int]]:
    """Name and sign of M_{mu nu} in terms of stored generators (M_{nu mu} = -M_{mu nu})."""
    if mu == nu:
        return None
    if mu < nu:
        return f"M{mu}{nu}", 1
    return f"M{nu}{mu}", -1


def expected_commutator(first: str, second: str) -> Dict[str, Scalar]:
    """
    Poincaré structure constants generated from the conventions table:

    ``[M_μν, P_ρ] = i s (g_νρ P_μ - g_μρ P_ν)`` and
    ``[M_μν, M_ρσ] = i s (g_νρ M_μσ - g_μρ M_νσ - g_νσ M_μρ + g_μσ M_νρ)``.
    """
    kind_a, index_a = _parse_generator(first)
    kind_b, index_b = _parse_generator(second)
    result: Dict[str, Scalar] = {}
    unit = Scalar(Fraction(0), Fraction(OVERALL_SIGN))

    def add_p(mu: int, weight: int) -> None:
        if weight:
            name = f"P{mu}"
            result[name] = result.get(name, Scalar.zero()) + unit * weight

    def add_m(mu: int, nu: int, weight: int) -> None:
        entry = _m_entry(mu, nu)
        if weight and entry is not None:
            name, sign = entry
            result[name] = result.get(name, Scalar.zero()) + unit * (weight * sign)

    if kind_a == "P" and kind_b == "P":
        return {}
    if kind_a == "M" and kind_b == "P":
        (mu, nu), (rho,) = index_a, index_b
        add_p(mu, metric(nu, rho))
        add_p(nu, -metric(mu, rho))
    elif kind_a == "P" and kind_b == "M":
        return {name: -value for name, value in expected_commutator(second, first).items()}
    else:
        (mu, nu), (rho, sigma) = index_a, index_b
        add_m(mu, sigma, metric(nu, rho))
        add_m(nu, sigma, -metric(mu, rho))
        add_m(mu, rho, -metric(nu, sigma))
        add_m(nu, rho, metric(mu, sigma))
    return {name: value for name, value in result.items() if not value.is_zero()}


def combine(coefficients: Mapping[str, Scalar], gens: Mapping[str, PDO]) -> PDO:
    dimension = next(iter(gens.values())).dimension
    total = PDO((), dimension)
    for name, value in coefficients.items():
        total = total + gens[name].scale(value)
    return total


def express_in_span(target: PDO, basis: Mapping[str, PDO]) -> Dict[str, Scalar]:
    """
    Exact coefficients expressing ``target`` over ``basis`` (free parameters set to zero).

    Raises:
        PDOError: when the target is not in the span
    """
    names = list(basis)
    rows: Dict[Tuple, int] = {}
    for pdo in list(basis.values()) + [target]:
        for term in pdo.terms:
            rows.setdefault(term.key(), len(rows))

    matrix = sympy.zeros(len(rows), len(names))
    vector = sympy.zeros(len(rows), 1)
    for column, name in enumerate(names):
        for term in basis[name].terms:
            matrix[rows[term.key()], column] += _to_sympy(term.coeff)
    for term in target.terms:
        vector[rows[term.key()], 0] += _to_sympy(term.coeff)

    if not rows:
        return {}
    try:
        solution, parameters = matrix.gauss_jordan_solve(vector)
    except ValueError as exc:
        raise PDOError(
            "Operator is not a linear combination of the given basis",
            ErrorCode.PDO_NOT_IN_SPAN,
            target.render(),
            cause=exc,
        ) from exc
    solution = solution.subs({parameter: 0 for parameter in parameters})

    coefficients = {}
    for name, value in zip(names, solution):
        scalar = _from_sympy(value)
        if not scalar.is_zero():
            coefficients[name] = scalar
    return coefficients


def _to_sympy(value: Scalar):
    return sympy.Rational(value.re.numerator, value.re.denominator) + sympy.I * sympy.Rational(
        value.im.numerator, value.im.denominator
    )


def _from_sympy(value) -> Scalar:
    real, imag = sympy.re(value), sympy.im(value)
    return Scalar(Fraction(int(real.p), int(real.q)), Fraction(int(imag.p), int(imag.q)))


def mass_square(gens: Mapping[str, PDO]) -> PDO:
    """``P^2 = P_0^2 - Σ P_j^2``; a multiple of the identity for the scalar representation."""
    dimension = gens["P0"].dimension
    total = pdo_compose(gens["P0"], gens["P0"])
    for axis in range(1, dimension + 1):
        total = total - pdo_compose(gens[f"P{axis}"], gens[f"P{axis}"])
    return total


def _raised_p(gens: Mapping[str, PDO], beta: int) -> PDO:
    return gens[f"P{beta}"].scale(Scalar.of(METRIC[beta]))


def _raised_m(gens: Mapping[str, PDO], gamma: int, delta: int) -> Optional[PDO]:
    entry = _m_entry(gamma, delta)
    if entry is None:
        return None
    name, sign = entry
    return gens[name].scale(Scalar.of(sign * METRIC[gamma] * METRIC[delta]))


def pauli_lubanski_vector(gens: Mapping[str, PDO]) -> List[PDO]:
    """``W_α = ½ ε_αβγδ P^β M^γδ`` with indices raised by the metric."""
    dimension = gens["P0"].dimension
    if dimension != 3:
        raise PDOError("The Pauli-Lubanski vector needs d = 3", ErrorCode.PDO_DIMENSION_UNSUPPORTED)

    half = Scalar.of(Fraction(1, 2))
    components = []
    for alpha in range(4):
        total = PDO((), dimension)
        for beta, gamma, delta in product(range(4), repeat=3):
            epsilon = levi_civita((alpha, beta, gamma, delta))
            if not epsilon:
                continue
            m_upper = _raised_m(gens, gamma, delta)
            total = total + pdo_compose(_raised_p(gens, beta), m_upper).scale(half * epsilon)
        components.append(total)
    return components


def pauli_lubanski_square(gens: Mapping[str, PDO]) -> PDO:
    """``W^2 = W_α W^α``; identically zero for the scalar one-particle representation."""
    total = None
    for alpha, component in enumerate(pauli_lubanski_vector(gens)):
        contribution = pdo_compose(component, component).scale(Scalar.of(METRIC[alpha]))
        total = contribution if total is None else total + contribution
    return total


def second_quantize(pdo: PDO, species: int, label: str = "b1") -> Expr:
    """``∫dk a+_i(k) (A a_i)(k)``: the Fock-space generator of a one-particle PDO."""
    momentum = MomentumLabel(label, pdo.dimension)
    terms = []
    for term in pdo.terms:
        kernels = tuple(KernelFactor(kernel.kind, momentum) for kernel in term.kernels)
        ops = (
            OperatorFactor(species, True, momentum),
            OperatorFactor(species, False, momentum, term.deriv),
        )
        terms.append(Term(term.coeff, kernels, (), ops, (momentum,)))
    return canonicalize(Expr(tuple(terms)))
