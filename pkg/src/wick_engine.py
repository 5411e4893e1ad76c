"""
Normal ordering, brackets and formal derivatives under the bosonic CCR.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

from .exceptions import ErrorCode, SymbolicError, WickError
from .models.expression import DeltaFactor, Expr, OperatorFactor, Term
from .models.scalar import Scalar
from .models.workbench_config import WorkbenchConfig
from .symbolic_core import canonicalize, differentiate, multiply_terms
from .utils.logging_utils import get_logger

logger = get_logger("wick_engine")


@dataclass(frozen=True)
class CCRConfig:
    """Bosonic commutation relations for ``species_count`` species."""
    species_count: int = 3
    statistics: str = "bosonic"

    def __post_init__(self):
        if self.species_count < 1:
            raise ValueError("species_count must be at least 1")
        if self.statistics != "bosonic":
            raise ValueError("Only bosonic statistics are supported")

    @classmethod
    def from_config(cls, config: WorkbenchConfig) -> "CCRConfig":
        return cls(species_count=config.species_count)


def _check_regimes(term: Term) -> None:
    discrete = {op.is_discrete for op in term.ops}
    if len(discrete) > 1:
        raise WickError(
            "Operator product mixes continuum and discrete-mode operators",
            ErrorCode.WICK_MIXED_REGIMES,
        )


def _first_inversion(ops: Tuple[OperatorFactor, ...]) -> Optional[int]:
    for index in range(len(ops) - 1):
        if not ops[index].dagger and ops[index + 1].dagger:
            return index
    return None


def _contraction(annihilator: OperatorFactor, creator: OperatorFactor) -> Tuple[Scalar, Tuple[DeltaFactor, ...]]:
    """
    ``[∂^α a_μ(k), ∂^β a+_μ(k')] = (-1)^|β| ∂^(α+β)_k δ(k - k')``; discrete modes give 1.
    """
    if annihilator.is_discrete:
        return Scalar.one(), ()
    sign = -1 if len(creator.deriv) % 2 else 1
    delta = DeltaFactor(annihilator.label, creator.label, annihilator.deriv + creator.deriv)
    return Scalar.of(sign), (delta,)


def _normal_order_term(term: Term) -> List[Term]:
    _check_regimes(term)
    pending = [term]
    done: List[Term] = []
    while pending:
        current = pending.pop()
        index = _first_inversion(current.ops)
        if index is None:
            done.append(current)
            continue

        annihilator, creator = current.ops[index], current.ops[index + 1]
        swapped = current.ops[:index] + (creator, annihilator) + current.ops[index + 2:]
        pending.append(Term(current.coeff, current.kernels, current.deltas, swapped, current.bound))

        if annihilator.species == creator.species:
            factor, deltas = _contraction(annihilator, creator)
            contracted = current.ops[:index] + current.ops[index + 2:]
            pending.append(
                Term(current.coeff * factor, current.kernels, current.deltas + deltas, contracted, current.bound)
            )
    return done


def normal_order(e: Expr) -> Expr:
    """
    Move every creation operator to the left of every annihilation operator.

    Each swap of an adjacent ``a, a+`` pair adds the contraction term, so the
    value is preserved. The result is canonical and normal ordering is idempotent.
    """
    terms: List[Term] = []
    for term in e.terms:
        terms.extend(_normal_order_term(term))
    result = canonicalize(Expr(tuple(terms)))
    logger.debug("Normal ordered %d term(s) into %d", len(e.terms), len(result.terms))
    return result


def is_normal_ordered(e: Expr) -> bool:
    return all(_first_inversion(term.ops) is None for term in e.terms)


def bracket(e1: Expr, e2: Expr, sign: int = -1) -> Expr:
    """
    ``normal_order(e1 e2 + sign * e2 e1)``: commutator for sign -1, anticommutator for +1.

    Bound labels of each operand are renamed apart from the other before multiplying.
    """
    if sign not in (-1, 1):
        raise ValueError("bracket sign must be -1 or +1")
    factor = Scalar.of(sign)
    terms: List[Term] = []
    for left in e1.terms:
        for right in e2.terms:
            terms.append(multiply_terms(left, right))
            reverse = multiply_terms(right, left)
            terms.append(reverse.with_coeff(reverse.coeff * factor))
    return normal_order(Expr(tuple(terms)))


def commutator(e1: Expr, e2: Expr) -> Expr:
    return bracket(e1, e2, -1)


def anticommutator(e1: Expr, e2: Expr) -> Expr:
    return bracket(e1, e2, 1)


def formal_derivative(e: Expr, label: str, axis: int) -> Expr:
    """
    Product-rule derivative with respect to component ``axis`` of a free label.

    Raises:
        SymbolicError: if the label is bound in any term
    """
    if label in e.bound:
        raise SymbolicError(
            f"Cannot differentiate with respect to bound label '{label}'",
            ErrorCode.SYMBOLIC_LABEL_NOT_FREE,
            label,
        )
    return differentiate(canonicalize(e), label, axis)
