"""
Canonical forms, arithmetic, differentiation and delta sifting for operator expressions.
"""

from __future__ import annotations

import re
from itertools import permutations
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .exceptions import ErrorCode, SymbolicError
from .models.expression import (
    ComponentPower,
    DeltaFactor,
    Energy,
    Expr,
    KernelFactor,
    MomentumLabel,
    OperatorFactor,
    Profile,
    Term,
)
from .models.scalar import Scalar
from .utils.logging_utils import get_logger

logger = get_logger("symbolic_core")

# Exhaustive alpha-renaming is used up to this many bound labels per term.
MAX_PERMUTED_BOUND_LABELS = 6

_SIFT_PLACEHOLDER = "~"


def mass_symbol(species: int) -> str:
    return f"m{species}"


def bound_name_key(name: str) -> Tuple:
    match = re.match(r"^(\D*)(\d*)(.*)$", name)
    prefix, digits, rest = match.groups()
    return (prefix, int(digits) if digits else -1, rest)


# ---------------------------------------------------------------------------
# Construction helpers
# ---------------------------------------------------------------------------

def expr_of(terms: Iterable[Term]) -> Expr:
    return canonicalize(Expr(tuple(terms)))


def zero_expr() -> Expr:
    return Expr(())


def scalar_expr(value: Scalar) -> Expr:
    return expr_of([Term(value)])


def operator_expr(
    species: int,
    dagger: bool,
    label: Optional[MomentumLabel] = None,
    deriv: Sequence[int] = (),
    coeff: Optional[Scalar] = None,
) -> Expr:
    return expr_of([Term(coeff or Scalar.one(), ops=(OperatorFactor(species, dagger, label, tuple(deriv)),))])


def delta_expr(lhs: MomentumLabel, rhs: MomentumLabel, deriv: Sequence[int] = (), coeff: Optional[Scalar] = None) -> Expr:
    return expr_of([Term(coeff or Scalar.one(), deltas=(DeltaFactor(lhs, rhs, tuple(deriv)),))])


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_expr(e: Expr) -> None:
    """Check label dimensions, derivative axes and bound-label usage."""
    dimensions = {}
    for term in e.terms:
        for label in term.iter_labels():
            dimensions.setdefault(label.dimension, label.name)
        _validate_term(term)

    if len(dimensions) > 1:
        detail = ", ".join(f"{name}:{dim}" for dim, name in sorted(dimensions.items()))
        raise SymbolicError(
            f"Labels of different momentum dimensions in one expression ({detail})",
            ErrorCode.SYMBOLIC_DIMENSION_MISMATCH,
        )


def _validate_term(term: Term) -> None:
    for op in term.ops:
        if op.species < 1:
            raise SymbolicError(f"Species index must be positive, got {op.species}", ErrorCode.SYMBOLIC_MALFORMED_TERM)
        if op.label is None:
            if op.deriv:
                raise SymbolicError(
                    "Discrete-mode operators cannot carry momentum derivatives",
                    ErrorCode.SYMBOLIC_MALFORMED_TERM,
                )
            continue
        _check_axes(op.deriv, op.label)
    for delta in term.deltas:
        if delta.lhs.dimension != delta.rhs.dimension:
            raise SymbolicError(
                f"Delta factor mixes dimensions: {delta.lhs.name}, {delta.rhs.name}",
                ErrorCode.SYMBOLIC_DIMENSION_MISMATCH,
            )
        _check_axes(delta.deriv, delta.lhs)
    for kernel in term.kernels:
        if isinstance(kernel.kind, ComponentPower):
            _check_axes((kernel.kind.axis,), kernel.label)
        if isinstance(kernel.kind, Energy) and kernel.kind.species < 1:
            raise SymbolicError("Energy kernel species must be positive", ErrorCode.SYMBOLIC_MALFORMED_TERM)

    used = set()
    for op in term.ops:
        if op.label is not None:
            used.add(op.label.name)
    for delta in term.deltas:
        used.update((delta.lhs.name, delta.rhs.name))
    for kernel in term.kernels:
        used.add(kernel.label.name)
    for label in term.bound:
        if label.name not in used:
            raise SymbolicError(
                f"Bound label '{label.name}' does not occur in its term",
                ErrorCode.SYMBOLIC_UNUSED_BOUND_LABEL,
                label.name,
            )


def _check_axes(axes: Sequence[int], label: MomentumLabel) -> None:
    for axis in axes:
        if not 1 <= axis <= label.dimension:
            raise SymbolicError(
                f"Axis {axis} out of range for label '{label.name}' of dimension {label.dimension}",
                ErrorCode.SYMBOLIC_DIMENSION_MISMATCH,
                label.name,
            )


# ---------------------------------------------------------------------------
# Canonical form
# ---------------------------------------------------------------------------

def canonicalize(e: Expr) -> Expr:
    """
    Bring an expression to canonical form.

    Kernels are merged and energy powers >= 2 expanded, deltas oriented,
    commuting operator runs sorted, bound labels alpha-renamed, like terms
    merged and zero terms dropped. The result is idempotent.
    """
    validate_expr(e)

    merged: Dict[Tuple, Term] = {}
    for term in e.terms:
        for candidate in _canonical_terms(term):
            key = candidate.structure_key()
            if key in merged:
                previous = merged[key]
                merged[key] = previous.with_coeff(previous.coeff + candidate.coeff)
            else:
                merged[key] = candidate

    terms = [term for term in merged.values() if not term.coeff.is_zero()]
    terms.sort(key=lambda term: term.sort_key())
    return Expr(tuple(terms))


def _canonical_terms(term: Term) -> List[Term]:
    if term.coeff.is_zero():
        return []
    unique_bound = {label.name: label for label in term.bound}
    base = Term(
        term.coeff,
        merge_kernels(term.kernels),
        term.deltas,
        term.ops,
        tuple(unique_bound[name] for name in sorted(unique_bound, key=bound_name_key)),
    )
    result = []
    for expanded in expand_energy(base):
        normalized = _alpha_normalize(expanded)
        if normalized is not None:
            result.append(normalized)
    return result


def merge_kernels(kernels: Iterable[KernelFactor]) -> Tuple[KernelFactor, ...]:
    """Combine powers of identical kernels on the same label; drop power zero."""
    powers: Dict[Tuple, Tuple[KernelFactor, int]] = {}
    for kernel in kernels:
        key = (kernel.label.name, kernel.kind.identity())
        if key in powers:
            first, power = powers[key]
            powers[key] = (first, power + kernel.power)
        else:
            powers[key] = (kernel, kernel.power)
    merged = [
        KernelFactor(first.kind.with_power(power), first.label)
        for first, power in powers.values()
        if power != 0
    ]
    return tuple(sorted(merged, key=lambda kernel: kernel.sort_key()))


def expand_energy(term: Term) -> List[Term]:
    """Rewrite Energy(i, n) with n >= 2 as Energy(i, n-2) * (sum_a k_a**2 + m_i**2)."""
    pending = [term]
    done = []
    while pending:
        current = pending.pop()
        index = next(
            (
                position
                for position, kernel in enumerate(current.kernels)
                if isinstance(kernel.kind, Energy) and kernel.kind.exponent >= 2
            ),
            None,
        )
        if index is None:
            done.append(current)
            continue

        kernel = current.kernels[index]
        lowered = KernelFactor(Energy(kernel.kind.species, kernel.kind.exponent - 2), kernel.label)
        others = current.kernels[:index] + current.kernels[index + 1:]
        for axis in range(1, kernel.label.dimension + 1):
            square = KernelFactor(ComponentPower(axis, 2), kernel.label)
            pending.append(
                Term(current.coeff, merge_kernels(others + (lowered, square)), current.deltas, current.ops, current.bound)
            )
        mass_squared = Scalar.symbol(mass_symbol(kernel.kind.species), 2)
        pending.append(
            Term(current.coeff * mass_squared, merge_kernels(others + (lowered,)), current.deltas, current.ops, current.bound)
        )
    return done


def orient_delta(delta: DeltaFactor) -> Tuple[DeltaFactor, int]:
    """Order delta labels by name; swapping contributes (-1)**|deriv|."""
    if delta.lhs.name <= delta.rhs.name:
        return delta, 1
    sign = -1 if delta.order % 2 else 1
    return DeltaFactor(delta.rhs, delta.lhs, delta.deriv), sign


def sort_commuting_runs(ops: Sequence[OperatorFactor]) -> Tuple[OperatorFactor, ...]:
    """Sort maximal runs of adjacent operators of equal dagger type; they commute exactly."""
    result: List[OperatorFactor] = []
    run: List[OperatorFactor] = []
    for op in ops:
        if run and run[-1].dagger != op.dagger:
            result.extend(sorted(run, key=lambda factor: factor.run_key()))
            run = []
        run.append(op)
    result.extend(sorted(run, key=lambda factor: factor.run_key()))
    return tuple(result)


def _finish(term: Term) -> Optional[Term]:
    coeff = term.coeff
    deltas = []
    for delta in term.deltas:
        if delta.lhs.name == delta.rhs.name and delta.order % 2:
            return None
        oriented, sign = orient_delta(delta)
        if sign < 0:
            coeff = -coeff
        deltas.append(oriented)
    return Term(
        coeff,
        tuple(sorted(term.kernels, key=lambda kernel: kernel.sort_key())),
        tuple(sorted(deltas, key=lambda delta: delta.sort_key())),
        sort_commuting_runs(term.ops),
        tuple(sorted(term.bound, key=lambda label: bound_name_key(label.name))),
    )


def _alpha_normalize(term: Term) -> Optional[Term]:
    bound = [label.name for label in term.bound]
    if not bound:
        return _finish(term)

    free = term.free_names()
    targets = []
    counter = 1
    while len(targets) < len(bound):
        candidate = f"b{counter}"
        if candidate not in free:
            targets.append(candidate)
        counter += 1

    if len(bound) > MAX_PERMUTED_BOUND_LABELS:
        finished = _finish(term)
        if finished is None:
            return None
        order = []
        for label in finished.iter_labels():
            if label.name in bound and label.name not in order:
                order.append(label.name)
        return _finish(rename_labels(finished, dict(zip(order, targets))))

    best: Optional[Term] = None
    best_key = None
    for permuted in permutations(targets):
        candidate = _finish(rename_labels(term, dict(zip(bound, permuted))))
        if candidate is None:
            return None
        key = candidate.sort_key()[:-1]
        if best is None or key < best_key:
            best, best_key = candidate, key
    return best


def rename_labels(term: Term, mapping: Mapping[str, str]) -> Term:
    """Rename labels simultaneously throughout a term (bound list included)."""
    if not mapping:
        return term

    def relabel(label: MomentumLabel) -> MomentumLabel:
        new_name = mapping.get(label.name)
        return label if new_name is None else label.renamed(new_name)

    return Term(
        term.coeff,
        tuple(KernelFactor(kernel.kind, relabel(kernel.label)) for kernel in term.kernels),
        tuple(DeltaFactor(relabel(delta.lhs), relabel(delta.rhs), delta.deriv) for delta in term.deltas),
        tuple(
            op if op.label is None else OperatorFactor(op.species, op.dagger, relabel(op.label), op.deriv)
            for op in term.ops
        ),
        tuple(relabel(label) for label in term.bound),
    )


# ---------------------------------------------------------------------------
# Arithmetic
# ---------------------------------------------------------------------------

def add_exprs(*exprs: Expr) -> Expr:
    return canonicalize(Expr(tuple(term for e in exprs for term in e.terms)))


def scale_expr(e: Expr, factor: Scalar) -> Expr:
    return canonicalize(Expr(tuple(term.with_coeff(term.coeff * factor) for term in e.terms)))


def negate(e: Expr) -> Expr:
    return scale_expr(e, Scalar.of(-1))


def subtract(e1: Expr, e2: Expr) -> Expr:
    return add_exprs(e1, negate(e2))


def multiply_terms(left: Term, right: Term) -> Term:
    """Product of two terms with bound labels renamed apart from the other factor."""
    left_names = left.label_names()
    right_names = right.label_names()
    used = set(left_names | right_names)

    left_map = {}
    for name in sorted(left.bound_names()):
        if name in right_names:
            left_map[name] = _fresh_name(used)
    left = rename_labels(left, left_map)

    left_names = left.label_names()
    right_map = {}
    for name in sorted(right.bound_names()):
        if name in left_names:
            right_map[name] = _fresh_name(used)
    right = rename_labels(right, right_map)

    return Term(
        left.coeff * right.coeff,
        left.kernels + right.kernels,
        left.deltas + right.deltas,
        left.ops + right.ops,
        left.bound + right.bound,
    )


def multiply_exprs(*exprs: Expr) -> Expr:
    """Non-commutative product, left to right."""
    if not exprs:
        return scalar_expr(Scalar.one())
    terms = list(exprs[0].terms)
    for e in exprs[1:]:
        terms = [multiply_terms(left, right) for left in terms for right in e.terms]
    return canonicalize(Expr(tuple(terms)))


def _fresh_name(used: set) -> str:
    counter = 1
    while f"b{counter}" in used:
        counter += 1
    name = f"b{counter}"
    used.add(name)
    return name


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

def kernel_derivative(kernel: KernelFactor, axis: int) -> List[Tuple[Scalar, Tuple[KernelFactor, ...]]]:
    """Derivative of one kernel with respect to component ``axis`` of its own label."""
    kind = kernel.kind
    if isinstance(kind, ComponentPower):
        if kind.axis != axis:
            return []
        replacement = () if kind.power == 1 else (KernelFactor(kind.with_power(kind.power - 1), kernel.label),)
        return [(Scalar.of(kind.power), replacement)]
    if isinstance(kind, Energy):
        replacement = (
            KernelFactor(ComponentPower(axis, 1), kernel.label),
            KernelFactor(Energy(kind.species, kind.exponent - 2), kernel.label),
        )
        return [(Scalar.of(kind.exponent), tuple(factor for factor in replacement if factor.power != 0))]
    if isinstance(kind, Profile):
        raise SymbolicError(
            f"Profile function '{kind.name}' has no derivative rule",
            ErrorCode.SYMBOLIC_NO_DERIVATIVE_RULE,
            kernel.label.name,
        )
    raise SymbolicError(f"Unknown kernel kind: {kind!r}", ErrorCode.SYMBOLIC_MALFORMED_TERM)


def differentiate_term(term: Term, label_name: str, axis: int) -> List[Term]:
    """Product-rule derivative of a single term with respect to one label component."""
    results: List[Term] = []

    for index, op in enumerate(term.ops):
        if op.label is not None and op.label.name == label_name:
            _check_axes((axis,), op.label)
            ops = term.ops[:index] + (OperatorFactor(op.species, op.dagger, op.label, op.deriv + (axis,)),) + term.ops[index + 1:]
            results.append(Term(term.coeff, term.kernels, term.deltas, ops, term.bound))

    for index, delta in enumerate(term.deltas):
        on_lhs = delta.lhs.name == label_name
        on_rhs = delta.rhs.name == label_name
        if on_lhs == on_rhs:
            continue
        _check_axes((axis,), delta.lhs)
        derived = DeltaFactor(delta.lhs, delta.rhs, delta.deriv + (axis,))
        coeff = term.coeff if on_lhs else -term.coeff
        deltas = term.deltas[:index] + (derived,) + term.deltas[index + 1:]
        results.append(Term(coeff, term.kernels, deltas, term.ops, term.bound))

    for index, kernel in enumerate(term.kernels):
        if kernel.label.name != label_name:
            continue
        _check_axes((axis,), kernel.label)
        others = term.kernels[:index] + term.kernels[index + 1:]
        for factor, replacement in kernel_derivative(kernel, axis):
            results.append(Term(term.coeff * factor, others + replacement, term.deltas, term.ops, term.bound))

    return results


def differentiate(e: Expr, label_name: str, axis: int) -> Expr:
    """Derivative of an expression with respect to component ``axis`` of ``label_name``."""
    terms = [derived for term in e.terms for derived in differentiate_term(term, label_name, axis)]
    return canonicalize(Expr(tuple(terms)))


# ---------------------------------------------------------------------------
# Delta sifting
# ---------------------------------------------------------------------------

def apply_sifting(e: Expr) -> Expr:
    """
    Integrate out bound labels that sit in a delta with a free or earlier-bound partner.

    ``int(q) ∂^α δ(k - q) f(q)`` becomes ``∂^α_k f(k)`` where the derivative acts
    only on the factors that depended on q. Deltas with no removable label stay.
    """
    canonical = canonicalize(e)
    terms: List[Term] = []
    for term in canonical.terms:
        terms.extend(_sift_term(term))
    result = canonicalize(Expr(tuple(terms)))
    logger.debug("Sifting reduced %d term(s) to %d", len(canonical.terms), len(result.terms))
    return result


def _sift_term(term: Term) -> List[Term]:
    pending = [term]
    done = []
    while pending:
        current = pending.pop()
        choice = _removable_delta(current)
        if choice is None:
            done.append(current)
            continue
        pending.extend(_eliminate(current, *choice))
    return done


def _removable_delta(term: Term) -> Optional[Tuple[int, str]]:
    bound = sorted(term.bound_names(), key=bound_name_key)
    if not bound:
        return None
    for index, delta in enumerate(term.deltas):
        lhs, rhs = delta.lhs.name, delta.rhs.name
        if lhs == rhs:
            continue
        lhs_bound, rhs_bound = lhs in bound, rhs in bound
        if lhs_bound and rhs_bound:
            eliminated = lhs if bound.index(lhs) > bound.index(rhs) else rhs
            return index, eliminated
        if lhs_bound:
            return index, lhs
        if rhs_bound:
            return index, rhs
    return None


def _eliminate(term: Term, index: int, eliminated: str) -> List[Term]:
    delta = term.deltas[index]
    coeff = term.coeff
    if delta.lhs.name == eliminated:
        partner = delta.rhs
        if delta.order % 2:
            coeff = -coeff
    else:
        partner = delta.lhs

    remaining = Term(
        coeff,
        term.kernels,
        term.deltas[:index] + term.deltas[index + 1:],
        term.ops,
        tuple(label for label in term.bound if label.name != eliminated),
    )
    # Factors that depended on the eliminated label are the only ones differentiated.
    pending = [rename_labels(remaining, {eliminated: _SIFT_PLACEHOLDER})]
    for axis in delta.deriv:
        pending = [derived for current in pending for derived in differentiate_term(current, _SIFT_PLACEHOLDER, axis)]
    return [rename_labels(current, {_SIFT_PLACEHOLDER: partner.name}) for current in pending]


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------

def exprs_equal(e1: Expr, e2: Expr, sift: bool = False) -> bool:
    """Syntactic equality after canonicalization (optionally after delta sifting)."""
    if sift:
        e1, e2 = apply_sifting(e1), apply_sifting(e2)
    return canonicalize(Expr(e1.terms + negate(e2).terms)).is_zero
