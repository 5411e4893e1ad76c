"""
Expression model for momentum-labeled bosonic operator algebra.

An ``Expr`` is a sum of ``Term`` objects. Each term is a scalar coefficient
times kernel factors, delta factors and an ordered operator product, with an
optional set of bound (integrated) momentum labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, Optional, Tuple, Union

from .scalar import Scalar

Axes = Tuple[int, ...]

DISCRETE = "."


@dataclass(frozen=True)
class MomentumLabel:
    """A continuous momentum variable such as k, k' or q."""
    name: str
    dimension: int = 3

    def renamed(self, name: str) -> "MomentumLabel":
        return MomentumLabel(name, self.dimension)

    def __str__(self) -> str:
        return self.name


def multi_index(axes: Axes, dimension: int) -> Tuple[int, ...]:
    """Convert a sorted axis multiset (1-based) into per-component derivative orders."""
    counts = [0] * dimension
    for axis in axes:
        counts[axis - 1] += 1
    return tuple(counts)


def sorted_axes(axes) -> Axes:
    return tuple(sorted(int(axis) for axis in axes))


@dataclass(frozen=True)
class OperatorFactor:
    """
    ``∂^deriv a_species(label)`` or its creation counterpart.

    ``label`` is None for the discrete oscillator regime. ``deriv`` is stored as
    the sorted multiset of differentiated axes.
    """
    species: int
    dagger: bool
    label: Optional[MomentumLabel] = None
    deriv: Axes = ()

    def __post_init__(self):
        object.__setattr__(self, "deriv", sorted_axes(self.deriv))

    @property
    def is_discrete(self) -> bool:
        return self.label is None

    @property
    def label_name(self) -> str:
        return DISCRETE if self.label is None else self.label.name

    def sort_key(self) -> Tuple:
        return (self.dagger, self.species, self.label_name, self.deriv)

    def run_key(self) -> Tuple:
        return (self.species, self.label_name, self.deriv)


@dataclass(frozen=True)
class DeltaFactor:
    """``∂^deriv δ(lhs - rhs)`` with derivatives taken with respect to ``lhs``."""
    lhs: MomentumLabel
    rhs: MomentumLabel
    deriv: Axes = ()

    def __post_init__(self):
        object.__setattr__(self, "deriv", sorted_axes(self.deriv))

    @property
    def order(self) -> int:
        return len(self.deriv)

    def sort_key(self) -> Tuple:
        return (self.lhs.name, self.rhs.name, self.deriv)


@dataclass(frozen=True)
class ComponentPower:
    """``k_axis ** power``."""
    axis: int
    power: int = 1

    def identity(self) -> Tuple:
        return ("k", self.axis)

    def with_power(self, power: int) -> "ComponentPower":
        return ComponentPower(self.axis, power)


@dataclass(frozen=True)
class Energy:
    """``(k**2 + m_species**2) ** (exponent / 2)``."""
    species: int
    exponent: int = 1

    @property
    def power(self) -> int:
        return self.exponent

    def identity(self) -> Tuple:
        return ("w", self.species)

    def with_power(self, power: int) -> "Energy":
        return Energy(self.species, power)


@dataclass(frozen=True)
class Profile:
    """An opaque smooth function of momentum (a wave-packet profile), raised to ``power``."""
    name: str
    power: int = 1

    def identity(self) -> Tuple:
        return ("fn", self.name)

    def with_power(self, power: int) -> "Profile":
        return Profile(self.name, power)


KernelKind = Union[ComponentPower, Energy, Profile]


@dataclass(frozen=True)
class KernelFactor:
    kind: KernelKind
    label: MomentumLabel

    @property
    def power(self) -> int:
        return self.kind.power

    def sort_key(self) -> Tuple:
        return (self.label.name, self.kind.identity(), self.kind.power)


@dataclass(frozen=True)
class Term:
    coeff: Scalar
    kernels: Tuple[KernelFactor, ...] = ()
    deltas: Tuple[DeltaFactor, ...] = ()
    ops: Tuple[OperatorFactor, ...] = ()
    bound: Tuple[MomentumLabel, ...] = ()

    def iter_labels(self) -> Iterator[MomentumLabel]:
        """Labels in first-occurrence order (operators, deltas, kernels); bound labels last."""
        for op in self.ops:
            if op.label is not None:
                yield op.label
        for delta in self.deltas:
            yield delta.lhs
            yield delta.rhs
        for kernel in self.kernels:
            yield kernel.label
        yield from self.bound

    def label_names(self) -> FrozenSet[str]:
        return frozenset(label.name for label in self.iter_labels())

    def bound_names(self) -> FrozenSet[str]:
        return frozenset(label.name for label in self.bound)

    def free_names(self) -> FrozenSet[str]:
        return self.label_names() - self.bound_names()

    def structure_key(self) -> Tuple:
        """Everything except the numeric coefficient; like terms share it."""
        return (
            tuple(label.name for label in self.bound),
            tuple(kernel.sort_key() for kernel in self.kernels),
            tuple(delta.sort_key() for delta in self.deltas),
            tuple(op.sort_key() for op in self.ops),
            self.coeff.atoms,
        )

    def sort_key(self) -> Tuple:
        return (
            len(self.ops),
            tuple(op.sort_key() for op in self.ops),
            tuple(delta.sort_key() for delta in self.deltas),
            tuple(kernel.sort_key() for kernel in self.kernels),
            tuple(label.name for label in self.bound),
            self.coeff.sort_key(),
        )

    def with_coeff(self, coeff: Scalar) -> "Term":
        return Term(coeff, self.kernels, self.deltas, self.ops, self.bound)


@dataclass(frozen=True)
class Expr:
    """A finite sum of terms; the empty sum is zero."""
    terms: Tuple[Term, ...] = field(default_factory=tuple)

    @property
    def bound(self) -> FrozenSet[str]:
        names = set()
        for term in self.terms:
            names.update(term.bound_names())
        return frozenset(names)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def labels(self) -> Dict[str, MomentumLabel]:
        found: Dict[str, MomentumLabel] = {}
        for term in self.terms:
            for label in term.iter_labels():
                found.setdefault(label.name, label)
        return found

    def free_names(self) -> FrozenSet[str]:
        names = set()
        for term in self.terms:
            names.update(term.free_names())
        return frozenset(names)

    def __len__(self) -> int:
        return len(self.terms)
