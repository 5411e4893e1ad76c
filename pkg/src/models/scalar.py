"""
Exact Gaussian-rational scalars with monomials in opaque real symbols.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Tuple, Union

from ..exceptions import ErrorCode, SymbolicError

Number = Union[int, Fraction, str]
Monomial = Tuple[Tuple[str, int], ...]


def normalize_monomial(atoms: Iterable[Tuple[str, int]]) -> Monomial:
    """Merge repeated symbols, drop zero exponents and sort by name."""
    merged: Dict[str, int] = {}
    for name, exponent in atoms:
        merged[name] = merged.get(name, 0) + int(exponent)
    return tuple(sorted((name, power) for name, power in merged.items() if power != 0))


@dataclass(frozen=True)
class Scalar:
    """
    Coefficient ``(re + i*im) * prod(symbol**exponent)``.

    ``re`` and ``im`` are exact fractions; the zero scalar never carries atoms.
    """
    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)
    atoms: Monomial = ()

    def __post_init__(self):
        re = Fraction(self.re)
        im = Fraction(self.im)
        atoms = normalize_monomial(self.atoms)
        if re == 0 and im == 0:
            atoms = ()
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def of(cls, value: Number = 0, imag: Number = 0, atoms: Iterable[Tuple[str, int]] = ()) -> "Scalar":
        return cls(Fraction(value), Fraction(imag), tuple(atoms))

    @classmethod
    def zero(cls) -> "Scalar":
        return cls()

    @classmethod
    def one(cls) -> "Scalar":
        return cls(Fraction(1))

    @classmethod
    def i(cls) -> "Scalar":
        return cls(Fraction(0), Fraction(1))

    @classmethod
    def symbol(cls, name: str, exponent: int = 1) -> "Scalar":
        return cls(Fraction(1), Fraction(0), ((name, exponent),))

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def is_real(self) -> bool:
        return self.im == 0

    def numeric_part(self) -> "Scalar":
        """The Gaussian rational with the monomial stripped."""
        return Scalar(self.re, self.im)

    def __add__(self, other: "Scalar") -> "Scalar":
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self.atoms != other.atoms:
            raise SymbolicError(
                "Cannot add scalars with different symbol monomials",
                ErrorCode.SYMBOLIC_MALFORMED_TERM,
            )
        return Scalar(self.re + other.re, self.im + other.im, self.atoms)

    def __neg__(self) -> "Scalar":
        return Scalar(-self.re, -self.im, self.atoms)

    def __sub__(self, other: "Scalar") -> "Scalar":
        return self + (-other)

    def __mul__(self, other: Union["Scalar", int, Fraction]) -> "Scalar":
        if not isinstance(other, Scalar):
            other = Scalar(Fraction(other))
        return Scalar(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
            self.atoms + other.atoms,
        )

    __rmul__ = __mul__

    def conjugate(self) -> "Scalar":
        return Scalar(self.re, -self.im, self.atoms)

    def evaluate(self, bindings: Mapping[str, float]) -> complex:
        """Numeric value with every symbol bound; raises KeyError on a missing binding."""
        value = complex(float(self.re), float(self.im))
        for name, exponent in self.atoms:
            value *= float(bindings[name]) ** exponent
        return value

    def sort_key(self) -> Tuple:
        return (self.atoms, self.re, self.im)

    def to_dict(self) -> Dict[str, object]:
        return {
            "re": str(self.re),
            "im": str(self.im),
            "atoms": [[name, exponent] for name, exponent in self.atoms],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "Scalar":
        return cls(
            Fraction(str(data.get("re", "0"))),
            Fraction(str(data.get("im", "0"))),
            tuple((str(name), int(exponent)) for name, exponent in data.get("atoms", [])),
        )
