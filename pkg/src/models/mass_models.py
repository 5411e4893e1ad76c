"""
Mass-formula data models: quantum numbers, formulas, particle tables and fit results.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from numbers import Real
from typing import Any, Dict, List, Optional, Tuple, Union

Rational = Union[Fraction, int]


def as_fraction(value: Union[str, Real]) -> Fraction:
    """Parse ``p/q``, integers and decimals exactly."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(str(value))


def _is_half_integer(value: Fraction) -> bool:
    return (2 * value).denominator == 1


class MassFormulaKind(Enum):
    """Supported mass operators and the quantity they predict."""
    TRIPLET_LINEAR = "TRIPLET-LINEAR"
    TRIPLET_SPIN = "TRIPLET-SPIN"
    TRAJ_HADRON = "TRAJ-HADRON"
    TRAJ_MESON = "TRAJ-MESON"
    OKUBO_HADRON = "OKUBO-HADRON"
    OKUBO_MESON = "OKUBO-MESON"

    @classmethod
    def parse(cls, name: str) -> "MassFormulaKind":
        normalized = name.strip().upper().replace("_", "-")
        for kind in cls:
            if kind.value == normalized:
                return kind
        raise ValueError(f"Unknown mass formula kind: {name}")

    @property
    def coefficient_names(self) -> Tuple[str, ...]:
        if self in (MassFormulaKind.TRAJ_HADRON, MassFormulaKind.TRAJ_MESON):
            return ("a", "b")
        return ("a", "b", "c")

    @property
    def arity(self) -> int:
        return len(self.coefficient_names)

    @property
    def predicts_square(self) -> bool:
        """True when the formula gives M^2 rather than M."""
        return self not in (MassFormulaKind.TRAJ_HADRON, MassFormulaKind.OKUBO_HADRON)

    @property
    def required_numbers(self) -> Tuple[str, ...]:
        if self == MassFormulaKind.TRIPLET_LINEAR:
            return ("Y", "J")
        if self == MassFormulaKind.TRIPLET_SPIN:
            return ("S", "Y", "J")
        if self in (MassFormulaKind.TRAJ_HADRON, MassFormulaKind.TRAJ_MESON):
            return ("S",)
        return ("Y", "J")


@dataclass(frozen=True)
class QuantumNumbers:
    """Hypercharge Y, isospin J and spin S; any of them may be absent."""
    Y: Optional[Fraction] = None
    J: Optional[Fraction] = None
    S: Optional[Fraction] = None

    def __post_init__(self):
        for name in ("Y", "J", "S"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, as_fraction(value))
        for name in ("J", "S"):
            value = getattr(self, name)
            if value is not None and (value < 0 or not _is_half_integer(value)):
                raise ValueError(f"{name} must be a non-negative half-integer, got {value}")

    def get(self, name: str) -> Optional[Fraction]:
        return getattr(self, name)

    def to_dict(self) -> Dict[str, Optional[str]]:
        return {name: None if self.get(name) is None else str(self.get(name)) for name in ("Y", "J", "S")}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "QuantumNumbers":
        return cls(**{name: data[name] for name in ("Y", "J", "S") if data.get(name) is not None})


@dataclass
class MassFormula:
    """A mass formula kind together with its coefficients (Fractions stay exact)."""
    kind: MassFormulaKind
    coeffs: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        expected = set(self.kind.coefficient_names)
        if set(self.coeffs) != expected:
            raise ValueError(
                f"{self.kind.value} needs coefficients {sorted(expected)}, got {sorted(self.coeffs)}"
            )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "coeffs": {name: _plain(self.coeffs[name]) for name in self.kind.coefficient_names},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MassFormula":
        return cls(MassFormulaKind.parse(data["kind"]), dict(data["coeffs"]))


def _plain(value: Any) -> Any:
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else value.numerator
    return value


@dataclass(frozen=True)
class FormulaValue:
    """Evaluated formula: ``value`` is M or M^2 depending on ``squared``; ``mass`` is always M."""
    value: Any
    squared: bool
    mass: Any


@dataclass(frozen=True)
class ParticleRow:
    name: str
    mass_mev: float
    numbers: QuantumNumbers
    multiplet: str = ""

    def __post_init__(self):
        if self.mass_mev <= 0:
            raise ValueError(f"Particle '{self.name}' must have a positive mass")


@dataclass
class ParticleTable:
    """Particles ingested from a CSV table."""
    rows: List[ParticleRow] = field(default_factory=list)
    source: str = ""

    def __len__(self) -> int:
        return len(self.rows)

    def multiplets(self) -> List[str]:
        return sorted({row.multiplet for row in self.rows})

    def select(self, multiplet: str) -> "ParticleTable":
        return ParticleTable([row for row in self.rows if row.multiplet == multiplet], self.source)


@dataclass
class FitResult:
    """Least-squares fit of a mass formula over a particle table."""
    kind: MassFormulaKind
    coeffs: Dict[str, float]
    residuals: List[float]
    rms: float
    names: List[str] = field(default_factory=list)

    def formula(self) -> MassFormula:
        return MassFormula(self.kind, dict(self.coeffs))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "coeffs": {name: self.coeffs[name] for name in self.kind.coefficient_names},
            "residuals": list(self.residuals),
            "rms": self.rms,
        }


@dataclass
class JointSpectrum:
    """
    Single generator for a commuting diagonal family.

    ``generator`` holds the diagonal of A; ``lookups[n]`` maps each eigenvalue
    of A to the matching eigenvalue of the n-th input, so that phi_n(A) = A_n.
    """
    generator: List[int]
    lookups: List[Dict[int, float]]
    points: List[Tuple[float, ...]]

    def reconstruct(self, index: int) -> List[float]:
        lookup = self.lookups[index]
        return [lookup[value] for value in self.generator]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "generator": list(self.generator),
            "lookups": [{str(key): value for key, value in sorted(lookup.items())} for lookup in self.lookups],
        }
