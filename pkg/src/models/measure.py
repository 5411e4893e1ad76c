"""
Mass measure data model: point masses for stable particles and smeared
intervals for resonances.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np
from numpy.polynomial import Polynomial


@dataclass(frozen=True)
class Atom:
    """Point mass ``weight * delta(m - mass)``."""
    mass: float
    weight: float
    spin: str = ""

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {"m": self.mass, "w": self.weight}
        if self.spin:
            result["spin"] = self.spin
        return result

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Atom":
        return cls(float(data["m"]), float(data["w"]), str(data.get("spin", "")))


@dataclass(frozen=True)
class Interval:
    """
    Smeared mass on ``[lower, upper]`` with a polynomial density.

    ``coeffs`` are the density coefficients in ascending powers of m.
    """
    lower: float
    upper: float
    coeffs: Tuple[float, ...] = (1.0,)
    spin: str = ""

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(value) for value in self.coeffs))

    @property
    def density(self) -> Polynomial:
        return Polynomial(self.coeffs)

    @property
    def weight(self) -> float:
        antiderivative = self.density.integ()
        return float(antiderivative(self.upper) - antiderivative(self.lower))

    def minimum_density(self) -> float:
        """Smallest density value on the interval (endpoints and interior critical points)."""
        candidates = [self.lower, self.upper]
        if len(self.coeffs) > 2:
            for root in np.atleast_1d(self.density.deriv().roots()):
                if abs(root.imag) < 1e-12 and self.lower < root.real < self.upper:
                    candidates.append(float(root.real))
        return float(min(self.density(candidates)))

    def scaled(self, factor: float) -> "Interval":
        return Interval(self.lower, self.upper, tuple(value * factor for value in self.coeffs), self.spin)

    def contains(self, mass: float) -> bool:
        return self.lower <= mass <= self.upper

    def to_dict(self) -> Dict[str, Any]:
        return {"lo": self.lower, "hi": self.upper, "coeffs": list(self.coeffs), "spin": self.spin}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Interval":
        return cls(float(data["lo"]), float(data["hi"]), tuple(data.get("coeffs", [1.0])), str(data.get("spin", "")))


@dataclass(frozen=True)
class MassMeasure:
    """Normalized mass measure; construct through ``spectral_measure.make_measure``."""
    atoms: Tuple[Atom, ...] = ()
    intervals: Tuple[Interval, ...] = ()

    @property
    def total(self) -> float:
        return sum(atom.weight for atom in self.atoms) + sum(interval.weight for interval in self.intervals)

    def is_discrete(self) -> bool:
        return not self.intervals

    def to_dict(self) -> Dict[str, Any]:
        return {
            "atoms": [atom.to_dict() for atom in self.atoms],
            "intervals": [interval.to_dict() for interval in self.intervals],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MassMeasure":
        return cls(
            tuple(Atom.from_dict(item) for item in data.get("atoms", [])),
            tuple(Interval.from_dict(item) for item in data.get("intervals", [])),
        )


@dataclass(frozen=True)
class Support:
    """Atoms plus closed intervals; ``squared()`` maps it to the spectrum of M^2."""
    points: Tuple[float, ...] = ()
    intervals: Tuple[Tuple[float, float], ...] = ()

    def squared(self) -> "Support":
        return Support(
            tuple(point ** 2 for point in self.points),
            tuple((lower ** 2, upper ** 2) for lower, upper in self.intervals),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"points": list(self.points), "intervals": [list(pair) for pair in self.intervals]}


@dataclass(frozen=True)
class MassSample:
    mass: float
    spin: str = ""


@dataclass
class SampleBatch:
    """Samples drawn from a measure with the seed that produced them."""
    seed: int
    samples: List[MassSample] = field(default_factory=list)

    def masses(self) -> np.ndarray:
        return np.array([sample.mass for sample in self.samples])

    def to_dict(self) -> Dict[str, Any]:
        return {"seed": self.seed, "samples": [[sample.mass, sample.spin] for sample in self.samples]}
