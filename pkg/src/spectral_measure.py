"""
Direct-integral mass spectra.

A measure is a finite set of point masses (stable particles) plus disjoint
intervals carrying polynomial densities (smeared resonances). Moments use
Gauss-Legendre quadrature per interval; sampling inverts the CDF with an
explicitly seeded generator.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np

from .exceptions import ErrorCode, MeasureError
from .models.measure import Atom, Interval, MassMeasure, MassSample, SampleBatch, Support
from .utils.logging_utils import get_logger

logger = get_logger("spectral_measure")

NORMALIZATION_TOLERANCE = 1e-12
DEFAULT_NODES = 32
CDF_TABLE_POINTS = 4097
NEWTON_STEPS = 4


def _as_atom(item: Union[Atom, Dict[str, Any], Sequence[float]]) -> Atom:
    if isinstance(item, Atom):
        return item
    if isinstance(item, dict):
        return Atom.from_dict(item)
    return Atom(*item)


def _as_interval(item: Union[Interval, Dict[str, Any], Sequence[Any]]) -> Interval:
    if isinstance(item, Interval):
        return item
    if isinstance(item, dict):
        return Interval.from_dict(item)
    return Interval(*item)


def make_measure(
    atoms: Iterable[Any] = (),
    intervals: Iterable[Any] = (),
    normalize: bool = False,
) -> MassMeasure:
    """
    Validate and build a mass measure.

    Args:
        atoms: ``Atom`` objects, ``{"m", "w"}`` dicts or ``(m, w)`` pairs
        intervals: ``Interval`` objects, ``{"lo", "hi", "coeffs", "spin"}`` dicts or tuples
        normalize: rescale weights and densities to total mass 1 instead of rejecting

    Raises:
        MeasureError: overlaps, negative densities, zero or (without ``normalize``)
            non-unit total mass
    """
    atoms = sorted((_as_atom(item) for item in atoms), key=lambda atom: atom.mass)
    intervals = sorted((_as_interval(item) for item in intervals), key=lambda interval: interval.lower)

    for atom in atoms:
        if atom.mass <= 0 or atom.weight <= 0:
            raise MeasureError(f"Atom at m={atom.mass} needs positive mass and weight", ErrorCode.MEASURE_INVALID)
    for interval in intervals:
        if interval.lower < 0 or interval.lower >= interval.upper:
            raise MeasureError(f"Invalid interval [{interval.lower}, {interval.upper}]", ErrorCode.MEASURE_INVALID)
        if interval.minimum_density() < -NORMALIZATION_TOLERANCE:
            raise MeasureError(
                f"Density on [{interval.lower}, {interval.upper}] is negative", ErrorCode.MEASURE_NEGATIVE_DENSITY
            )

    for previous, current in zip(intervals, intervals[1:]):
        if current.lower < previous.upper:
            raise MeasureError(
                f"Intervals [{previous.lower}, {previous.upper}] and [{current.lower}, {current.upper}] overlap",
                ErrorCode.MEASURE_OVERLAP,
            )
    for previous, current in zip(atoms, atoms[1:]):
        if previous.mass == current.mass:
            raise MeasureError(f"Duplicate atom at m={current.mass}", ErrorCode.MEASURE_OVERLAP)
    for atom in atoms:
        for interval in intervals:
            if interval.contains(atom.mass):
                raise MeasureError(
                    f"Atom at m={atom.mass} lies in [{interval.lower}, {interval.upper}]", ErrorCode.MEASURE_OVERLAP
                )

    measure = MassMeasure(tuple(atoms), tuple(intervals))
    total = measure.total
    if total <= NORMALIZATION_TOLERANCE:
        raise MeasureError("Measure has zero total mass", ErrorCode.MEASURE_ZERO_TOTAL)
    if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
        if not normalize:
            raise MeasureError(f"Measure total is {total!r}, expected 1", ErrorCode.MEASURE_INVALID)
        measure = MassMeasure(
            tuple(Atom(atom.mass, atom.weight / total, atom.spin) for atom in atoms),
            tuple(interval.scaled(1.0 / total) for interval in intervals),
        )
        logger.debug("Normalized measure with total %.12g", total)
    return measure


def point_measure(mass: float, spin: str = "") -> MassMeasure:
    return make_measure([Atom(mass, 1.0, spin)])


def uniform_smearing(center: float, width: float, spin: str = "") -> MassMeasure:
    """Unit-mass uniform density on ``[center - width, center + width]``."""
    if width <= 0:
        raise MeasureError("Smearing width must be positive", ErrorCode.MEASURE_INVALID)
    density = 1.0 / (2.0 * width)
    return make_measure(intervals=[Interval(center - width, center + width, (density,), spin)], normalize=True)


def _power(masses: np.ndarray, order: int, of: str) -> np.ndarray:
    if of not in ("M", "M2"):
        raise MeasureError(f"Moment variable must be M or M2, got {of}", ErrorCode.MEASURE_INVALID)
    base = masses if of == "M" else masses ** 2
    return base ** order


def moment(measure: MassMeasure, order: int, of: str = "M", nodes: int = DEFAULT_NODES) -> float:
    """``Σ w_k φ(m_k)^p + Σ ∫ φ(m)^p f_i(m) dm`` with φ(m) = m or m^2."""
    if order < 0:
        raise MeasureError("Moment order must be non-negative", ErrorCode.MEASURE_INVALID)
    total = 0.0
    if measure.atoms:
        masses = np.array([atom.mass for atom in measure.atoms])
        weights = np.array([atom.weight for atom in measure.atoms])
        total += float(np.sum(weights * _power(masses, order, of)))

    abscissae, weights = np.polynomial.legendre.leggauss(nodes)
    for interval in measure.intervals:
        half = 0.5 * (interval.upper - interval.lower)
        middle = 0.5 * (interval.upper + interval.lower)
        points = half * abscissae + middle
        total += float(half * np.sum(weights * _power(points, order, of) * interval.density(points)))
    return total


def support(measure: MassMeasure) -> Support:
    return Support(
        tuple(atom.mass for atom in measure.atoms),
        tuple((interval.lower, interval.upper) for interval in measure.intervals),
    )


def _inverse_cdf(interval: Interval, uniforms: np.ndarray) -> np.ndarray:
    if len(interval.coeffs) == 1:
        return interval.lower + uniforms * (interval.upper - interval.lower)

    antiderivative = interval.density.integ()
    start, weight = antiderivative(interval.lower), interval.weight
    table = np.linspace(interval.lower, interval.upper, CDF_TABLE_POINTS)
    cdf = (antiderivative(table) - start) / weight
    values = np.interp(uniforms, cdf, table)
    for _ in range(NEWTON_STEPS):
        density = interval.density(values) / weight
        step = np.where(density > 0, ((antiderivative(values) - start) / weight - uniforms) / np.where(density > 0, density, 1.0), 0.0)
        values = np.clip(values - step, interval.lower, interval.upper)
    return values


def sample(measure: MassMeasure, seed: int, count: int) -> SampleBatch:
    """
    Draw ``count`` masses by inverse-CDF sampling.

    Components are chosen by weight first, then each interval's draws are
    generated in interval order, so equal seeds give identical streams.
    """
    if count < 1:
        raise MeasureError("Sample count must be at least 1", ErrorCode.MEASURE_INVALID)
    rng = np.random.default_rng(seed)
    components: List[Union[Atom, Interval]] = list(measure.atoms) + list(measure.intervals)
    weights = np.array([component.weight for component in components])
    choices = rng.choice(len(components), size=count, p=weights / weights.sum())

    masses = np.zeros(count)
    spins = [""] * count
    for index, component in enumerate(components):
        selected = np.flatnonzero(choices == index)
        if not selected.size:
            continue
        if isinstance(component, Atom):
            masses[selected] = component.mass
        else:
            masses[selected] = _inverse_cdf(component, rng.random(selected.size))
        for position in selected:
            spins[position] = component.spin
    return SampleBatch(seed, [MassSample(float(mass), spin) for mass, spin in zip(masses, spins)])


def delta_limit_errors(center: float, widths: Sequence[float], order: int = 2, of: str = "M", nodes: int = DEFAULT_NODES) -> List[float]:
    """``|moment(uniform_smearing(center, eps)) - center^order|`` for each width."""
    exact = moment(point_measure(center), order, of, nodes)
    return [abs(moment(uniform_smearing(center, width), order, of, nodes) - exact) for width in widths]


def observed_convergence_order(widths: Sequence[float], errors: Sequence[float]) -> float:
    """Slope of log(error) against log(width)."""
    errors = np.asarray(errors, dtype=float)
    if np.any(errors <= 0):
        raise MeasureError("Convergence order needs strictly positive errors", ErrorCode.MEASURE_INVALID)
    slope, _ = np.polyfit(np.log(np.asarray(widths, dtype=float)), np.log(errors), 1)
    return float(slope)


def load_measure(path: Union[str, Path], normalize: bool = False) -> MassMeasure:
    """Read ``{atoms: [{m, w}], intervals: [{lo, hi, coeffs, spin}]}`` JSON."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise MeasureError(f"Cannot read measure from {path}: {exc}", ErrorCode.MEASURE_INVALID, exc) from exc
    if not isinstance(data, dict):
        raise MeasureError("Measure JSON must be an object", ErrorCode.MEASURE_INVALID)
    try:
        return make_measure(data.get("atoms", []), data.get("intervals", []), normalize)
    except (KeyError, TypeError, ValueError) as exc:
        raise MeasureError(f"Malformed measure entry in {path}: {exc}", ErrorCode.MEASURE_INVALID, exc) from exc
