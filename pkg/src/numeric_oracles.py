"""
Independent numeric checks for the symbolic layer.

* truncated Fock matrices for discrete-mode expressions (normal ordering),
* Gaussian mollifiers for delta sifting and the derivative-delta sign,
* grid application of one-particle PDO commutators and Casimirs.
"""

from __future__ import annotations

from itertools import product
from math import factorial
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import trapezoid

from .exceptions import ErrorCode, NumericError
from .fock_numeric import Grid, eval_pdo, profile
from .models.expression import Expr
from .pdo_algebra import METRIC, PDO, _m_entry, levi_civita
from .utils.logging_utils import get_logger

logger = get_logger("numeric_oracles")


# ---------------------------------------------------------------------------
# Truncated Fock space
# ---------------------------------------------------------------------------

def annihilation_matrices(species_count: int, cutoff: int) -> List[sp.csr_matrix]:
    """Annihilators on the tensor product of single modes truncated at ``cutoff`` quanta."""
    single = sp.diags(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1, format="csr")
    identity = sp.identity(cutoff + 1, format="csr")
    matrices = []
    for mode in range(species_count):
        factors = [single if index == mode else identity for index in range(species_count)]
        matrix = factors[0]
        for factor in factors[1:]:
            matrix = sp.kron(matrix, factor, format="csr")
        matrices.append(matrix)
    return matrices


def occupation_mask(species_count: int, cutoff: int, max_total: int) -> np.ndarray:
    """Basis states (first mode slowest) whose total occupation is at most ``max_total``."""
    totals = np.array([sum(state) for state in product(range(cutoff + 1), repeat=species_count)])
    return totals <= max_total


def fock_matrix(e: Expr, species_count: int, cutoff: int) -> sp.csr_matrix:
    """
    Matrix of a discrete-mode expression on the truncated Fock space.

    Raises:
        NumericError: for momentum labels, deltas, kernels or symbolic atoms
    """
    annihilators = annihilation_matrices(species_count, cutoff)
    creators = [matrix.conj().T.tocsr() for matrix in annihilators]
    dimension = (cutoff + 1) ** species_count
    total = sp.csr_matrix((dimension, dimension), dtype=complex)
    for term in e.terms:
        if term.kernels or term.deltas or term.bound or term.coeff.atoms:
            raise NumericError(
                "Only numeric discrete-mode products have a Fock matrix",
                ErrorCode.NUMERIC_UNSUPPORTED_EXPRESSION,
                "fock_matrix",
            )
        matrix = sp.identity(dimension, dtype=complex, format="csr")
        for op in term.ops:
            if not op.is_discrete:
                raise NumericError("Continuum operator in a Fock matrix", ErrorCode.NUMERIC_UNSUPPORTED_EXPRESSION, "fock_matrix")
            matrix = matrix @ (creators if op.dagger else annihilators)[op.species - 1]
        total = total + complex(float(term.coeff.re), float(term.coeff.im)) * matrix
    return total.tocsr()


def fock_agreement(first: Expr, second: Expr, species_count: int, max_total: int = 2) -> float:
    """
    Largest entry of ``(M1 - M2) P`` where P projects on occupations <= ``max_total``.

    The cutoff is chosen above every intermediate occupation, so the comparison
    is free of truncation effects.
    """
    longest = max([len(term.ops) for term in first.terms + second.terms] + [0])
    cutoff = max_total + longest
    mask = occupation_mask(species_count, cutoff, max_total)
    difference = (fock_matrix(first, species_count, cutoff) - fock_matrix(second, species_count, cutoff)).toarray()
    return float(np.max(np.abs(difference[:, mask]))) if difference.size else 0.0


# ---------------------------------------------------------------------------
# Mollified deltas
# ---------------------------------------------------------------------------

def mollified_delta_derivative(values: np.ndarray, order: int, width: float) -> np.ndarray:
    """``d^order/dx^order`` of a unit Gaussian of the given width, evaluated at ``values``."""
    scaled = values / width
    hermite = np.polynomial.hermite_e.HermiteE.basis(order)(scaled)
    gaussian = np.exp(-scaled ** 2 / 2) / (width * np.sqrt(2 * np.pi))
    return (-1) ** order * hermite * gaussian / width ** order


def delta_derivative_integral(
    test_function: Callable[[np.ndarray], np.ndarray],
    center: float,
    order: int = 1,
    width: float = 0.01,
    points: int = 20001,
    half_width: float = 1.0,
) -> float:
    """
    ``∫dq ∂^order_q δ_w(q - center) f(q)`` on a fine 1-D grid.

    As the width shrinks this tends to ``(-1)^order f^(order)(center)``.
    """
    grid = np.linspace(center - half_width, center + half_width, points)
    kernel = mollified_delta_derivative(grid - center, order, width)
    return float(trapezoid(kernel * test_function(grid), grid))


def delta_derivative_sign(order: int = 1, center: float = 0.3, width: float = 0.005) -> int:
    """Sign s with ``∫dq ∂^n_q δ(q - k) f(q) = s f^(n)(k)`` measured on ``f = exp``."""
    measured = delta_derivative_integral(np.exp, center, order, width)
    return 1 if measured / np.exp(center) > 0 else -1


def taylor_sift_check(order: int, center: float = 0.2, width: float = 0.005) -> float:
    """Relative error of the sifting rule on ``f(q) = q^(order+2) / (order+2)!``."""
    degree = order + 2

    def polynomial(q: np.ndarray) -> np.ndarray:
        return q ** degree / factorial(degree)

    exact = (-1) ** order * center ** (degree - order) / factorial(degree - order)
    measured = delta_derivative_integral(polynomial, center, order, width)
    return abs(measured - exact) / max(abs(exact), 1e-300)


# ---------------------------------------------------------------------------
# PDO grid oracle
# ---------------------------------------------------------------------------

def wavepacket(grid: Grid, width: float = 0.5, center: Optional[Sequence[float]] = None) -> np.ndarray:
    return profile(grid, width, center)


def commutator_residual(
    first: PDO,
    second: PDO,
    expected: PDO,
    grid: Grid,
    masses: Sequence[float],
    width: float = 0.5,
) -> float:
    """Relative norm of ``(AB - BA - C) psi`` for a Gaussian packet, all operators applied numerically."""
    psi = wavepacket(grid, width)
    ab = eval_pdo(first, grid, eval_pdo(second, grid, psi, masses), masses)
    ba = eval_pdo(second, grid, eval_pdo(first, grid, psi, masses), masses)
    target = eval_pdo(expected, grid, psi, masses)
    scale = max(np.linalg.norm(ab), np.linalg.norm(ba), np.linalg.norm(target), 1e-300)
    return float(np.linalg.norm(ab - ba - target) / scale)


def pauli_lubanski_numeric(gens: Mapping[str, PDO], grid: Grid, masses: Sequence[float], psi: np.ndarray) -> np.ndarray:
    """``W_α W^α psi`` with every composition done on the grid."""
    if grid.dimension != 3:
        raise NumericError("The Pauli-Lubanski check needs a 3-D grid", ErrorCode.NUMERIC_KIND_MISMATCH, "W2")

    def apply_w(alpha: int, values: np.ndarray) -> np.ndarray:
        total = np.zeros_like(values)
        for beta, gamma, delta in product(range(4), repeat=3):
            epsilon = levi_civita((alpha, beta, gamma, delta))
            entry = _m_entry(gamma, delta)
            if not epsilon or entry is None:
                continue
            name, sign = entry
            m_values = eval_pdo(gens[name], grid, values, masses) * (sign * METRIC[gamma] * METRIC[delta])
            total += 0.5 * epsilon * METRIC[beta] * eval_pdo(gens[f"P{beta}"], grid, m_values, masses)
        return total

    result = np.zeros(grid.size, dtype=complex)
    for alpha in range(4):
        result += METRIC[alpha] * apply_w(alpha, apply_w(alpha, psi))
    return result


def casimir_residuals(gens: Mapping[str, PDO], grid: Grid, masses: Sequence[float], width: float = 0.5) -> Dict[str, float]:
    """Relative sizes of ``W^2 psi`` and ``(P^2 - m^2) psi`` for a Gaussian packet."""
    psi = wavepacket(grid, width)
    norm = np.linalg.norm(psi)
    p_squared = eval_pdo(gens["P0"], grid, eval_pdo(gens["P0"], grid, psi, masses), masses)
    for axis in range(1, grid.dimension + 1):
        p_squared = p_squared - eval_pdo(gens[f"P{axis}"], grid, eval_pdo(gens[f"P{axis}"], grid, psi, masses), masses)
    species = next(iter(kernel.kind.species for kernel in gens["P0"].terms[0].kernels))
    residuals = {"P2": float(np.linalg.norm(p_squared - masses[species - 1] ** 2 * psi) / norm)}
    if grid.dimension == 3:
        residuals["W2"] = float(np.linalg.norm(pauli_lubanski_numeric(gens, grid, masses, psi)) / norm)
    return residuals
