"""
Discretized one-particle momentum space and direct-sum block operators.

States are lists of grid functions, one block per particle species. Operators
act block-wise: multiplication kernels are diagonal, differential operators use
the grid's differentiation scheme, and couplings are rank-one kernels between
blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .exceptions import ErrorCode, NumericError
from .models.expression import ComponentPower, Energy, KernelFactor, Profile
from .models.workbench_config import WorkbenchConfig
from .pdo_algebra import PDO, generator_names, mass_square, poincare_generators
from .symbolic_core import mass_symbol
from .utils.logging_utils import get_logger

logger = get_logger("fock_numeric")

NORMALIZATION_TOLERANCE = 1e-10
NULL_TOLERANCE = 1e-10
CLUSTER_TOLERANCE = 1e-9


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Periodic momentum box ``[-L, L)^d`` with ``n`` points per axis."""
    dimension: int = 1
    points: int = 16
    half_width: float = float(np.pi)
    scheme: str = "spectral"

    def __post_init__(self):
        problems = []
        if self.dimension not in (1, 2, 3):
            problems.append(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if self.points < 2:
            problems.append(f"grid needs at least 2 points per axis, got {self.points}")
        elif self.scheme == "spectral" and self.points & (self.points - 1):
            problems.append(f"spectral scheme needs a power-of-two size, got {self.points}")
        if not self.half_width > 0:
            problems.append(f"half-width must be positive, got {self.half_width}")
        if self.scheme not in ("spectral", "central-2"):
            problems.append(f"unknown differentiation scheme '{self.scheme}'")
        if problems:
            raise NumericError("Invalid grid: " + "; ".join(problems), ErrorCode.NUMERIC_INVALID_GRID, "grid")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dimension

    @property
    def size(self) -> int:
        return self.points ** self.dimension

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points,) * self.dimension

    @cached_property
    def axis_values(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.points)

    @cached_property
    def components(self) -> Tuple[np.ndarray, ...]:
        """Flattened momentum components ``k_1 .. k_d`` (first axis slowest)."""
        mesh = np.meshgrid(*([self.axis_values] * self.dimension), indexing="ij")
        return tuple(axis.ravel() for axis in mesh)

    @cached_property
    def momentum_squared(self) -> np.ndarray:
        return sum(component ** 2 for component in self.components)

    @cached_property
    def frequencies(self) -> np.ndarray:
        freq = 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)
        if self.points % 2 == 0:
            freq[self.points // 2] = 0.0
        return freq

    @cached_property
    def derivative_1d(self) -> np.ndarray:
        """Dense single-axis derivative matrix for the configured scheme."""
        identity = np.eye(self.points)
        if self.scheme == "spectral":
            matrix = np.fft.ifft(1j * self.frequencies[:, None] * np.fft.fft(identity, axis=0), axis=0)
            return matrix.real
        return (np.roll(identity, 1, axis=1) - np.roll(identity, -1, axis=1)) / (2.0 * self.spacing)

    @cached_property
    def derivative_matrices(self) -> Tuple[sp.csr_matrix, ...]:
        matrices = []
        for axis in range(self.dimension):
            before = sp.identity(self.points ** axis, format="csr")
            after = sp.identity(self.points ** (self.dimension - axis - 1), format="csr")
            matrices.append(sp.kron(sp.kron(before, sp.csr_matrix(self.derivative_1d)), after, format="csr"))
        return tuple(matrices)

    def differentiate(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Derivative of a flattened grid function along 1-based ``axis``."""
        cube = np.asarray(values, dtype=complex).reshape(self.shape)
        index = axis - 1
        if self.scheme == "spectral":
            shape = [1] * self.dimension
            shape[index] = self.points
            transformed = np.fft.fft(cube, axis=index) * (1j * self.frequencies.reshape(shape))
            result = np.fft.ifft(transformed, axis=index)
        else:
            result = (np.roll(cube, -1, axis=index) - np.roll(cube, 1, axis=index)) / (2.0 * self.spacing)
        return result.ravel()

    def inner(self, left: np.ndarray, right: np.ndarray) -> complex:
        return complex(np.vdot(left, right) * self.cell_volume)

    def to_dict(self) -> Dict[str, object]:
        return {
            "dimension": self.dimension,
            "points": self.points,
            "half_width": self.half_width,
            "scheme": self.scheme,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "Grid":
        return cls(
            dimension=int(data["dimension"]),
            points=int(data["points"]),
            half_width=float(data["half_width"]),
            scheme=str(data.get("scheme", "spectral")),
        )


def build_grid(config: Optional[WorkbenchConfig] = None, **overrides) -> Grid:
    """Grid from the numeric section of the configuration; keyword overrides win."""
    config = config or WorkbenchConfig()
    settings = {
        "dimension": config.numeric_dimension,
        "points": config.grid_points,
        "half_width": config.grid_half_width,
        "scheme": config.diff_scheme,
    }
    settings.update(overrides)
    grid = Grid(**settings)
    logger.debug("Built %s grid d=%d n=%d L=%g", grid.scheme, grid.dimension, grid.points, grid.half_width)
    return grid


def profile(grid: Grid, sigma: float = 1.0, center: Optional[Sequence[float]] = None) -> np.ndarray:
    """Gaussian ``exp(-|k - c|^2 / 2 sigma^2)`` normalized to unit grid norm."""
    if sigma <= 0:
        raise NumericError("Profile width must be positive", ErrorCode.NUMERIC_INVALID_GRID, "profile")
    offsets = center or [0.0] * grid.dimension
    squared = sum((component - offset) ** 2 for component, offset in zip(grid.components, offsets))
    values = np.exp(-squared / (2.0 * sigma ** 2)).astype(complex)
    return values / np.sqrt(grid.inner(values, values).real)


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

def _complex_pairs(values: np.ndarray) -> List[List[float]]:
    return [[float(value.real), float(value.imag)] for value in np.asarray(values).ravel()]


def _from_pairs(pairs: Sequence[Sequence[float]]) -> np.ndarray:
    data = np.asarray(pairs, dtype=float).reshape(-1, 2)
    return data[:, 0] + 1j * data[:, 1]


@dataclass(frozen=True, eq=False)
class BlockState:
    """
    A vector of the direct sum: one grid function per block.

    ``species`` gives the 1-based species of each block and ``energy_signs``
    the sign-of-energy label; a doubled state carries each species twice.
    """
    grid: Grid
    blocks: Tuple[np.ndarray, ...]
    species: Tuple[int, ...] = ()
    energy_signs: Tuple[int, ...] = ()

    def __post_init__(self):
        blocks = tuple(np.asarray(block, dtype=complex).ravel() for block in self.blocks)
        for block in blocks:
            if block.size != self.grid.size:
                raise NumericError(
                    f"Block of size {block.size} does not match grid size {self.grid.size}",
                    ErrorCode.NUMERIC_INVALID_GRID,
                    "state",
                )
        object.__setattr__(self, "blocks", blocks)
        if not self.species:
            object.__setattr__(self, "species", tuple(range(1, len(blocks) + 1)))
        if not self.energy_signs:
            object.__setattr__(self, "energy_signs", (1,) * len(blocks))
        if len(self.species) != len(blocks) or len(self.energy_signs) != len(blocks):
            raise NumericError("Species and energy-sign labels must match the block count", ErrorCode.NUMERIC_KIND_MISMATCH, "state")
        if any(sign not in (1, -1) for sign in self.energy_signs):
            raise NumericError("Energy signs must be +1 or -1", ErrorCode.NUMERIC_KIND_MISMATCH, "state")

    @classmethod
    def single(cls, grid: Grid, values: np.ndarray, block: int, block_count: int) -> "BlockState":
        """State supported in one block (0-based index)."""
        blocks = [np.zeros(grid.size, dtype=complex) for _ in range(block_count)]
        blocks[block] = np.asarray(values, dtype=complex).ravel()
        return cls(grid, tuple(blocks))

    @classmethod
    def doubled(cls, plus: "BlockState", minus: "BlockState") -> "BlockState":
        """``(Psi_+, Psi_-)`` with positive and negative energy labels."""
        return cls(
            plus.grid,
            plus.blocks + minus.blocks,
            plus.species + minus.species,
            (1,) * len(plus.blocks) + (-1,) * len(minus.blocks),
        )

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    def block_probabilities(self) -> np.ndarray:
        return np.array([self.grid.inner(block, block).real for block in self.blocks])

    def norm(self) -> float:
        return float(np.sqrt(self.block_probabilities().sum()))

    def normalized(self) -> "BlockState":
        norm = self.norm()
        if norm == 0:
            raise NumericError("Cannot normalize the zero state", ErrorCode.NUMERIC_UNNORMALIZED, "state")
        return BlockState(self.grid, tuple(block / norm for block in self.blocks), self.species, self.energy_signs)

    def flatten(self) -> np.ndarray:
        return np.concatenate(self.blocks)

    def with_vector(self, vector: np.ndarray) -> "BlockState":
        parts = np.split(np.asarray(vector, dtype=complex), self.block_count)
        return BlockState(self.grid, tuple(parts), self.species, self.energy_signs)

    def inner(self, other: "BlockState") -> complex:
        return sum(self.grid.inner(left, right) for left, right in zip(self.blocks, other.blocks))

    def expectation(self, operator: "BlockOperator") -> float:
        return float(self.inner(operator.apply(self)).real)

    def to_dict(self) -> Dict[str, object]:
        return {
            "grid": self.grid.to_dict(),
            "species": list(self.species),
            "energy_signs": list(self.energy_signs),
            "blocks": [_complex_pairs(block) for block in self.blocks],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "BlockState":
        grid = Grid.from_dict(data["grid"])
        blocks = tuple(_from_pairs(pairs) for pairs in data["blocks"])
        return cls(grid, blocks, tuple(data.get("species", ())), tuple(data.get("energy_signs", ())))


# ---------------------------------------------------------------------------
# Block operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiagonalBlock:
    """Pointwise multiplication."""
    values: np.ndarray
    kind: str = "diagonal"

    def apply(self, vector: np.ndarray) -> np.ndarray:
        return self.values * vector

    def to_dense(self) -> np.ndarray:
        return np.diag(self.values.astype(complex))


@dataclass(frozen=True, eq=False)
class SparseBlock:
    """A differential operator assembled from derivative matrices."""
    matrix: sp.csr_matrix
    kind: str = "pdo"

    def apply(self, vector: np.ndarray) -> np.ndarray:
        return self.matrix @ vector

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray().astype(complex)


@dataclass(frozen=True, eq=False)
class RankOneBlock:
    """``x -> left * <right, x>`` with the grid inner product."""
    left: np.ndarray
    right: np.ndarray
    cell_volume: float
    kind: str = "rank-one"

    def apply(self, vector: np.ndarray) -> np.ndarray:
        return self.left * (np.vdot(self.right, vector) * self.cell_volume)

    def to_dense(self) -> np.ndarray:
        return self.cell_volume * np.outer(self.left, self.right.conj())


Block = Union[DiagonalBlock, SparseBlock, RankOneBlock]


@dataclass(frozen=True, eq=False)
class BlockOperator:
    """Operator on the direct sum; ``blocks[(i, j)]`` maps block j into block i (0-based)."""
    grid: Grid
    block_count: int
    blocks: Dict[Tuple[int, int], Block] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        for row, column in self.blocks:
            if not (0 <= row < self.block_count and 0 <= column < self.block_count):
                raise NumericError(
                    f"Block index ({row}, {column}) outside {self.block_count} blocks",
                    ErrorCode.NUMERIC_KIND_MISMATCH,
                    self.name,
                )

    @property
    def dimension(self) -> int:
        return self.block_count * self.grid.size

    def apply(self, state: BlockState) -> BlockState:
        if state.block_count != self.block_count:
            raise NumericError("State and operator block counts differ", ErrorCode.NUMERIC_KIND_MISMATCH, self.name)
        result = [np.zeros(self.grid.size, dtype=complex) for _ in range(self.block_count)]
        for (row, column), block in self.blocks.items():
            result[row] = result[row] + block.apply(state.blocks[column])
        return BlockState(self.grid, tuple(result), state.species, state.energy_signs)

    def to_dense(self) -> np.ndarray:
        size = self.grid.size
        matrix = np.zeros((self.dimension, self.dimension), dtype=complex)
        for (row, column), block in self.blocks.items():
            matrix[row * size:(row + 1) * size, column * size:(column + 1) * size] += block.to_dense()
        return matrix

    def __add__(self, other: "BlockOperator") -> "BlockOperator":
        if other.block_count != self.block_count:
            raise NumericError("Operators have different block counts", ErrorCode.NUMERIC_KIND_MISMATCH, self.name)
        blocks = dict(self.blocks)
        for key, block in other.blocks.items():
            if key in blocks:
                blocks[key] = SparseBlock(sp.csr_matrix(blocks[key].to_dense() + block.to_dense()))
            else:
                blocks[key] = block
        return BlockOperator(self.grid, self.block_count, blocks, f"{self.name}+{other.name}")

    def to_dict(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "grid": self.grid.to_dict(),
            "block_count": self.block_count,
            "blocks": [
                {"row": row, "column": column, "kind": block.kind, "matrix": _complex_pairs(block.to_dense())}
                for (row, column), block in sorted(self.blocks.items())
            ],
        }


def _mass_bindings(masses: Sequence[float]) -> Dict[str, float]:
    return {mass_symbol(index): float(mass) for index, mass in enumerate(masses, start=1)}


def kernel_values(
    kernel: KernelFactor,
    grid: Grid,
    masses: Sequence[float],
    profiles: Optional[Mapping[str, np.ndarray]] = None,
) -> np.ndarray:
    kind = kernel.kind
    if isinstance(kind, ComponentPower):
        return grid.components[kind.axis - 1].astype(complex) ** kind.power
    if isinstance(kind, Energy):
        if kind.species > len(masses):
            raise NumericError(
                f"No numeric mass bound for species {kind.species}", ErrorCode.NUMERIC_UNBOUND_MASS, mass_symbol(kind.species)
            )
        energy = np.sqrt(grid.momentum_squared + float(masses[kind.species - 1]) ** 2)
        return energy.astype(complex) ** kind.exponent
    if isinstance(kind, Profile):
        if not profiles or kind.name not in profiles:
            raise NumericError(
                f"Profile '{kind.name}' has no grid values", ErrorCode.NUMERIC_UNSUPPORTED_EXPRESSION, kind.name
            )
        return np.asarray(profiles[kind.name], dtype=complex) ** kind.power
    raise NumericError(f"Unsupported kernel {kind!r}", ErrorCode.NUMERIC_UNSUPPORTED_EXPRESSION)


def _term_coefficient(coeff, masses: Sequence[float]) -> complex:
    try:
        return coeff.evaluate(_mass_bindings(masses))
    except KeyError as exc:
        raise NumericError(f"Unbound mass atom {exc}", ErrorCode.NUMERIC_UNBOUND_MASS, str(exc)) from exc


def eval_pdo(
    pdo: PDO,
    grid: Grid,
    values: np.ndarray,
    masses: Sequence[float],
    profiles: Optional[Mapping[str, np.ndarray]] = None,
) -> np.ndarray:
    """Apply a PDO to a grid function: derivatives first, then the multiplication kernels."""
    if pdo.dimension != grid.dimension:
        raise NumericError("PDO and grid dimensions differ", ErrorCode.NUMERIC_KIND_MISMATCH, "eval_pdo")
    values = np.asarray(values, dtype=complex).ravel()
    result = np.zeros(grid.size, dtype=complex)
    for term in pdo.terms:
        current = values
        for axis in term.deriv:
            current = grid.differentiate(current, axis)
        factor = _term_coefficient(term.coeff, masses)
        for kernel in term.kernels:
            current = current * kernel_values(kernel, grid, masses, profiles)
        result += factor * current
    return result


def pdo_block(pdo: PDO, grid: Grid, masses: Sequence[float]) -> Block:
    """Matrix form of a PDO on the grid; diagonal when no term differentiates."""
    if all(not term.deriv for term in pdo.terms):
        values = np.zeros(grid.size, dtype=complex)
        for term in pdo.terms:
            contribution = np.full(grid.size, _term_coefficient(term.coeff, masses), dtype=complex)
            for kernel in term.kernels:
                contribution = contribution * kernel_values(kernel, grid, masses)
            values += contribution
        return DiagonalBlock(values)

    matrix = sp.csr_matrix((grid.size, grid.size), dtype=complex)
    for term in pdo.terms:
        diagonal = np.full(grid.size, _term_coefficient(term.coeff, masses), dtype=complex)
        for kernel in term.kernels:
            diagonal = diagonal * kernel_values(kernel, grid, masses)
        operator = sp.diags(diagonal, format="csr")
        for axis in term.deriv:
            operator = operator @ grid.derivative_matrices[axis - 1]
        matrix = matrix + operator
    return SparseBlock(sp.csr_matrix(matrix))


def block_generator_matrix(kind: str, grid: Grid, masses: Sequence[float]) -> BlockOperator:
    """
    Block-diagonal operator whose block i is generator ``kind`` for mass ``m_i``.

    ``kind`` is a generator name (``P0``, ``P1``, ``M12``, ``M01``, ...) or ``M2``;
    the M2 blocks are exact multiplication by ``m_i^2``.
    """
    if any(mass <= 0 for mass in masses):
        raise NumericError("Masses must be positive", ErrorCode.NUMERIC_KIND_MISMATCH, kind)
    valid = generator_names(grid.dimension) + ["M2"]
    if kind not in valid:
        raise NumericError(
            f"Generator '{kind}' is not available in d={grid.dimension}; expected one of {valid}",
            ErrorCode.NUMERIC_KIND_MISMATCH,
            kind,
        )

    blocks: Dict[Tuple[int, int], Block] = {}
    for index in range(len(masses)):
        gens = poincare_generators(index + 1, grid.dimension)
        if kind == "M2":
            value = mass_square(gens).scalar_value()
            blocks[(index, index)] = DiagonalBlock(np.full(grid.size, _term_coefficient(value, masses), dtype=complex))
        else:
            blocks[(index, index)] = pdo_block(gens[kind], grid, masses)
    return BlockOperator(grid, len(masses), blocks, kind)


def coupling_operator(
    first: int,
    second: int,
    grid: Grid,
    block_count: int,
    profile_values: Optional[np.ndarray] = None,
    sigma: float = 1.0,
) -> BlockOperator:
    """
    ``D_ij``: maps block j into block i by ``F <F, psi_j>`` and back by the adjoint.

    Species indices are 1-based. The partner profile is the complex conjugate
    of F, which makes the operator self-adjoint.
    """
    if first == second:
        raise NumericError("Coupling needs two different blocks", ErrorCode.NUMERIC_SAME_BLOCK, f"D{first}{second}")
    values = profile(grid, sigma) if profile_values is None else np.asarray(profile_values, dtype=complex).ravel()
    forward = RankOneBlock(values, values, grid.cell_volume)
    blocks = {(first - 1, second - 1): forward, (second - 1, first - 1): RankOneBlock(values, values, grid.cell_volume)}
    return BlockOperator(grid, block_count, blocks, f"D{first}{second}")


def identity_operator(grid: Grid, block_count: int) -> BlockOperator:
    ones = np.ones(grid.size, dtype=complex)
    return BlockOperator(grid, block_count, {(index, index): DiagonalBlock(ones) for index in range(block_count)}, "I")


# ---------------------------------------------------------------------------
# Irreducibility and infinite-dimensionality checks
# ---------------------------------------------------------------------------

def _clusters(eigenvalues: np.ndarray) -> List[np.ndarray]:
    scale = max(1.0, float(np.max(np.abs(eigenvalues)))) if eigenvalues.size else 1.0
    groups: List[List[int]] = []
    for index in np.argsort(eigenvalues):
        if groups and abs(eigenvalues[index] - eigenvalues[groups[-1][-1]]) <= CLUSTER_TOLERANCE * scale:
            groups[-1].append(int(index))
        else:
            groups.append([int(index)])
    return [np.array(group) for group in groups]


def _pivot(dense: Sequence[np.ndarray], seed: int) -> Optional[np.ndarray]:
    """Seeded random real combination of the Hermitian operators."""
    hermitian = [matrix for matrix in dense if np.allclose(matrix, matrix.conj().T, atol=1e-12)]
    if not hermitian:
        return None
    weights = np.random.default_rng(seed).uniform(0.5, 1.5, size=len(hermitian))
    return sum(weight * matrix for weight, matrix in zip(weights, hermitian))


def _is_free(cluster: np.ndarray, transformed: Sequence[np.ndarray]) -> bool:
    """Every operator is a scalar on the cluster and does not couple it to the rest."""
    outside = np.setdiff1d(np.arange(transformed[0].shape[0]), cluster)
    for g in transformed:
        tolerance = CLUSTER_TOLERANCE * max(1.0, float(np.max(np.abs(g))))
        inner = g[np.ix_(cluster, cluster)]
        scalar = np.trace(inner) / cluster.size
        if np.max(np.abs(inner - scalar * np.eye(cluster.size))) > tolerance:
            return False
        if outside.size and (
            np.max(np.abs(g[np.ix_(cluster, outside)])) > tolerance
            or np.max(np.abs(g[np.ix_(outside, cluster)])) > tolerance
        ):
            return False
    return True


def commutant_dimension(ops: Sequence[BlockOperator], cap: int = 512, seed: int = 0) -> int:
    """
    Dimension of ``{X : XG = GX for every G}``.

    A seeded random combination of the Hermitian operators is diagonalized and
    X is restricted to its eigenvalue clusters. A cluster on which every
    operator acts as a scalar without coupling contributes its full matrix
    space; the remaining constraints form a Gram matrix whose null space is
    counted.

    Raises:
        NumericError: when the total dimension exceeds ``cap``
    """
    if not ops:
        raise NumericError("Commutant needs at least one operator", ErrorCode.NUMERIC_KIND_MISMATCH, "commutant")
    dimension = ops[0].dimension
    if any(op.dimension != dimension for op in ops):
        raise NumericError("Operators act on different spaces", ErrorCode.NUMERIC_KIND_MISMATCH, "commutant")
    if dimension > cap:
        raise NumericError(
            f"Total dimension {dimension} exceeds the commutant cap {cap}", ErrorCode.NUMERIC_DIMENSION_CAP, "commutant"
        )

    dense = [op.to_dense() for op in ops]
    if all(np.allclose(matrix, matrix[0, 0] * np.eye(dimension), atol=1e-12) for matrix in dense):
        return dimension * dimension

    pivot = _pivot(dense, seed)
    if pivot is None:
        basis = np.eye(dimension, dtype=complex)
        clusters = [np.arange(dimension)]
    else:
        eigenvalues, basis = np.linalg.eigh(pivot)
        clusters = _clusters(eigenvalues)
    transformed = [basis.conj().T @ matrix @ basis for matrix in dense]

    free = 0
    coupled = []
    for cluster in clusters:
        if _is_free(cluster, transformed):
            free += cluster.size * cluster.size
        else:
            coupled.append(cluster)
    if not coupled:
        logger.debug("Commutant of %d operator(s): %d free dimension(s)", len(ops), free)
        return free

    rows = np.concatenate([np.repeat(cluster, cluster.size) for cluster in coupled])
    cols = np.concatenate([np.tile(cluster, cluster.size) for cluster in coupled])
    unknowns = rows.size

    # Gram matrix of the linear map X -> [X, G] restricted to the coupled cluster blocks.
    gram = np.zeros((unknowns, unknowns), dtype=complex)
    same_row = rows[:, None] == rows[None, :]
    same_col = cols[:, None] == cols[None, :]
    for g in transformed:
        row_gram = np.conj(g @ g.conj().T)
        col_gram = g.conj().T @ g
        gram += same_row * row_gram[cols[:, None], cols[None, :]]
        gram -= np.conj(g[cols[:, None], cols[None, :]]) * g[rows[:, None], rows[None, :]]
        gram -= np.conj(g[rows[None, :], rows[:, None]]) * g[cols[None, :], cols[:, None]]
        gram += same_col * col_gram[rows[:, None], rows[None, :]]

    eigenvalues = np.linalg.eigvalsh((gram + gram.conj().T) / 2)
    scale = max(1.0, float(np.max(np.abs(eigenvalues)))) if eigenvalues.size else 1.0
    nullity = int(np.sum(eigenvalues <= NULL_TOLERANCE * scale))
    logger.debug(
        "Commutant of %d operator(s): %d free dimension(s), %d coupled unknowns, nullity %d",
        len(ops), free, unknowns, nullity,
    )
    return free + nullity


def nested_commutator_rank(ops: Sequence[BlockOperator], depth: int, cap: int = 6) -> List[int]:
    """
    Rank of the span of all nested brackets ``[G1, [G2, ... Gk]]`` with k up to each depth.

    Returns one rank per depth level; the sequence is non-decreasing.
    """
    if depth < 1:
        raise NumericError("Depth must be at least 1", ErrorCode.NUMERIC_KIND_MISMATCH, "nested_commutator_rank")
    if depth > cap:
        raise NumericError(f"Depth {depth} exceeds the cap {cap}", ErrorCode.NUMERIC_DIMENSION_CAP, "nested_commutator_rank")

    dense = [op.to_dense() for op in ops]
    basis: List[np.ndarray] = []

    def absorb(matrix: np.ndarray) -> Optional[np.ndarray]:
        vector = matrix.ravel()
        norm = np.linalg.norm(vector)
        if norm == 0:
            return None
        residual = vector / norm
        for _ in range(2):
            for existing in basis:
                residual = residual - existing * np.vdot(existing, residual)
        remaining = np.linalg.norm(residual)
        if remaining <= 1e-9:
            return None
        residual = residual / remaining
        basis.append(residual)
        return residual.reshape(matrix.shape)

    frontier = [added for added in (absorb(matrix) for matrix in dense) if added is not None]
    ranks = [len(basis)]
    for _ in range(1, depth):
        new_frontier = []
        for generator in dense:
            for element in frontier:
                added = absorb(generator @ element - element @ generator)
                if added is not None:
                    new_frontier.append(added)
        frontier = new_frontier
        ranks.append(len(basis))
    logger.debug("Nested commutator ranks: %s", ranks)
    return ranks


# ---------------------------------------------------------------------------
# Dynamics
# ---------------------------------------------------------------------------

def _block_energy(grid: Grid, mass: float) -> np.ndarray:
    return np.sqrt(grid.momentum_squared + mass ** 2)


def evolve(
    state: BlockState,
    masses: Sequence[float],
    t: float,
    variant: str = "plus",
    strict: bool = True,
) -> BlockState:
    """
    Free evolution ``psi_b(k) -> exp(-i eps_b sqrt(k^2 + m^2) t) psi_b(k)``.

    The plus variant uses positive energy everywhere; the doubled variant uses
    each block's energy-sign label.

    Raises:
        NumericError: for an unnormalized state in strict mode
    """
    if variant not in ("plus", "doubled"):
        raise NumericError(f"Unknown evolution variant '{variant}'", ErrorCode.NUMERIC_KIND_MISMATCH, "evolve")
    if strict and abs(state.norm() - 1.0) > NORMALIZATION_TOLERANCE:
        raise NumericError(
            f"State norm {state.norm():.6g} differs from 1", ErrorCode.NUMERIC_UNNORMALIZED, "evolve"
        )
    blocks = []
    for block, species, sign in zip(state.blocks, state.species, state.energy_signs):
        if species > len(masses):
            raise NumericError(f"No mass given for species {species}", ErrorCode.NUMERIC_UNBOUND_MASS, mass_symbol(species))
        epsilon = sign if variant == "doubled" else 1
        blocks.append(block * np.exp(-1j * epsilon * _block_energy(state.grid, masses[species - 1]) * t))
    return BlockState(state.grid, tuple(blocks), state.species, state.energy_signs)


def hamiltonian_operator(grid: Grid, masses: Sequence[float], doubled: bool = False) -> BlockOperator:
    """``H = diag(P0 per species)``; the doubled form is ``H' = diag(H, H)`` over both energy signs."""
    species_masses = list(masses) * 2 if doubled else list(masses)
    operator = block_generator_matrix("P0", grid, species_masses)
    return BlockOperator(grid, operator.block_count, operator.blocks, "H'" if doubled else "H")


def hamiltonian_spectrum(grid: Grid, masses: Sequence[float], doubled: bool = False, cap: int = 4096) -> np.ndarray:
    """
    Sorted eigenvalues of the assembled Hamiltonian.

    Raises:
        NumericError: when the operator dimension exceeds ``cap``
    """
    operator = hamiltonian_operator(grid, masses, doubled)
    if operator.dimension > cap:
        raise NumericError(
            f"Hamiltonian dimension {operator.dimension} exceeds the cap {cap}",
            ErrorCode.NUMERIC_DIMENSION_CAP,
            operator.name,
        )
    return np.linalg.eigvalsh(operator.to_dense())


def triplet_operators(grid: Grid, masses: Sequence[float], sigma: float = 1.0) -> Dict[str, BlockOperator]:
    """Energy-momentum blocks plus the couplings ``D_ij`` for every pair ``i < j``."""
    ops = {name: block_generator_matrix(name, grid, masses) for name in [f"P{mu}" for mu in range(grid.dimension + 1)]}
    for first, second in combinations(range(1, len(masses) + 1), 2):
        ops[f"D{first}{second}"] = coupling_operator(first, second, grid, len(masses), sigma=sigma)
    return ops
