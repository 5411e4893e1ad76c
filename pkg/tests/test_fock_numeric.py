"""
Unit tests for grids, block states and block operators.
"""

import numpy as np
import pytest

from src.exceptions import ErrorCode, NumericError
from src.fock_numeric import (
    BlockOperator,
    BlockState,
    Grid,
    block_generator_matrix,
    build_grid,
    commutant_dimension,
    coupling_operator,
    eval_pdo,
    evolve,
    hamiltonian_operator,
    hamiltonian_spectrum,
    identity_operator,
    nested_commutator_rank,
    pdo_block,
    profile,
    triplet_operators,
)
from src.pdo_algebra import PDO, poincare_generators

TRIPLET_MASSES = [1.0, 2.0, 3.0]


class TestGrid:
    """Test cases for the periodic momentum grid."""

    def test_geometry(self, small_grid):
        assert small_grid.size == 8
        assert small_grid.spacing == pytest.approx(np.pi / 4)
        assert small_grid.axis_values[0] == pytest.approx(-np.pi)
        assert 0.0 in small_grid.axis_values

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"points": 6},
            {"points": 1, "scheme": "central-2"},
            {"dimension": 4},
            {"half_width": 0.0},
            {"scheme": "upwind"},
        ],
    )
    def test_invalid_grid(self, kwargs):
        with pytest.raises(NumericError) as exc_info:
            Grid(**kwargs)
        assert exc_info.value.error_code == ErrorCode.NUMERIC_INVALID_GRID

    def test_central_scheme_accepts_any_size(self):
        assert Grid(points=6, scheme="central-2").size == 6

    def test_spectral_derivative_is_exact_for_sine(self):
        grid = Grid(dimension=1, points=16)
        k = grid.components[0]
        assert np.allclose(grid.differentiate(np.sin(k), 1), np.cos(k), atol=1e-10)

    def test_matrix_matches_transform(self):
        grid = Grid(dimension=2, points=8)
        values = profile(grid, 0.7)
        for axis in (1, 2):
            assert np.allclose(grid.derivative_matrices[axis - 1] @ values, grid.differentiate(values, axis), atol=1e-10)

    def test_central_difference(self):
        grid = Grid(dimension=1, points=64, scheme="central-2")
        k = grid.components[0]
        assert np.allclose(grid.differentiate(np.sin(k), 1), np.cos(k), atol=5e-3)

    def test_build_from_config(self, small_config):
        grid = build_grid(small_config)
        assert grid.points == 8 and grid.dimension == 1
        assert build_grid(small_config, points=16).points == 16

    def test_profile_has_unit_norm(self, small_grid):
        values = profile(small_grid, 0.8)
        assert small_grid.inner(values, values).real == pytest.approx(1.0)

    def test_profile_width(self, small_grid):
        with pytest.raises(NumericError):
            profile(small_grid, 0.0)

    def test_grid_serialization(self, small_grid):
        assert Grid.from_dict(small_grid.to_dict()) == small_grid


class TestBlockState:
    """Test cases for direct-sum states."""

    def test_default_labels(self, small_grid):
        state = BlockState.single(small_grid, profile(small_grid), 1, 3)
        assert state.species == (1, 2, 3)
        assert state.energy_signs == (1, 1, 1)
        assert state.block_probabilities() == pytest.approx([0.0, 1.0, 0.0])

    def test_block_size_checked(self, small_grid):
        with pytest.raises(NumericError):
            BlockState(small_grid, (np.ones(5),))

    def test_energy_signs_checked(self, small_grid):
        with pytest.raises(NumericError) as exc_info:
            BlockState(small_grid, (np.ones(8),), (1,), (0,))
        assert exc_info.value.error_code == ErrorCode.NUMERIC_KIND_MISMATCH

    def test_normalize(self, small_grid):
        state = BlockState(small_grid, (np.ones(8), np.ones(8))).normalized()
        assert state.norm() == pytest.approx(1.0)

    def test_zero_state_cannot_be_normalized(self, small_grid):
        with pytest.raises(NumericError) as exc_info:
            BlockState(small_grid, (np.zeros(8),)).normalized()
        assert exc_info.value.error_code == ErrorCode.NUMERIC_UNNORMALIZED

    def test_doubled_labels(self, small_grid):
        plus = BlockState.single(small_grid, profile(small_grid), 0, 2)
        doubled = BlockState.doubled(plus, plus)
        assert doubled.species == (1, 2, 1, 2)
        assert doubled.energy_signs == (1, 1, -1, -1)

    def test_serialization(self, small_grid):
        state = BlockState.single(small_grid, profile(small_grid) * 1j, 0, 2)
        restored = BlockState.from_dict(state.to_dict())
        assert np.allclose(restored.flatten(), state.flatten())
        assert restored.species == state.species


class TestBlockOperators:
    """Test cases for generator blocks and couplings."""

    def test_energy_block_is_diagonal(self, small_grid):
        op = block_generator_matrix("P0", small_grid, [1.0, 2.0])
        expected = np.concatenate([np.sqrt(small_grid.momentum_squared + m ** 2) for m in (1.0, 2.0)])
        assert np.allclose(np.diag(op.to_dense()), expected)

    def test_mass_square_block(self, small_grid):
        op = block_generator_matrix("M2", small_grid, [1.0, 2.0])
        assert np.allclose(np.diag(op.to_dense()).real, [1.0] * 8 + [4.0] * 8)

    def test_unknown_generator(self, small_grid):
        with pytest.raises(NumericError):
            block_generator_matrix("M12", small_grid, [1.0])

    def test_positive_masses(self, small_grid):
        with pytest.raises(NumericError):
            block_generator_matrix("P0", small_grid, [1.0, -2.0])

    def test_coupling_is_hermitian(self, small_grid):
        op = coupling_operator(1, 2, small_grid, 3)
        dense = op.to_dense()
        assert np.allclose(dense, dense.conj().T)
        assert np.allclose(dense[16:, :], 0.0)

    def test_coupling_needs_two_blocks(self, small_grid):
        with pytest.raises(NumericError) as exc_info:
            coupling_operator(2, 2, small_grid, 3)
        assert exc_info.value.error_code == ErrorCode.NUMERIC_SAME_BLOCK

    def test_apply_matches_dense(self, small_grid):
        op = coupling_operator(1, 2, small_grid, 2) + block_generator_matrix("P1", small_grid, [1.0, 2.0])
        state = BlockState(small_grid, (profile(small_grid, 0.6), np.arange(8, dtype=float)))
        assert np.allclose(op.apply(state).flatten(), op.to_dense() @ state.flatten())

    def test_block_index_checked(self, small_grid):
        with pytest.raises(NumericError):
            BlockOperator(small_grid, 1, {(0, 1): identity_operator(small_grid, 1).blocks[(0, 0)]})

    def test_pdo_block_matches_eval(self, small_grid):
        boost = poincare_generators(1, 1)["M01"]
        values = profile(small_grid, 0.6)
        block = pdo_block(boost, small_grid, [1.0])
        assert np.allclose(block.apply(values), eval_pdo(boost, small_grid, values, [1.0]))

    def test_unbound_mass(self, small_grid):
        with pytest.raises(NumericError) as exc_info:
            eval_pdo(PDO.energy(2, dimension=1), small_grid, profile(small_grid), [1.0])
        assert exc_info.value.error_code == ErrorCode.NUMERIC_UNBOUND_MASS

    def test_expectation(self, small_grid):
        state = BlockState.single(small_grid, profile(small_grid), 0, 1)
        assert state.expectation(identity_operator(small_grid, 1)) == pytest.approx(1.0)


class TestIrreducibility:
    """Test cases for the commutant and nested-commutator probes."""

    def test_triplet_is_irreducible(self, small_grid):
        ops = triplet_operators(small_grid, TRIPLET_MASSES)
        assert sorted(ops) == ["D12", "D13", "D23", "P0", "P1"]
        assert commutant_dimension(list(ops.values())) == 1

    @pytest.mark.parametrize("points", [8, 16])
    def test_triplet_irreducible_on_larger_grids(self, points):
        ops = triplet_operators(Grid(dimension=1, points=points), TRIPLET_MASSES)
        assert commutant_dimension(list(ops.values())) == 1

    def test_commutant_independent_of_operator_order(self):
        ops = triplet_operators(Grid(dimension=1, points=32), TRIPLET_MASSES)
        couplings_first = [ops["D12"], ops["D23"], ops["P0"], ops["P1"]]
        assert commutant_dimension(couplings_first) == 1
        assert commutant_dimension(couplings_first[::-1]) == 1

    def test_energy_blocks_alone_keep_block_scalars(self):
        ops = triplet_operators(Grid(dimension=1, points=16), TRIPLET_MASSES)
        assert commutant_dimension([ops["P0"]]) >= 3

    def test_single_coupling_commutant(self, small_grid):
        d12 = coupling_operator(1, 2, small_grid, 2)
        # D12 has rank two; its kernel contributes a full matrix space.
        assert commutant_dimension([d12]) == (small_grid.size * 2 - 2) ** 2 + 2

    def test_momenta_alone_are_reducible(self, small_grid):
        ops = triplet_operators(small_grid, TRIPLET_MASSES)
        assert commutant_dimension([ops["P0"], ops["P1"]]) > 1

    def test_identity_commutant_is_everything(self):
        grid = Grid(dimension=1, points=4)
        assert commutant_dimension([identity_operator(grid, 1)]) == 16

    def test_identity_commutant_at_large_dimension(self):
        grid = Grid(dimension=1, points=64)
        assert commutant_dimension([identity_operator(grid, 2)]) == 128 ** 2

    def test_commutant_cap(self, small_grid):
        ops = triplet_operators(small_grid, TRIPLET_MASSES)
        with pytest.raises(NumericError) as exc_info:
            commutant_dimension(list(ops.values()), cap=10)
        assert exc_info.value.error_code == ErrorCode.NUMERIC_DIMENSION_CAP

    def test_commutant_needs_operators(self):
        with pytest.raises(NumericError):
            commutant_dimension([])

    def test_nested_ranks_grow(self, small_grid):
        ops = list(triplet_operators(small_grid, TRIPLET_MASSES).values())
        ranks = nested_commutator_rank(ops, 3)
        assert len(ranks) == 3
        assert ranks[0] == 5
        assert ranks == sorted(ranks)
        assert ranks[-1] > ranks[0]

    def test_nested_ranks_outgrow_generators(self):
        ops = triplet_operators(Grid(dimension=1, points=16), TRIPLET_MASSES)
        family = [ops["P0"], ops["D12"], ops["D23"]]
        ranks = nested_commutator_rank(family, 4)
        assert ranks == sorted(ranks)
        assert ranks[0] == 3
        assert ranks[-1] > len(family) + 10

    def test_nested_depth_limits(self, small_grid):
        ops = list(triplet_operators(small_grid, TRIPLET_MASSES).values())
        with pytest.raises(NumericError):
            nested_commutator_rank(ops, 0)
        with pytest.raises(NumericError) as exc_info:
            nested_commutator_rank(ops, 7)
        assert exc_info.value.error_code == ErrorCode.NUMERIC_DIMENSION_CAP


class TestDynamics:
    """Test cases for free evolution and the Hamiltonian spectrum."""

    def test_probabilities_conserved(self, small_grid):
        state = BlockState(small_grid, (profile(small_grid), profile(small_grid, 0.5))).normalized()
        evolved = evolve(state, [1.0, 2.0], 3.7)
        assert evolved.norm() == pytest.approx(1.0)
        assert evolved.block_probabilities() == pytest.approx(state.block_probabilities())

    def test_phase_at_zero_momentum(self, small_grid):
        state = BlockState.single(small_grid, profile(small_grid), 0, 1)
        evolved = evolve(state, [2.0], 0.5)
        center = int(np.argmin(np.abs(small_grid.axis_values)))
        assert evolved.blocks[0][center] == pytest.approx(state.blocks[0][center] * np.exp(-1j))

    def test_unnormalized_state_rejected(self, small_grid):
        state = BlockState(small_grid, (2 * profile(small_grid),))
        with pytest.raises(NumericError) as exc_info:
            evolve(state, [1.0], 1.0)
        assert exc_info.value.error_code == ErrorCode.NUMERIC_UNNORMALIZED
        assert evolve(state, [1.0], 1.0, strict=False).norm() == pytest.approx(2.0)

    def test_doubled_variant_conjugates_negative_block(self, small_grid):
        half = BlockState.single(small_grid, profile(small_grid) / np.sqrt(2), 0, 1)
        state = BlockState.doubled(half, half)
        evolved = evolve(state, [1.0], 2.0, variant="doubled")
        assert np.allclose(evolved.blocks[1], np.conj(evolved.blocks[0]))
        plus = evolve(state, [1.0], 2.0, variant="plus")
        assert np.allclose(plus.blocks[1], plus.blocks[0])

    def test_unknown_variant(self, small_grid):
        state = BlockState.single(small_grid, profile(small_grid), 0, 1)
        with pytest.raises(NumericError):
            evolve(state, [1.0], 1.0, variant="minus")

    def test_missing_mass(self, small_grid):
        state = BlockState(small_grid, (profile(small_grid), np.zeros(8)))
        with pytest.raises(NumericError) as exc_info:
            evolve(state, [1.0], 1.0)
        assert exc_info.value.error_code == ErrorCode.NUMERIC_UNBOUND_MASS

    @pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
    @pytest.mark.parametrize("variant", ["plus", "doubled"])
    def test_norm_and_mass_square_conserved(self, t, variant):
        grid = Grid(dimension=1, points=16)
        plus = BlockState(grid, (profile(grid), profile(grid, 0.5), profile(grid, 2.0)), (1, 2, 3)).normalized()
        state = BlockState.doubled(plus, plus).normalized()
        m_squared = block_generator_matrix("M2", grid, [1.0, 2.0, 3.0] * 2)
        evolved = evolve(state, [1.0, 2.0, 3.0], t, variant=variant)
        assert abs(evolved.norm() - 1.0) <= 1e-12
        assert abs(evolved.expectation(m_squared) - state.expectation(m_squared)) <= 1e-12

    def test_hamiltonian_spectrum(self, small_grid):
        values = hamiltonian_spectrum(small_grid, [1.0, 2.0])
        analytic = np.sort(np.concatenate([np.sqrt(small_grid.momentum_squared + m ** 2) for m in (1.0, 2.0)]))
        assert values.size == 16
        assert np.allclose(values, analytic)

    def test_doubled_hamiltonian_is_two_copies(self, small_grid):
        single = hamiltonian_operator(small_grid, [1.0, 2.0]).to_dense()
        doubled = hamiltonian_operator(small_grid, [1.0, 2.0], doubled=True)
        assert doubled.block_count == 4
        dense = doubled.to_dense()
        assert np.allclose(dense[:16, :16], single)
        assert np.allclose(dense[16:, 16:], single)
        assert np.allclose(dense[:16, 16:], 0.0)

        values = hamiltonian_spectrum(small_grid, [1.0, 2.0])
        doubled_values = hamiltonian_spectrum(small_grid, [1.0, 2.0], doubled=True)
        assert doubled_values.size == 2 * values.size
        assert np.allclose(doubled_values, np.repeat(values, 2))

    def test_hamiltonian_cap(self, small_grid):
        with pytest.raises(NumericError) as exc_info:
            hamiltonian_spectrum(small_grid, [1.0, 2.0], doubled=True, cap=16)
        assert exc_info.value.error_code == ErrorCode.NUMERIC_DIMENSION_CAP
