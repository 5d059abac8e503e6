"""Principal symbols of the base complex: ranks, exactness, equivariance."""

import numpy as np
import pytest

from qcontact.symbols import (
    dimension_ledger,
    equivariance_defect,
    exactness_at,
    s31_basis,
    s51_basis,
    s60_basis,
    symbol_A,
    symbol_B,
    symbol_D,
    xi_design,
)

XI = np.array([0.3, -1.0, 0.5, 0.2])


class TestSymbolMaps:
    def test_basis_shapes(self):
        assert s31_basis().shape == (12, 8)
        assert s51_basis().shape == (24, 12)
        assert s60_basis().shape == (18, 7)

    def test_ranks_at_unit_covector(self):
        xi = np.eye(4)[1]
        assert symbol_D(xi).rank == 3
        assert symbol_A(xi).rank == 5
        assert symbol_B(xi).rank == 7

    def test_zero_covector_gives_zero_maps(self):
        zero = np.zeros(4)
        assert np.abs(symbol_D(zero).matrix).max() == 0.0
        assert np.abs(symbol_A(zero).matrix).max() == 0.0
        assert np.abs(symbol_B(zero).matrix).max() == 0.0
        rep = exactness_at(zero)
        assert (rep.rank_d, rep.rank_a, rep.rank_b) == (0, 0, 0)

    def test_first_order_scaling(self):
        for fn in (symbol_D, symbol_B):
            assert np.allclose(fn(3.0 * XI).matrix, 3.0 * fn(XI).matrix)

    def test_second_order_scaling(self):
        assert np.allclose(symbol_A(3.0 * XI).matrix, 9.0 * symbol_A(XI).matrix)

    def test_injective_d_for_nonzero_xi(self):
        sd = symbol_D(XI)
        sv = np.linalg.svd(sd.matrix, compute_uv=False)
        assert sv.min() > 1e-6


class TestExactness:
    def test_at_one_covector(self):
        rep = exactness_at(XI)
        assert rep.exact
        assert rep.gap_da < 1e-10
        assert rep.gap_ab < 1e-10

    def test_over_fifty_samples(self):
        for xi in xi_design(50, seed=91):
            rep = exactness_at(xi)
            assert (rep.rank_d, rep.rank_a, rep.rank_b) == (3, 5, 7)
            assert max(rep.gap_da, rep.gap_ab) < 1e-8

    def test_euler_alternation(self):
        # exact sequence 0 -> 3 -> 8 -> 12 -> 7 -> 0 forces the ranks
        dims = (3, 8, 12, 7)
        assert dims[0] - dims[1] + dims[2] - dims[3] == 0
        rep = exactness_at(XI)
        assert rep.rank_d == dims[0]
        assert rep.rank_a == dims[1] - rep.rank_d
        assert rep.rank_b == dims[2] - rep.rank_a

    def test_design_deterministic(self):
        assert np.array_equal(xi_design(20, seed=5), xi_design(20, seed=5))
        assert np.allclose(np.linalg.norm(xi_design(20, seed=5), axis=1), 1.0)


class TestEquivariance:
    @pytest.mark.parametrize("angles", [
        ([0.3, -0.2, 0.5], [0.1, 0.7, -0.4]),
        ([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
        ([0.0, 0.0, 0.0], [0.0, -1.2, 0.3]),
    ])
    def test_symbols_intertwine(self, angles):
        assert equivariance_defect(XI, *angles) < 1e-9


class TestLedger:
    def test_documented_constants(self):
        led = dimension_ledger()
        assert led.homology == {"H0": 10, "H1": 35, "H2": 0, "H3": 0}
        assert led.index == 35
        assert led.recompute is False

    def test_h0_matches_sp2_dimension(self):
        # dim sp(2) = 10: the symmetry algebra of the canonical structure
        assert dimension_ledger().homology["H0"] == 10

    def test_as_dict(self):
        d = dimension_ledger().as_dict()
        assert d["recompute"] is False
        assert d["index"] == 35
