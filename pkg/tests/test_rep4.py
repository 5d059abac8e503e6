"""SO(4) generators, Casimir projectors, and the hand parameterizations."""

import numpy as np
import pytest

from qcontact import rep4


def _range_basis(proj: rep4.Projector) -> np.ndarray:
    u, s, _ = np.linalg.svd(proj.matrix)
    return u[:, s > 0.5]


class TestGenerators:
    def test_su2_relations_each_factor(self):
        jp, jm = rep4.so4_generators()
        for gens in (jp, jm):
            for a, b, c in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
                comm = gens[a] @ gens[b] - gens[b] @ gens[a]
                assert np.allclose(comm, gens[c], atol=1e-13)

    def test_factors_commute(self):
        jp, jm = rep4.so4_generators()
        for a in jp:
            for b in jm:
                assert np.allclose(a @ b - b @ a, 0.0, atol=1e-13)

    def test_casimir_spin_half(self):
        jp, jm = rep4.so4_generators()
        for gens in (jp, jm):
            cas = -sum(g @ g for g in gens)
            assert np.allclose(cas, 0.75 * np.eye(4), atol=1e-13)

    def test_reference_triple_quaternionic(self):
        iq = rep4.quaternion_triple()
        for m in iq:
            assert np.allclose(m @ m, -np.eye(4))
        assert np.allclose(iq[0] @ iq[1], iq[2])


class TestLift:
    def test_single_r4_factor_returns_base(self):
        space = rep4.TensorSpace(["R4"])
        jp, jm = space.lift_generators()
        bp, bm = rep4.so4_generators()
        for a in range(3):
            assert np.allclose(jp[a], bp[a])
            assert np.allclose(jm[a], bm[a])

    def test_selfdual_factor_trivial_under_minus(self):
        space = rep4.TensorSpace(["L+"])
        _, jm = space.lift_generators()
        for g in jm:
            assert np.allclose(g, 0.0)

    def test_sym2_casimir_spins_zero_and_two(self):
        space = rep4.TensorSpace(["Sym2L+"])
        cas_p, cas_m = space.casimirs()
        evals = np.sort(np.linalg.eigvalsh(cas_p))
        assert np.allclose(evals, [0.0] + [6.0] * 5, atol=1e-10)
        assert np.allclose(cas_m, 0.0)


class TestProjectors:
    def test_family_space_ranks(self):
        table = rep4.build_projectors(rep4.TensorSpace(["R4", "Sym2L+"]))
        ranks = {label: table[label].rank for label in table.labels()}
        assert ranks == {(5, 1): 12, (3, 1): 8, (1, 1): 4}

    def test_idempotent_symmetric_orthogonal_complete(self):
        table = rep4.build_projectors(rep4.TensorSpace(["R4", "Sym2L+"]))
        labels = table.labels()
        for label in labels:
            p = table[label].matrix
            assert np.linalg.norm(p @ p - p) < 1e-10
            assert np.linalg.norm(p.T - p) < 1e-10
        for la in labels:
            for lb in labels:
                if la != lb:
                    prod = table[la].matrix @ table[lb].matrix
                    assert np.linalg.norm(prod) < 1e-10
        assert table.completeness_defect() < 1e-10
        assert sum(table[label].rank for label in labels) == table.space.dim

    def test_equivariance(self):
        space = rep4.TensorSpace(["R4", "Sym2L+"])
        table = rep4.build_projectors(space)
        jp, jm = space.lift_generators()
        for label in table.labels():
            p = table[label].matrix
            for g in jp + jm:
                assert np.linalg.norm(p @ g - g @ p) < 1e-9

    def test_selfdual_square_clebsch_gordan(self):
        # L+ (x) L+ splits as 5 + 3 + 1; its symmetric part is 5 + 1
        table = rep4.build_projectors(rep4.TensorSpace(["L+", "L+"]))
        ranks = {label: table[label].rank for label in table.labels()}
        assert ranks == {(4, 0): 5, (2, 0): 3, (0, 0): 1}
        sym_table = rep4.build_projectors(rep4.TensorSpace(["Sym2L+"]))
        sym_ranks = {label: sym_table[label].rank for label in sym_table.labels()}
        assert sym_ranks == {(4, 0): 5, (0, 0): 1}

    def test_sym3_labels_for_bianchi_target(self):
        table = rep4.build_projectors(rep4.TensorSpace(["Sym3L+"]))
        ranks = {label: table[label].rank for label in table.labels()}
        assert ranks == {(6, 0): 7, (2, 0): 3}

    def test_isotypic_multiplicity_flag(self):
        table = rep4.build_projectors(rep4.TensorSpace(["L+", "Sym2L+"]))
        assert table[(2, 0)].multiplicity == 2
        assert table[(2, 0)].rank == 6
        assert table[(6, 0)].multiplicity == 1

    @pytest.mark.parametrize("tags", [
        ("R4",), ("L+", "L+"), ("Sym3L+",), ("L+", "Sym2L+"), ("R4", "L+"),
    ])
    def test_completeness_on_every_space(self, tags):
        table = rep4.build_projectors(rep4.TensorSpace(list(tags)))
        assert table.completeness_defect() < 1e-10
        assert sum(table[label].rank for label in table.labels()) \
            == table.space.dim

    def test_trace_pattern_lands_in_s11(self):
        table = rep4.build_projectors(rep4.TensorSpace(["R4", "Sym2L+"]))
        rng = np.random.default_rng(3)
        for _ in range(5):
            v = rep4.s11_element(rng.normal(size=4))
            assert np.linalg.norm(table.project((1, 1), v) - v) < 1e-12

    def test_cache_roundtrip(self, tmp_path):
        space = rep4.TensorSpace(["R4", "Sym2L+"])
        path = tmp_path / "projectors.bin"
        table = rep4.build_projectors(space, cache_path=path)
        assert path.exists()
        reloaded = rep4.build_projectors(rep4.TensorSpace(["R4", "Sym2L+"]),
                                         cache_path=path)
        for label in table.labels():
            assert np.array_equal(table[label].matrix, reloaded[label].matrix)
            assert table[label].rank == reloaded[label].rank

    def test_cache_signature_mismatch_rebuilds(self, tmp_path):
        path = tmp_path / "projectors.bin"
        rep4.build_projectors(rep4.TensorSpace(["L+", "L+"]), cache_path=path)
        table = rep4.build_projectors(rep4.TensorSpace(["R4", "Sym2L+"]),
                                      cache_path=path)
        assert {label: table[label].rank for label in table.labels()} == {
            (5, 1): 12, (3, 1): 8, (1, 1): 4}


class TestExplicitParameterizations:
    def test_span_dimensions(self):
        assert rep4.s51_span().shape == (24, 12)
        assert rep4.s31_span().shape == (24, 8)
        assert rep4.s11_span().shape == (24, 4)

    def test_spans_mutually_orthogonal(self):
        spans = [rep4.s51_span(), rep4.s31_span(), rep4.s11_span()]
        for a in range(3):
            for b in range(a + 1, 3):
                assert np.linalg.norm(spans[a].T @ spans[b]) < 1e-10

    def test_spans_match_casimir_projectors(self):
        table = rep4.build_projectors(rep4.TensorSpace(["R4", "Sym2L+"]))
        pairs = [((5, 1), rep4.s51_span()), ((3, 1), rep4.s31_span()),
                 ((1, 1), rep4.s11_span())]
        for label, span in pairs:
            dist = rep4.subspace_distance(span, _range_basis(table[label]))
            assert dist < 1e-9

    def test_s31_pattern_annihilated_by_p51(self):
        table = rep4.build_projectors(rep4.TensorSpace(["R4", "Sym2L+"]))
        rng = np.random.default_rng(4)
        for _ in range(5):
            v = rep4.s31_element(*rng.normal(size=(3, 4)))
            assert np.linalg.norm(table.project((5, 1), v)) < 1e-12
            fam = rep4.unpack_family(v)
            assert rep4.explicit_S51_membership(fam) > 1e-3 * np.linalg.norm(v)

    def test_membership_zero_element(self):
        assert rep4.explicit_S51_membership(np.zeros((3, 3, 4))) == 0.0

    def test_membership_cross_validation(self):
        # residual ~ 0 iff the complement of the P51 part is ~ 0, with
        # norm-equivalence constants of order one
        table = rep4.build_projectors(rep4.TensorSpace(["R4", "Sym2L+"]))
        rng = np.random.default_rng(5)
        lower = table[(3, 1)].matrix + table[(1, 1)].matrix
        for _ in range(100):
            fam = rng.normal(size=(3, 3, 4))
            fam = 0.5 * (fam + fam.transpose(1, 0, 2))
            vec = rep4.pack_family(fam)
            member = rep4.explicit_S51_membership(rep4.unpack_family(vec))
            offpart = np.linalg.norm(lower @ vec)
            if offpart < 1e-12:
                assert member < 1e-10
            else:
                assert 0.05 < member / offpart < 20.0

    def test_pack_unpack_roundtrip(self):
        rng = np.random.default_rng(6)
        fam = rng.normal(size=(3, 3, 4))
        fam = 0.5 * (fam + fam.transpose(1, 0, 2))
        assert np.allclose(rep4.unpack_family(rep4.pack_family(fam)), fam)


class TestSubspaceDistance:
    def test_identical_spans(self):
        rng = np.random.default_rng(7)
        m = rng.normal(size=(10, 4))
        q, _ = np.linalg.qr(m)
        mix = m @ rng.normal(size=(4, 4))
        assert rep4.subspace_distance(m, mix) < 1e-12

    def test_orthogonal_spans(self):
        a = np.eye(6)[:, :2]
        b = np.eye(6)[:, 2:4]
        assert rep4.subspace_distance(a, b) == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        assert rep4.subspace_distance(np.eye(6)[:, :2], np.eye(6)[:, :3]) == 1.0


def test_spin_label_rejects_bad_eigenvalue():
    with pytest.raises(ValueError):
        rep4._spin_label(1.37)
