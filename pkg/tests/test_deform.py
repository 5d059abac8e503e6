"""Linearized deformation operators at the canonical structure."""

import numpy as np
import pytest

from qcontact.deform import (
    _REEB_MATS,
    DeformationField,
    a_operator,
    add_deformations,
    diffeo_to_deformation,
    nonlinear_slope,
    random_tangent_field,
    solve_trace,
    sp2_field,
)
from qcontact.geometry import VectorField, polynomial_one_form, \
    random_deformation_terms
from qcontact.qcstruct import canonical_triple, frame_pack
from qcontact.quatalg import Quaternion


@pytest.fixture(scope="module")
def base():
    return canonical_triple()


@pytest.fixture(scope="module")
def points(base):
    return base.surface.sample_points(3, seed=81)


def _random_deformation(seed, terms=2):
    tables = random_deformation_terms(seed, degree=2, terms_per_component=terms)
    return DeformationField([polynomial_one_form(t) for t in tables])


class TestDeformationField:
    def test_vanishes_on_reeb_vectors(self, points):
        theta = _random_deformation(82)
        for p in points:
            for i in range(3):
                for j in range(3):
                    r = _REEB_MATS[j] @ p
                    assert abs(np.dot(theta.forms[i].coeff(p), r)) < 1e-12

    def test_killed_jacobian_matches_fd(self, points):
        theta = _random_deformation(83)
        p = points[0]
        for f in theta.forms:
            assert np.abs(f.jacobian(p) - f.fd_jacobian(p)).max() < 1e-6


class TestDiffeo:
    def test_reeb_field_maps_to_zero(self, points):
        reeb = VectorField(lambda x: _REEB_MATS[0] @ x,
                           jacobian=lambda x: _REEB_MATS[0])
        theta = diffeo_to_deformation(reeb)
        for p in points:
            for f in theta.forms:
                assert np.abs(f.coeff(p)).max() < 1e-6

    def test_linearity_in_zeta(self, points):
        z1 = random_tangent_field(84)
        z2 = random_tangent_field(85)
        a, b = 0.6, -1.7

        def combo(q):
            return a * z1(q) + b * z2(q)

        def combo_jac(q):
            return a * z1.jacobian(q) + b * z2.jacobian(q)

        tc = diffeo_to_deformation(VectorField(combo, jacobian=combo_jac))
        t1 = diffeo_to_deformation(z1)
        t2 = diffeo_to_deformation(z2)
        p = points[0]
        for i in range(3):
            lhs = tc.forms[i].coeff(p)
            rhs = a * t1.forms[i].coeff(p) + b * t2.forms[i].coeff(p)
            assert np.abs(lhs - rhs).max() < 1e-10

    def test_gauge_invariance_polynomial_fields(self, points):
        for seed in range(6):
            theta = diffeo_to_deformation(random_tangent_field(90 + seed))
            assert a_operator(theta, points[0]).norm < 1e-4

    def test_gauge_invariance_sp2(self, points):
        zeta = sp2_field(Quaternion(0, 1.0, -0.5, 0.2),
                         Quaternion(0, 0.3, 0.8, -1.0),
                         Quaternion(0.4, -0.2, 0.6, 0.1))
        theta = diffeo_to_deformation(zeta)
        for p in points:
            assert a_operator(theta, p).norm < 1e-5


class TestSolveTrace:
    def test_zero_deformation(self, base, points):
        zero = DeformationField([polynomial_one_form([]) for _ in range(3)])
        res = solve_trace(zero, points[0], base=base)
        assert res.trace == 0.0
        assert np.abs(res.sym_sum).max() == 0.0
        assert np.abs(res.a_sym).max() == 0.0

    def test_antiselfdual_source_vanishes(self, base, points):
        # a deformation whose restricted differential is anti-self-dual
        # at the test point pairs to zero against the self-dual base forms
        p = points[0]
        frame = frame_pack(base, p)
        ihat = [frame.ihat(k) for k in range(3)]
        rng = np.random.default_rng(86)
        # antisymmetric, orthogonal to the three self-dual generators
        k = rng.normal(size=(4, 4))
        k = k - k.T
        for m in ihat:
            k -= 0.25 * np.sum(k * (-m)) * (-m)
        amb = frame.onb @ k @ frame.onb.T
        half = 0.5 * amb

        theta = DeformationField([
            polynomial_one_form(
                [(u, tuple(np.eye(8, dtype=int)[b]), -half[u, b])
                 for u in range(8) for b in range(8)])
            for _ in range(3)
        ])
        res = solve_trace(theta, p, base=base)
        assert np.abs(res.source).max() < 1e-8
        assert np.abs(res.a_sym).max() < 1e-8

    def test_back_substitution(self, base, points):
        theta = _random_deformation(87)
        res = solve_trace(theta, points[1], base=base)
        assert res.residual < 1e-10


class TestAOperator:
    def test_zero(self, points):
        zero = DeformationField([polynomial_one_form([]) for _ in range(3)])
        assert a_operator(zero, points[0]).norm == 0.0

    def test_linearity(self, points):
        t1 = _random_deformation(88)
        t2 = _random_deformation(89)
        a, b = 1.3, -0.4
        combo = add_deformations(t1, t2, a, b)
        p = points[0]
        lhs = a_operator(combo, p).s51
        rhs = a * a_operator(t1, p).s51 + b * a_operator(t2, p).s51
        assert np.linalg.norm(lhs - rhs) < 1e-8

    def test_linearization_consistency(self, points):
        # the nonlinear residual of the perturbed triple grows like
        # t ||A(theta)||: the defining consistency gate
        for seed in (101, 102):
            theta = _random_deformation(seed)
            p = points[seed % len(points)]
            lin = a_operator(theta, p).norm
            for t in (1e-3, 5e-4):
                slope = nonlinear_slope(theta, p, t)
                assert abs(slope - lin) / lin < 0.05
