"""Quaternion arithmetic and the realified right action on R^8."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcontact.quatalg import (
    IMAGINARY_UNITS,
    QI,
    QJ,
    QK,
    QONE,
    Quaternion,
    ambient_inner,
    qmul,
    right_mul_matrix,
    right_multiply_vector,
)

finite = st.floats(min_value=-10.0, max_value=10.0,
                   allow_nan=False, allow_infinity=False)
quaternions = st.builds(Quaternion, finite, finite, finite, finite)


class TestProduct:
    def test_defining_relations(self):
        for a, b, c in [(QI, QJ, QK), (QJ, QK, QI), (QK, QI, QJ)]:
            assert np.allclose(qmul(a, b).as_array(), c.as_array())
        for unit in IMAGINARY_UNITS:
            assert np.allclose(qmul(unit, unit).as_array(), (-QONE).as_array())

    def test_identity(self):
        q = Quaternion(0.7, -1.2, 3.0, 0.25)
        assert np.allclose(qmul(QONE, q).as_array(), q.as_array())
        assert np.allclose(qmul(q, QONE).as_array(), q.as_array())

    def test_one_plus_i_times_one_plus_j(self):
        # oracle: expand by bilinearity over the basis products
        basis = {"1": QONE, "i": QI, "j": QJ, "k": QK}
        p = {"1": 1.0, "i": 1.0}
        q = {"1": 1.0, "j": 1.0}
        expected = np.zeros(4)
        for ka, ca in p.items():
            for kb, cb in q.items():
                expected += ca * cb * qmul(basis[ka], basis[kb]).as_array()
        got = qmul(QONE + QI, QONE + QJ)
        assert np.allclose(got.as_array(), expected)
        assert np.allclose(expected, [1.0, 1.0, 1.0, 1.0])

    @settings(max_examples=100, deadline=None)
    @given(quaternions, quaternions)
    def test_norm_multiplicative(self, p, q):
        assert qmul(p, q).norm() == pytest.approx(p.norm() * q.norm(),
                                                  rel=1e-10, abs=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(quaternions, quaternions, quaternions)
    def test_associative(self, p, q, r):
        left = qmul(qmul(p, q), r).as_array()
        right = qmul(p, qmul(q, r)).as_array()
        assert np.allclose(left, right, atol=1e-9)


class TestRightMulMatrix:
    def test_identity_quaternion(self):
        assert np.allclose(right_mul_matrix(QONE), np.eye(8))

    def test_i_squares_to_minus_one(self):
        m = right_mul_matrix(QI)
        assert np.allclose(m @ m, -np.eye(8))

    def test_composition_reverses_order(self):
        # checked on all 8 basis vectors: v.i.j = v.(ij)
        mi, mj = right_mul_matrix(QI), right_mul_matrix(QJ)
        mk = right_mul_matrix(QK)
        for a in range(8):
            v = np.eye(8)[a]
            assert np.allclose(mj @ (mi @ v), mk @ v)
        assert np.allclose(mj @ mi, mk)
        # general law: M(p) M(q) = M(q p)
        rng = np.random.default_rng(0)
        for _ in range(20):
            p = Quaternion(*rng.normal(size=4))
            q = Quaternion(*rng.normal(size=4))
            assert np.allclose(right_mul_matrix(p) @ right_mul_matrix(q),
                               right_mul_matrix(qmul(q, p)), atol=1e-12)

    def test_unit_orthogonal(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            q = Quaternion(*rng.normal(size=4))
            q = (1.0 / q.norm()) * q
            m = right_mul_matrix(q)
            assert np.linalg.norm(m.T @ m - np.eye(8)) < 1e-12

    def test_imaginary_units_skew_and_anticommute(self):
        mats = [right_mul_matrix(q) for q in IMAGINARY_UNITS]
        for m in mats:
            assert np.allclose(m.T, -m)
        for a in range(3):
            for b in range(a + 1, 3):
                assert np.allclose(mats[a] @ mats[b] + mats[b] @ mats[a],
                                   np.zeros((8, 8)))

    def test_block_diagonal(self):
        m = right_mul_matrix(Quaternion(0.3, -1.0, 0.2, 2.0))
        assert np.allclose(m[:4, 4:], 0.0)
        assert np.allclose(m[4:, :4], 0.0)
        assert np.allclose(m[:4, :4], m[4:, 4:])


class TestAmbientInner:
    def test_orthonormal_basis(self):
        e = np.eye(8)
        assert ambient_inner(e[0], e[0]) == 1.0
        assert ambient_inner(e[0], e[1]) == 0.0

    def test_right_multiplication_isometry(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            q = Quaternion(*rng.normal(size=4))
            q = (1.0 / q.norm()) * q
            u = rng.normal(size=8)
            v = rng.normal(size=8)
            lhs = ambient_inner(right_multiply_vector(u, q),
                                right_multiply_vector(v, q))
            assert abs(lhs - ambient_inner(u, v)) < 1e-12
