"""Level surfaces, retraction, finite-difference exterior calculus."""

import numpy as np
import pytest

from qcontact.geometry import (
    LevelSurface,
    OneFormField,
    RetractionError,
    ScalarField,
    constant_form,
    exterior_derivative,
    lie_bracket,
    linear_form,
    polynomial_one_form,
    projected_constant_field,
    random_deformation_terms,
    sample_points,
    sphere_surface,
    tangent_projector,
)
from qcontact.qcstruct import Sp2Element, galicki_surface
from qcontact.quatalg import QI, right_mul_matrix


class TestTangentProjector:
    def test_sphere_at_first_basis_point(self):
        surf = sphere_surface()
        e0 = np.eye(8)[0]
        p = tangent_projector(surf, e0)
        assert np.allclose(p, np.eye(8) - np.outer(e0, e0))

    def test_symmetric_idempotent(self):
        surf = sphere_surface()
        for p in sample_points(surf, 5, seed=0):
            proj = tangent_projector(surf, p)
            assert np.linalg.norm(proj @ proj - proj) < 1e-12
            assert np.linalg.norm(proj.T - proj) < 1e-12

    def test_rank_seven_on_galicki_surface(self):
        rng = np.random.default_rng(1)
        d = Sp2Element.random(rng, norm=0.2)
        surf = galicki_surface(d)
        for p in sample_points(surf, 100, seed=2):
            proj = surf.tangent_projector(p)
            sv = np.linalg.svd(proj, compute_uv=False)
            assert int(np.sum(sv > 1e-8)) == 7

    def test_off_surface_rejected(self):
        surf = sphere_surface()
        with pytest.raises(ValueError):
            tangent_projector(surf, 1.5 * np.eye(8)[0])

    def test_singular_point_rejected(self):
        surf = LevelSurface(lambda x: 1.0, lambda x: np.zeros(8))
        with pytest.raises(ValueError, match="singular"):
            surf.tangent_projector(np.eye(8)[0])


class TestExteriorDerivative:
    def test_constant_form_closed(self):
        form = constant_form([1.0, -2.0, 0.0, 3.0, 0.5, 0.0, 0.0, 1.0])
        rng = np.random.default_rng(3)
        p = rng.normal(size=8)
        u, v = rng.normal(size=8), rng.normal(size=8)
        assert exterior_derivative(form, p, u, v) == 0.0

    def test_canonical_linear_form(self):
        # theta(v) = <x i, v>: d(theta)(u, v) = 2 <u i, v>
        m = right_mul_matrix(QI)
        form = linear_form(m)
        surf = sphere_surface()
        rng = np.random.default_rng(4)
        for p in sample_points(surf, 3, seed=5):
            u, v = rng.normal(size=8), rng.normal(size=8)
            expected = 2.0 * float((m @ u) @ v)
            assert exterior_derivative(form, p, u, v) == pytest.approx(
                expected, abs=1e-12)
            # finite-difference Jacobian path agrees
            fd_only = OneFormField(coeff=form._coeff)
            assert fd_only.d(p, u, v) == pytest.approx(expected, abs=1e-6)

    def test_antisymmetry(self):
        terms = random_deformation_terms(seed=6, degree=3)[0]
        form = polynomial_one_form(terms)
        rng = np.random.default_rng(7)
        p, u, v = rng.normal(size=8), rng.normal(size=8), rng.normal(size=8)
        assert form.d(p, u, v) == pytest.approx(-form.d(p, v, u), abs=1e-12)

    def test_d_squared_vanishes(self):
        # df for a polynomial scalar with analytic gradient is closed
        def f(x):
            return x[0] ** 2 * x[3] - 2.0 * x[5] * x[1] + x[2] ** 3

        def grad(x):
            g = np.zeros(8)
            g[0] = 2 * x[0] * x[3]
            g[3] = x[0] ** 2
            g[5] = -2.0 * x[1]
            g[1] = -2.0 * x[5]
            g[2] = 3 * x[2] ** 2
            return g

        df = ScalarField(f, grad).differential()
        surf = sphere_surface()
        rng = np.random.default_rng(8)
        for p in sample_points(surf, 5, seed=9):
            proj = surf.tangent_projector(p)
            u = proj @ rng.normal(size=8)
            v = proj @ rng.normal(size=8)
            assert abs(df.d(p, u, v)) < 1e-5

    def test_analytic_vs_fd_jacobian(self):
        terms = random_deformation_terms(seed=10, degree=3)[1]
        form = polynomial_one_form(terms)
        rng = np.random.default_rng(11)
        p = rng.normal(size=8) * 0.5
        assert np.abs(form.jacobian(p) - form.fd_jacobian(p)).max() < 1e-6


class TestLieBracket:
    def test_self_bracket_vanishes(self):
        surf = sphere_surface()
        fld = projected_constant_field(surf, np.eye(8)[2])
        p = sample_points(surf, 1, seed=12)[0]
        assert np.linalg.norm(lie_bracket(surf, fld, fld, p)) < 1e-10

    def test_bracket_is_tangent(self):
        surf = sphere_surface()
        x = projected_constant_field(surf, [1, 0, 0.5, 0, 0, -1, 0, 0])
        y = projected_constant_field(surf, [0, 1, 0, -0.3, 0, 0, 2, 0])
        for p in sample_points(surf, 5, seed=13):
            br = lie_bracket(surf, x, y, p)
            normal = np.dot(br, p)
            assert abs(normal) < 1e-5

    def test_bilinearity(self):
        surf = sphere_surface()
        rng = np.random.default_rng(14)
        c1, c2, c3 = rng.normal(size=(3, 8))
        x1 = projected_constant_field(surf, c1)
        x2 = projected_constant_field(surf, c2)
        y = projected_constant_field(surf, c3)
        a, b = 0.7, -1.3

        def combo(q):
            return a * x1(q) + b * x2(q)

        p = sample_points(surf, 1, seed=15)[0]
        lhs = lie_bracket(surf, combo, y, p)
        rhs = a * lie_bracket(surf, x1, y, p) + b * lie_bracket(surf, x2, y, p)
        assert np.linalg.norm(lhs - rhs) < 1e-5

    def test_against_analytic_sphere_oracle(self):
        # for X = c1 - <q, c1> q, Y = c2 - <q, c2> q on the sphere:
        # [X, Y](q) = (<Y, c1> - <X, c2>) q + <q, c1> Y - <q, c2> X
        surf = sphere_surface()
        rng = np.random.default_rng(16)
        c1, c2 = rng.normal(size=(2, 8))
        x = projected_constant_field(surf, c1)
        y = projected_constant_field(surf, c2)
        for p in [np.eye(8)[0], sample_points(surf, 1, seed=17)[0]]:
            xv, yv = x(p), y(p)
            oracle = (np.dot(yv, c1) - np.dot(xv, c2)) * p \
                + np.dot(p, c1) * yv - np.dot(p, c2) * xv
            got = lie_bracket(surf, x, y, p)
            assert np.linalg.norm(got - oracle) < 1e-6


class TestSampling:
    def test_on_surface(self):
        surf = sphere_surface()
        for p in sample_points(surf, 20, seed=18):
            assert abs(np.linalg.norm(p) - 1.0) < 1e-12

    def test_deterministic(self):
        surf = sphere_surface()
        a = sample_points(surf, 10, seed=19)
        b = sample_points(surf, 10, seed=19)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_galicki_newton_retraction(self):
        rng = np.random.default_rng(20)
        d = Sp2Element.random(rng, norm=0.3)
        surf = galicki_surface(d)
        for p in sample_points(surf, 10, seed=21):
            assert abs(surf.value(p) - 1.0) < 1e-10

    def test_count_validation(self):
        with pytest.raises(ValueError):
            sample_points(sphere_surface(), 0, seed=0)

    def test_oversampling_budget_error(self):
        surf = LevelSurface(lambda x: 0.0, lambda x: np.zeros(8))
        with pytest.raises(RetractionError):
            sample_points(surf, 3, seed=22)


class TestScalarField:
    def test_fd_gradient_fallback(self):
        f = ScalarField(lambda x: float(np.sin(x[0]) + x[4] ** 2))
        p = np.zeros(8)
        p[0], p[4] = 0.3, -1.2
        g = f.gradient(p)
        assert g[0] == pytest.approx(np.cos(0.3), abs=1e-8)
        assert g[4] == pytest.approx(-2.4, abs=1e-8)
