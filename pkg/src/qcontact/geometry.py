"""Embedded 7-manifold machinery on level surfaces in R^8.

Surfaces are level sets F^{-1}(1) with a Newton retraction along the
gradient; vector fields and 1-forms are carried as ambient evaluators
restricted along the surface (no charts).  Exterior derivatives and Lie
brackets fall back to central finite differences when no analytic
Jacobian is available.
"""

from __future__ import annotations

import numpy as np

# Central-difference step: balances truncation against roundoff for
# second-order schemes in double precision.
DEFAULT_FD_STEP = 1e-5
RETRACT_TOL = 1e-13
RETRACT_MAX_ITER = 50


class RetractionError(RuntimeError):
    """Newton retraction failed to reach the surface."""


class LevelSurface:
    """The 7-manifold F^{-1}(1) in R^8.

    Parameters
    ----------
    func : callable(point) -> float
        Defining scalar function.
    grad : callable(point) -> ndarray(8)
        Its gradient.
    name : str
        Identifier used in reports.
    """

    def __init__(self, func, grad, name="surface"):
        self.func = func
        self.grad = grad
        self.name = name

    def value(self, p) -> float:
        return float(self.func(np.asarray(p, float)))

    def gradient(self, p) -> np.ndarray:
        return np.asarray(self.grad(np.asarray(p, float)), float)

    def on_surface(self, p, tol=1e-10) -> bool:
        return abs(self.value(p) - 1.0) < tol

    def retract(self, p) -> np.ndarray:
        """Project a near-point onto the surface by Newton steps along grad F."""
        x = np.asarray(p, dtype=float).copy()
        for _ in range(RETRACT_MAX_ITER):
            r = self.value(x) - 1.0
            if abs(r) < RETRACT_TOL:
                return x
            g = self.gradient(x)
            gg = float(np.dot(g, g))
            if gg < 1e-20:
                raise RetractionError("vanishing gradient during retraction")
            x = x - (r / gg) * g
        if abs(self.value(x) - 1.0) < 10 * RETRACT_TOL:
            return x
        raise RetractionError(f"no convergence after {RETRACT_MAX_ITER} iterations")

    def tangent_projector(self, p) -> np.ndarray:
        """Orthogonal projector onto ker dF_p (symmetric, idempotent, rank 7)."""
        g = self.gradient(p)
        n = float(np.linalg.norm(g))
        if n < 1e-12:
            raise ValueError("singular point: gradient vanishes")
        u = g / n
        return np.eye(8) - np.outer(u, u)

    def sample_points(self, count: int, seed: int) -> list[np.ndarray]:
        """Deterministic pseudo-random points on the surface.

        Gaussian draws retracted to the surface; failed retractions are
        skipped and redrawn, with a 10x oversampling cap.
        """
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(seed)
        points: list[np.ndarray] = []
        attempts = 0
        while len(points) < count:
            if attempts >= 10 * count:
                raise RetractionError("sampling exhausted 10x oversampling budget")
            attempts += 1
            draw = rng.normal(size=8)
            norm = np.linalg.norm(draw)
            if norm < 1e-8:
                continue
            try:
                points.append(self.retract(draw / norm))
            except RetractionError:
                continue
        return points


def sphere_surface() -> LevelSurface:
    """The unit 7-sphere |x|^2 = 1."""
    return LevelSurface(
        func=lambda x: float(np.dot(x, x)),
        grad=lambda x: 2.0 * x,
        name="S7",
    )


def tangent_projector(surf: LevelSurface, p) -> np.ndarray:
    if not surf.on_surface(p):
        raise ValueError("point is not on the surface")
    return surf.tangent_projector(p)


def sample_points(surf: LevelSurface, count: int, seed: int) -> list[np.ndarray]:
    return surf.sample_points(count, seed)


class OneFormField:
    """Smooth ambient 1-form: p -> covector c(p) with c(p).v the pairing.

    An analytic Jacobian evaluator (8x8 matrix of partials dc_i/dx_j) can
    be supplied; otherwise central differences with step `fd_step` are
    used for exterior derivatives.
    """

    def __init__(self, coeff, jacobian=None, fd_step=DEFAULT_FD_STEP, name=""):
        self._coeff = coeff
        self._jacobian = jacobian
        self.fd_step = fd_step
        self.name = name

    @property
    def has_analytic_jacobian(self) -> bool:
        return self._jacobian is not None

    def coeff(self, p) -> np.ndarray:
        return np.asarray(self._coeff(np.asarray(p, float)), float)

    def __call__(self, p, v) -> float:
        return float(np.dot(self.coeff(p), np.asarray(v, float)))

    def jacobian(self, p) -> np.ndarray:
        """Matrix J with J[i, j] = dc_i/dx_j at p."""
        if self._jacobian is not None:
            return np.asarray(self._jacobian(np.asarray(p, float)), float)
        return self.fd_jacobian(p)

    def fd_jacobian(self, p, step=None) -> np.ndarray:
        h = self.fd_step if step is None else step
        p = np.asarray(p, float)
        jac = np.empty((8, 8))
        for a in range(8):
            dp = np.zeros(8)
            dp[a] = h
            jac[:, a] = (self.coeff(p + dp) - self.coeff(p - dp)) / (2.0 * h)
        return jac

    def d(self, p, u, v) -> float:
        """Exterior derivative d(theta)_p(u, v) for ambient vectors u, v."""
        jac = self.jacobian(p)
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        return float(u @ (jac.T - jac) @ v)

    def d_matrix(self, p) -> np.ndarray:
        """Antisymmetric matrix A with d(theta)(u, v) = u^T A v."""
        jac = self.jacobian(p)
        return jac.T - jac


def exterior_derivative(form: OneFormField, p, u, v) -> float:
    return form.d(p, u, v)


def constant_form(c) -> OneFormField:
    c = np.asarray(c, float)
    return OneFormField(
        coeff=lambda x, c=c: c,
        jacobian=lambda x: np.zeros((8, 8)),
        name="const",
    )


def linear_form(m) -> OneFormField:
    """Form with linear coefficients c(x) = M x."""
    m = np.asarray(m, float)
    return OneFormField(
        coeff=lambda x, m=m: m @ x,
        jacobian=lambda x, m=m: m,
        name="linear",
    )


class ScalarField:
    """Ambient scalar field with gradient (analytic when provided)."""

    def __init__(self, func, grad=None, fd_step=DEFAULT_FD_STEP, name=""):
        self._func = func
        self._grad = grad
        self.fd_step = fd_step
        self.name = name

    def __call__(self, p) -> float:
        return float(self._func(np.asarray(p, float)))

    def gradient(self, p) -> np.ndarray:
        p = np.asarray(p, float)
        if self._grad is not None:
            return np.asarray(self._grad(p), float)
        h = self.fd_step
        g = np.empty(8)
        for a in range(8):
            dp = np.zeros(8)
            dp[a] = h
            g[a] = (self._func(p + dp) - self._func(p - dp)) / (2.0 * h)
        return g

    def differential(self) -> OneFormField:
        """The 1-form df (closed; useful for d^2 = 0 checks)."""
        return OneFormField(coeff=lambda x: self.gradient(x), name=f"d({self.name})")


class VectorField:
    """Ambient vector field evaluator, optionally with analytic Jacobian."""

    def __init__(self, func, jacobian=None, name=""):
        self._func = func
        self._jacobian = jacobian
        self.name = name

    def __call__(self, p) -> np.ndarray:
        return np.asarray(self._func(np.asarray(p, float)), float)

    def jacobian(self, p):
        if self._jacobian is None:
            return None
        return np.asarray(self._jacobian(np.asarray(p, float)), float)


def projected_constant_field(surf: LevelSurface, c) -> VectorField:
    """Tangent field q -> P_q c obtained by projecting a constant vector."""
    c = np.asarray(c, float)

    def evaluate(q):
        return surf.tangent_projector(q) @ c

    return VectorField(evaluate, name="proj-const")


def lie_bracket(surf: LevelSurface, xf, yf, p, step=DEFAULT_FD_STEP) -> np.ndarray:
    """[X, Y](p) by central differences, re-projected to the tangent space.

    `xf`, `yf` are callables p -> ambient vector, assumed tangent to the
    surface near p.  Derivatives are taken along retracted curves so the
    fields are only evaluated on the surface.
    """
    p = np.asarray(p, float)
    x0 = np.asarray(xf(p), float)
    y0 = np.asarray(yf(p), float)

    def directional(field, direction):
        plus = surf.retract(p + step * direction)
        minus = surf.retract(p - step * direction)
        return (np.asarray(field(plus), float) - np.asarray(field(minus), float)) / (2.0 * step)

    bracket = directional(yf, x0) - directional(xf, y0)
    return surf.tangent_projector(p) @ bracket


def fd_directional_derivative(surf: LevelSurface, scalar, p, direction,
                              step=DEFAULT_FD_STEP) -> float:
    """Central-difference derivative of a surface scalar along a tangent vector."""
    p = np.asarray(p, float)
    d = np.asarray(direction, float)
    plus = surf.retract(p + step * d)
    minus = surf.retract(p - step * d)
    return (float(scalar(plus)) - float(scalar(minus))) / (2.0 * step)


# ---------------------------------------------------------------------------
# Polynomial coefficient fields (serializable: lists of monomial terms)
# ---------------------------------------------------------------------------


def _monomial(x: np.ndarray, expo) -> float:
    out = 1.0
    for b, e in enumerate(expo):
        if e:
            out *= x[b] ** e
    return out


def polynomial_one_form(terms, name="poly") -> OneFormField:
    """1-form with polynomial coefficients from (component, exponents, coeff)
    triples; exponents is an 8-tuple of monomial powers.  The Jacobian is
    exact (term-by-term differentiation)."""
    clean = [(int(u), tuple(int(e) for e in expo), float(c))
             for u, expo, c in terms]

    def coeff(x):
        out = np.zeros(8)
        for u, expo, c in clean:
            out[u] += c * _monomial(x, expo)
        return out

    def jacobian(x):
        jac = np.zeros((8, 8))
        for u, expo, c in clean:
            for b in range(8):
                if expo[b]:
                    lowered = list(expo)
                    lowered[b] -= 1
                    jac[u, b] += c * expo[b] * _monomial(x, tuple(lowered))
        return jac

    return OneFormField(coeff, jacobian, name=name)


def random_deformation_terms(seed: int, degree: int = 2,
                             terms_per_component: int = 3,
                             scale: float = 1.0) -> list[list]:
    """Three seeded random polynomial term tables for deformation forms.

    Each of the 24 coefficient functions gets `terms_per_component`
    monomials of total degree <= degree with N(0, scale^2) coefficients.
    """
    rng = np.random.default_rng(seed)
    tables = []
    for _ in range(3):
        terms = []
        for u in range(8):
            for _ in range(terms_per_component):
                total = int(rng.integers(0, degree + 1))
                expo = [0] * 8
                for _ in range(total):
                    expo[int(rng.integers(0, 8))] += 1
                terms.append((u, tuple(expo), float(rng.normal(scale=scale))))
        tables.append(terms)
    return tables
