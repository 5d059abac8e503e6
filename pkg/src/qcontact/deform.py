"""Linearized deformation theory at the canonical 7-sphere structure.

A deformation is a triple of covectors on H with values in the vertical
complement; infinitesimal diffeomorphisms map into deformations, and the
linearized integrability operator is the S^{5,1} projection of a second
order operator built from a pointwise trace solve.  The linearization is
validated against the nonlinear residual pipeline: for small t the
residual of the perturbed triple grows like t * ||A(theta)||.

Everything here is anchored at the canonical structure; the base frame
is the round one and the Reeb fields are exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rep4
from .geometry import OneFormField, VectorField
from .qcstruct import (
    ContactTriple,
    canonical_triple,
    frame_pack,
    integrability_residual,
    perturb_triple,
    torsion_from_frame,
)
from .quatalg import (
    IMAGINARY_UNITS,
    Quaternion,
    left_mul_block,
    right_mul_matrix,
)

# Stencil step for differentiating the trace-solve output (itself an
# algebraic quantity, so one order coarser than the base FD step).
TRACE_FD_STEP = 1e-4

_REEB_MATS = [2.0 * right_mul_matrix(q.conj()) for q in IMAGINARY_UNITS]
_DETA_MATS = [right_mul_matrix(q.conj()) for q in IMAGINARY_UNITS]


class DeformationField:
    """Three H-covector fields with vertical values, W-killed.

    Wraps ambient 1-forms phi_i into theta_i = phi_i - sum_j
    phi_i(R_j) eta_j, which vanish on the canonical complement; the
    correction keeps the linearized operators well defined and matches
    the gauge freedom of the nonlinear pipeline at first order.
    """

    def __init__(self, phis, name="deformation"):
        if len(phis) != 3:
            raise ValueError("a deformation needs exactly three forms")
        self.raw = tuple(phis)
        self.name = name
        base = canonical_triple()
        self._eta = base.forms
        self.forms = tuple(
            self._killed_form(i) for i in range(3)
        )

    def _killed_form(self, i: int) -> OneFormField:
        phi = self.raw[i]

        def mval(x, j):
            return float(np.dot(phi.coeff(x), _REEB_MATS[j] @ x))

        def coeff(x):
            x = np.asarray(x, float)
            out = phi.coeff(x).copy()
            for j in range(3):
                out -= mval(x, j) * self._eta[j].coeff(x)
            return out

        jacobian = None
        if phi.has_analytic_jacobian:
            def jacobian(x):
                x = np.asarray(x, float)
                jac = phi.jacobian(x).copy()
                cphi = phi.coeff(x)
                jphi = phi.jacobian(x)
                for j in range(3):
                    m = mval(x, j)
                    grad_m = jphi.T @ (_REEB_MATS[j] @ x) + _REEB_MATS[j].T @ cphi
                    jac -= m * self._eta[j].jacobian(x)
                    jac -= np.outer(self._eta[j].coeff(x), grad_m)
                return jac

        return OneFormField(coeff, jacobian, name=f"{self.name}:{i}")

    def scaled(self, s: float) -> "DeformationField":
        forms = []
        for phi in self.raw:
            jac = None
            if phi.has_analytic_jacobian:
                def jac(x, phi=phi):
                    return s * phi.jacobian(x)
            forms.append(OneFormField(
                lambda x, phi=phi: s * phi.coeff(x), jac))
        return DeformationField(forms, name=f"{self.name}*{s}")


def add_deformations(a: DeformationField, b: DeformationField,
                     ca: float = 1.0, cb: float = 1.0) -> DeformationField:
    forms = []
    for fa, fb in zip(a.raw, b.raw):
        jac = None
        if fa.has_analytic_jacobian and fb.has_analytic_jacobian:
            def jac(x, fa=fa, fb=fb):
                return ca * fa.jacobian(x) + cb * fb.jacobian(x)
        forms.append(OneFormField(
            lambda x, fa=fa, fb=fb: ca * fa.coeff(x) + cb * fb.coeff(x), jac))
    return DeformationField(forms, name="lincomb")


# ---------------------------------------------------------------------------
# Infinitesimal diffeomorphisms
# ---------------------------------------------------------------------------


def diffeo_to_deformation(zeta: VectorField) -> DeformationField:
    """The deformation X -> X.(eta(zeta)) + d(eta)(zeta, X) of a tangent field.

    Coefficients are analytic (given zeta's Jacobian); the Jacobians of
    the resulting forms fall back to finite differences, which is ample
    for the gauge-invariance tolerances.
    """
    forms = []
    for i in range(3):
        half_m = 0.5 * _DETA_MATS[i]

        def coeff(x, half_m=half_m):
            x = np.asarray(x, float)
            z = zeta(x)
            jz = zeta.jacobian(x)
            if jz is None:
                raise ValueError("zeta needs a Jacobian evaluator")
            # grad of eta_i(zeta) = grad of <half_m x, zeta(x)>
            grad_f = half_m.T @ z + jz.T @ (half_m @ x)
            # i_zeta d(eta_i): d(eta_i)(zeta, v) = zeta^T (2 half_m)^T... the
            # canonical d-matrix is (J^T - J) = -2 half_m for skew half_m
            return grad_f + 2.0 * half_m @ z

        forms.append(OneFormField(coeff, None, name=f"D(zeta):{i}"))
    return DeformationField(forms, name="diffeo")


def sphere_tangent_polynomial_field(terms) -> VectorField:
    """Tangent field zeta = c(x) - <x, c(x)> x for polynomial c.

    `terms` is a list of (component, exponents, coeff) monomial triples;
    the Jacobian is exact.
    """
    base = _poly_vector(terms)

    def func(x):
        x = np.asarray(x, float)
        c = base[0](x)
        return c - np.dot(x, c) * x

    def jacobian(x):
        x = np.asarray(x, float)
        c = base[0](x)
        jc = base[1](x)
        return jc - np.outer(x, c + jc.T @ x) - np.dot(x, c) * np.eye(8)

    return VectorField(func, jacobian, name="poly-tangent")


def _poly_vector(terms):
    clean = [(int(u), tuple(int(e) for e in expo), float(c))
             for u, expo, c in terms]

    def func(x):
        out = np.zeros(8)
        for u, expo, c in clean:
            val = c
            for b, e in enumerate(expo):
                if e:
                    val *= x[b] ** e
            out[u] += val
        return out

    def jac(x):
        out = np.zeros((8, 8))
        for u, expo, c in clean:
            for b in range(8):
                if expo[b]:
                    val = c * expo[b]
                    for bb, e in enumerate(expo):
                        ee = e - 1 if bb == b else e
                        if ee:
                            val *= x[bb] ** ee
                    out[u, b] += val
        return out

    return func, jac


def random_tangent_field(seed: int, degree: int = 2,
                         terms_per_component: int = 3) -> VectorField:
    """Seeded random polynomial tangent field on the 7-sphere."""
    rng = np.random.default_rng(seed)
    terms = []
    for u in range(8):
        for _ in range(terms_per_component):
            total = int(rng.integers(0, degree + 1))
            expo = [0] * 8
            for _ in range(total):
                expo[int(rng.integers(0, 8))] += 1
            terms.append((u, tuple(expo), float(rng.normal())))
    return sphere_tangent_polynomial_field(terms)


def sp2_field(d11: Quaternion, d22: Quaternion, d12: Quaternion) -> VectorField:
    """Linear field x -> A x for a quaternionic skew-hermitian A.

    These generate the symmetry group of the canonical structure, so
    their deformations lie in the kernel of the linearized operator.
    """
    a = np.zeros((8, 8))
    a[:4, :4] = left_mul_block(d11)
    a[:4, 4:] = left_mul_block(d12)
    a[4:, :4] = left_mul_block(-d12.conj())
    a[4:, 4:] = left_mul_block(d22)
    return VectorField(lambda x: a @ x, jacobian=lambda x: a, name="sp2")


# ---------------------------------------------------------------------------
# Trace solve and the linearized operator
# ---------------------------------------------------------------------------


@dataclass
class TraceSolveResult:
    """Pointwise solution of the normalization trace relation."""

    source: np.ndarray          # s_ij = (d theta_i ^ d eta_j + sym)|_H / vol
    trace: float                # tr(a-dot)
    sym_sum: np.ndarray         # a-dot_ij + a-dot_ji
    residual: float             # back-substitution defect

    @property
    def a_sym(self) -> np.ndarray:
        return 0.5 * self.sym_sum


def _pf4(a, b):
    return float(
        a[0, 1] * b[2, 3] - a[0, 2] * b[1, 3] + a[0, 3] * b[1, 2]
        + a[1, 2] * b[0, 3] - a[1, 3] * b[0, 2] + a[2, 3] * b[0, 1]
    )


def solve_trace(theta: DeformationField, p, base: ContactTriple | None = None,
                frame=None) -> TraceSolveResult:
    """Solve sym_ij + s_ij + tr(a-dot) delta_ij = 0 at a canonical point.

    s_ij is the 4-form (d theta_i ^ d eta_j + d theta_j ^ d eta_i)|_H
    identified with a function through the unit d eta_i ^ d eta_i|_H =
    2 vol_H (first variation of the wedge-orthonormality condition,
    whose unperturbed diagonal value is 2).  The trace convention (the
    scalar enters times the identity matrix) and this normalization are
    validated downstream by the linearization consistency test.
    """
    if base is None:
        base = canonical_triple()
    if frame is None:
        frame = frame_pack(base, p)
    onb = frame.onb
    w = [onb.T @ frame.d_mats[i] @ onb for i in range(3)]
    dtheta = [onb.T @ f.d_matrix(p) @ onb for f in theta.forms]

    s = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            s[i, j] = 0.5 * (_pf4(dtheta[i], w[j]) + _pf4(dtheta[j], w[i]))
    trace = -np.trace(s) / 5.0
    sym_sum = -(s + trace * np.eye(3))
    residual = float(np.abs(sym_sum + s + trace * np.eye(3)).max())
    return TraceSolveResult(source=s, trace=trace, sym_sum=sym_sum,
                            residual=residual)


@dataclass
class LinearizedTorsion:
    """Value of the linearized integrability operator at one point."""

    family: np.ndarray          # A0 components (3, 3, 4) in the ONB
    vector: np.ndarray          # packed element of R^4 (x) Sym^2(L+)
    s51: np.ndarray             # its S^{5,1} projection

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.s51))


def a_operator(theta: DeformationField, p, step=TRACE_FD_STEP) -> LinearizedTorsion:
    """S^{5,1} part of -d(sym_ij)|_H + (i_R_i d theta_j + i_R_j d theta_i)|_H.

    The symmetric trace-solve output is differentiated along H on a
    retracted stencil; the Reeb contractions are pointwise.  The kernel
    of the map contains every deformation induced by a diffeomorphism.
    """
    base = canonical_triple()
    p = np.asarray(p, float)
    frame = frame_pack(base, p)
    onb = frame.onb

    def sym_field(q):
        return solve_trace(theta, q, base=base).sym_sum

    dsym = np.empty((3, 3, 4))
    for a in range(4):
        direction = onb[:, a]
        plus = base.surface.retract(p + step * direction)
        minus = base.surface.retract(p - step * direction)
        dsym[:, :, a] = (sym_field(plus) - sym_field(minus)) / (2.0 * step)

    family = np.empty((3, 3, 4))
    for i in range(3):
        for j in range(3):
            contract = (theta.forms[j].d_matrix(p).T @ frame.reeb[:, i]
                        + theta.forms[i].d_matrix(p).T @ frame.reeb[:, j])
            family[i, j] = -dsym[i, j] + onb.T @ contract

    ref = np.einsum("ba,ijb->ija", frame.gauge_rot, family)
    vector = rep4.pack_family(ref)
    from .qcstruct import family_table
    s51 = family_table().project((5, 1), vector)
    return LinearizedTorsion(family=family, vector=vector, s51=s51)


def nonlinear_slope(theta: DeformationField, p, t: float) -> float:
    """Residual of the canonical triple perturbed by t * theta, over t.

    For small t this approximates ||A(theta)|| at p; the agreement is
    the primary consistency gate between the linearized and nonlinear
    pipelines.
    """
    base = canonical_triple()
    perturbed = perturb_triple(base, theta.forms, t)
    res = integrability_residual(perturbed, p)
    return res.raw / t
