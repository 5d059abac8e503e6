"""Quaternionic contact structures: validation, frames, vertical torsion.

A contact triple is three ambient 1-forms on a level 7-surface in R^8
whose restricted differentials span a definite 3-space of 2-forms on the
4-dim kernel distribution H.  This module extracts the compatible
metric and quaternionic structure, builds Reeb-type complements, forms
the symmetrized torsion family a_ij = alpha_ij + alpha_ji, and measures
integrability as the norm of its S^{5,1} component.

Pipeline conventions
--------------------
* 2-forms on H are stored as antisymmetric matrices A with w(u, v) =
  u^T A v; the endomorphism of a form is I = -G^{-1} A for metric G.
* Triples are gauge-normalized pointwise: the wedge Gram of the
  restricted differentials is brought to a multiple of the identity by
  the symmetric unit-determinant factor, which is trivial on already
  orthonormal triples and conformally invariant.
* The compatible metric comes from the closed form G = -W2 W3^{-1} W1
  valid for wedge-orthonormal triples; positivity of G is the
  orientation consistency test (I1 I2 = +I3).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import rep4
from .geometry import LevelSurface, OneFormField, ScalarField, sphere_surface
from .quatalg import (
    IMAGINARY_UNITS,
    Quaternion,
    left_mul_block,
    qmul,
    right_mul_block,
    right_mul_matrix,
    split_quaternion_pair,
)

# Step for the finite-difference gradient of the pointwise gauge factor
# (fourth-order stencil; the factor is analytic so truncation ~ h^4).
GAUGE_FD_STEP = 1e-3
DEFINITE_TOL = 1e-8


class StructureError(ValueError):
    """The triple fails to define a quaternionic contact structure."""


# ---------------------------------------------------------------------------
# Contact triples
# ---------------------------------------------------------------------------


class ContactTriple:
    """Three ambient 1-forms restricted along a level surface."""

    def __init__(self, surface: LevelSurface, forms, name="triple",
                 orientation: int = 1, consistency_check=None):
        if len(forms) != 3:
            raise ValueError("a contact triple needs exactly three forms")
        self.surface = surface
        self.forms = tuple(forms)
        self.name = name
        self.orientation = orientation
        # optional pointwise sanity functional (e.g. real-part defect of
        # the quaternionic expression defining the forms)
        self.consistency_check = consistency_check
        self._gauge_cache: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}
        self._point_cache: dict[bytes, dict] = {}

    def analytic(self) -> bool:
        return all(f.has_analytic_jacobian for f in self.forms)

    # -- pointwise fundamental data ------------------------------------

    def _point_data(self, p) -> dict:
        """Coefficients, Jacobians, kernel basis and wedge Gram at p.

        Memoized: the gauge-factor stencils revisit the same points many
        times and the form Jacobians dominate the cost.
        """
        p = np.asarray(p, float)
        key = p.tobytes()
        hit = self._point_cache.get(key)
        if hit is not None:
            return hit
        proj = self.surface.tangent_projector(p)
        coeffs = np.array([f.coeff(p) for f in self.forms])
        jacs = np.array([f.jacobian(p) for f in self.forms])
        dmats = np.array([j.T - j for j in jacs])

        rows = [self.surface.gradient(p)] + [proj @ c for c in coeffs]
        span = _gram_schmidt(np.array(rows).T)
        if span.shape[1] != 4:
            raise StructureError("not a codimension-3 distribution")
        ker_proj = np.eye(8) - span @ span.T
        basis = _gram_schmidt(ker_proj @ np.eye(8), want=4)
        if basis.shape[1] != 4:
            raise StructureError("kernel distribution has wrong dimension")

        def gram_in(b):
            w = [b.T @ dm @ b for dm in dmats]
            g = np.empty((3, 3))
            for i in range(3):
                for j in range(i, 3):
                    g[i, j] = g[j, i] = 0.5 * _pf4(w[i], w[j])
            return g, w

        gram, wmats = gram_in(basis)
        if np.trace(gram) < 0.0:
            basis = basis.copy()
            basis[:, 3] = -basis[:, 3]
            gram, wmats = gram_in(basis)
        data = {
            "proj": proj, "coeffs": coeffs, "jacs": jacs, "dmats": dmats,
            "basis": basis, "gram": gram, "wmats": wmats,
        }
        if len(self._point_cache) > 1024:
            self._point_cache.clear()
        self._point_cache[key] = data
        return data

    def kernel_basis(self, p) -> np.ndarray:
        """Deterministic ambient-orthonormal basis of H_p (8 x 4).

        Gram-Schmidt seeded by the coordinate order; the last vector is
        flipped if needed so the wedge Gram of the restricted
        differentials has positive trace.
        """
        return self._point_data(p)["basis"]

    def restricted_d_matrices(self, p, basis=None) -> list[np.ndarray]:
        """4x4 form matrices of d(eta_i)|_H in the given H-basis."""
        data = self._point_data(p)
        if basis is None:
            return data["wmats"]
        return [basis.T @ dm @ basis for dm in data["dmats"]]

    def wedge_gram(self, p, basis=None) -> np.ndarray:
        """Gram matrix C_ij = (w_i ^ w_j) / (2 vol) on H_p."""
        if basis is None:
            return self._point_data(p)["gram"]
        w = self.restricted_d_matrices(p, basis)
        gram = np.empty((3, 3))
        for i in range(3):
            for j in range(i, 3):
                gram[i, j] = gram[j, i] = 0.5 * _pf4(w[i], w[j])
        return gram

    def gauge_factor(self, p) -> np.ndarray:
        """Symmetric 3x3 factor A with A C A^T proportional to Id.

        A = (C / cbrt det C)^{-1/2}: basis-free, orientation-free and
        conformally invariant; exactly the identity on triples whose
        restricted differentials are already orthonormal.
        """
        return _unit_det_inverse_sqrt(self._point_data(p)["gram"])

    def _gauge_data(self, p) -> tuple[np.ndarray, np.ndarray]:
        """Gauge factor and its ambient gradient at a surface point (cached)."""
        p = np.asarray(p, float)
        key = p.tobytes()
        hit = self._gauge_cache.get(key)
        if hit is not None:
            return hit
        a0 = self.gauge_factor(p)
        grad = np.empty((3, 3, 8))
        h = GAUGE_FD_STEP
        for c in range(8):
            dp = np.zeros(8)
            dp[c] = h
            f1 = self.gauge_factor(self.surface.retract(p + dp))
            f2 = self.gauge_factor(self.surface.retract(p + 2 * dp))
            b1 = self.gauge_factor(self.surface.retract(p - dp))
            b2 = self.gauge_factor(self.surface.retract(p - 2 * dp))
            grad[:, :, c] = (-f2 + 8.0 * f1 - 8.0 * b1 + b2) / (12.0 * h)
        if len(self._gauge_cache) > 512:
            self._gauge_cache.clear()
        self._gauge_cache[key] = (a0, grad)
        return a0, grad

    def normalized_forms(self) -> tuple[OneFormField, OneFormField, OneFormField]:
        """The triple in the pointwise wedge-orthonormal gauge.

        Coefficients are A_ij(x) eta_j with A the gauge factor extended
        off the surface along retraction fibers; Jacobians carry the
        product-rule term with the finite-difference gradient of A.
        """
        out = []
        for i in range(3):
            out.append(OneFormField(
                coeff=self._norm_coeff(i),
                jacobian=self._norm_jacobian(i),
                name=f"{self.name}:norm{i + 1}",
            ))
        return tuple(out)

    def _norm_coeff(self, i):
        def coeff(x):
            base = self.surface.retract(x)
            a0, _ = self._gauge_data(base)
            data = self._point_data(x)
            return a0[i] @ data["coeffs"]
        return coeff

    def _norm_jacobian(self, i):
        def jac(x):
            base = self.surface.retract(x)
            a0, grad = self._gauge_data(base)
            data = self._point_data(x)
            total = np.einsum("j,jab->ab", a0[i], data["jacs"])
            for j in range(3):
                total += np.outer(data["coeffs"][j], grad[i, j])
            return total
        return jac


def _gram_schmidt(columns: np.ndarray, want=None, tol=1e-8) -> np.ndarray:
    """Orthonormalize columns in order, dropping dependent ones."""
    out = []
    for c in range(columns.shape[1]):
        v = columns[:, c].astype(float).copy()
        for u in out:
            v -= np.dot(u, v) * u
        n = np.linalg.norm(v)
        if n > tol:
            out.append(v / n)
        if want is not None and len(out) == want:
            break
    return np.array(out).T if out else np.zeros((columns.shape[0], 0))


def _pf4(a: np.ndarray, b: np.ndarray) -> float:
    """(alpha ^ beta)(e0, e1, e2, e3) for 2-forms given as antisym matrices."""
    return float(
        a[0, 1] * b[2, 3] - a[0, 2] * b[1, 3] + a[0, 3] * b[1, 2]
        + a[1, 2] * b[0, 3] - a[1, 3] * b[0, 2] + a[2, 3] * b[0, 1]
    )


def _unit_det_inverse_sqrt(gram: np.ndarray) -> np.ndarray:
    det = float(np.linalg.det(gram))
    if abs(det) < 1e-14:
        raise StructureError("degenerate wedge Gram matrix")
    n = gram / np.cbrt(det)
    evals, evecs = np.linalg.eigh(0.5 * (n + n.T))
    if np.any(evals <= 0.0):
        raise StructureError("wedge Gram matrix is not definite")
    return evecs @ np.diag(evals**-0.5) @ evecs.T


# ---------------------------------------------------------------------------
# Canonical and Galicki triples
# ---------------------------------------------------------------------------


def canonical_triple() -> ContactTriple:
    """The standard structure of the 7-sphere, H_x = (xH)^perp.

    Forms eta_i(v) = (1/2) <x qbar_i, v> so that d(eta_i)|_H(X, Y) =
    <X qbar_i, Y> = g(I_i X, Y) with g the round metric and I_1 I_2 =
    +I_3; the Reeb duals are R_i = 2 x qbar_i.  (The conjugates make the
    right-action triple direct; with plain q_i one gets I_1 I_2 = -I_3.)
    """
    forms = []
    for q in IMAGINARY_UNITS:
        m = 0.5 * right_mul_matrix(q.conj())
        forms.append(OneFormField(
            coeff=lambda x, m=m: m @ x,
            jacobian=lambda x, m=m: m,
            name=f"canonical:{q!r}",
        ))
    return ContactTriple(sphere_surface(), forms, name="canonical")


def canonical_reeb_fields():
    """The canonical Reeb evaluators R_i(x) = 2 x qbar_i."""
    mats = [2.0 * right_mul_matrix(q.conj()) for q in IMAGINARY_UNITS]
    return [lambda x, m=m: m @ np.asarray(x, float) for m in mats]


@dataclass(frozen=True)
class Sp2Element:
    """Quaternionic skew-hermitian 2x2 matrix (10 real parameters)."""

    d11: Quaternion
    d22: Quaternion
    d12: Quaternion

    def __post_init__(self):
        if abs(self.d11.w) > 1e-15 or abs(self.d22.w) > 1e-15:
            raise ValueError("diagonal entries must be imaginary quaternions")

    @property
    def d21(self) -> Quaternion:
        return -self.d12.conj()

    @classmethod
    def from_params(cls, params) -> "Sp2Element":
        p = [float(v) for v in params]
        if len(p) != 10:
            raise ValueError("need 10 real parameters")
        return cls(
            d11=Quaternion(0.0, p[0], p[1], p[2]),
            d22=Quaternion(0.0, p[3], p[4], p[5]),
            d12=Quaternion(p[6], p[7], p[8], p[9]),
        )

    def params(self) -> list[float]:
        return [
            self.d11.x, self.d11.y, self.d11.z,
            self.d22.x, self.d22.y, self.d22.z,
            self.d12.w, self.d12.x, self.d12.y, self.d12.z,
        ]

    def norm(self) -> float:
        return float(np.sqrt(
            self.d11.norm() ** 2 + self.d22.norm() ** 2 + 2 * self.d12.norm() ** 2
        ))

    def scaled(self, s: float) -> "Sp2Element":
        return Sp2Element.from_params([s * v for v in self.params()])

    @classmethod
    def random(cls, rng, norm=None) -> "Sp2Element":
        d = cls.from_params(rng.normal(size=10))
        if norm is not None and d.norm() > 0:
            d = d.scaled(norm / d.norm())
        return d

    # quaternionic sandwich q(x) = x^* D x and its building blocks

    def quadratic(self, x) -> Quaternion:
        x1, x2 = split_quaternion_pair(x)
        return self.bilinear(x1, x2, x1, x2)

    def bilinear(self, a1, a2, b1, b2) -> Quaternion:
        """a^* D b for quaternion pairs a = (a1, a2), b = (b1, b2)."""
        out = qmul(a1.conj(), qmul(self.d11, b1))
        out = out + qmul(a1.conj(), qmul(self.d12, b2))
        out = out + qmul(a2.conj(), qmul(self.d21, b1))
        out = out + qmul(a2.conj(), qmul(self.d22, b2))
        return out


class _GalickiKernel:
    """Realified matrix form of the quaternionic sandwich expressions.

    For fixed x the H-valued map v -> phi_x(v) = x^* v - (x^* D x / 4)
    (x^* D v + v^* D x) is a 4x8 matrix assembled from left/right
    multiplication blocks; coefficients and Jacobians of the contact
    forms come out of small matrix products instead of pointwise
    quaternion loops.
    """

    def __init__(self, d: Sp2Element):
        self.d = d
        self.d_real = np.zeros((8, 8))
        self.d_real[:4, :4] = left_mul_block(d.d11)
        self.d_real[:4, 4:] = left_mul_block(d.d12)
        self.d_real[4:, :4] = left_mul_block(d.d21)
        self.d_real[4:, 4:] = left_mul_block(d.d22)
        self.conj4 = np.diag([1.0, -1.0, -1.0, -1.0])
        basis = np.eye(8)
        self._lbar_basis = [self.lbar(basis[b]) for b in range(8)]
        # direction-independent pieces of d(sym)/dx_b
        self._dsym_basis = [
            self._lbar_basis[b] @ self.d_real + self.vdx(self.d_real[:, b])
            for b in range(8)
        ]
        self._bundle_key: bytes | None = None
        self._bundle: tuple[np.ndarray, np.ndarray] | None = None

    def lbar(self, x) -> np.ndarray:
        """4x8 matrix of v -> x^* v = xbar_1 v_1 + xbar_2 v_2."""
        x = np.asarray(x, float)
        q1 = Quaternion.from_array(self.conj4 @ x[:4])
        q2 = Quaternion.from_array(self.conj4 @ x[4:])
        return np.hstack([left_mul_block(q1), left_mul_block(q2)])

    def vdx(self, y) -> np.ndarray:
        """4x8 matrix of v -> v^* y for a fixed pair y = (y_1, y_2)."""
        y = np.asarray(y, float)
        r1 = right_mul_block(Quaternion.from_array(y[:4]))
        r2 = right_mul_block(Quaternion.from_array(y[4:]))
        return np.hstack([r1 @ self.conj4, r2 @ self.conj4])

    def sym_matrix(self, x, lb=None) -> np.ndarray:
        """4x8 matrix of v -> x^* D v + v^* D x."""
        lb = self.lbar(x) if lb is None else lb
        return lb @ self.d_real + self.vdx(self.d_real @ x)

    def quadratic(self, x, lb=None) -> np.ndarray:
        """x^* D x as a 4-vector."""
        lb = self.lbar(x) if lb is None else lb
        return lb @ (self.d_real @ x)

    def phi_matrix(self, x) -> np.ndarray:
        """4x8 matrix PHI with PHI @ v = phi_x(v)."""
        return self.bundle(x)[0]

    def dphi_matrix(self, x, w) -> np.ndarray:
        """Directional derivative of PHI(x) along the ambient vector w."""
        lb = self.lbar(x)
        lw = self.lbar(w)
        q = self.quadratic(x, lb)
        dq = lw @ (self.d_real @ x) + lb @ (self.d_real @ np.asarray(w, float))
        sym = self.sym_matrix(x, lb)
        dsym = lw @ self.d_real + self.vdx(self.d_real @ np.asarray(w, float))
        lq = left_mul_block(Quaternion.from_array(q))
        ldq = left_mul_block(Quaternion.from_array(dq))
        return lw - 0.25 * (ldq @ sym + lq @ dsym)

    def bundle(self, x) -> tuple[np.ndarray, np.ndarray]:
        """PHI(x) together with its 8 coordinate derivatives (8, 4, 8).

        One-slot cache: the three contact forms evaluate at the same
        point back to back.
        """
        x = np.asarray(x, float)
        key = x.tobytes()
        if key == self._bundle_key:
            return self._bundle
        lb = self.lbar(x)
        dx = self.d_real @ x
        q = lb @ dx
        sym = lb @ self.d_real + self.vdx(dx)
        lq = left_mul_block(Quaternion.from_array(q))
        phi = lb - 0.25 * lq @ sym
        dphi = np.empty((8, 4, 8))
        for b in range(8):
            lw = self._lbar_basis[b]
            dq = lw @ dx + lb @ self.d_real[:, b]
            ldq = left_mul_block(Quaternion.from_array(dq))
            dphi[b] = lw - 0.25 * (ldq @ sym + lq @ self._dsym_basis[b])
        self._bundle_key, self._bundle = key, (phi, dphi)
        return self._bundle


def galicki_surface(d: Sp2Element) -> LevelSurface:
    """The hypersurface |x|^2 + |x^* D x|^2 / 4 = 1."""
    kernel = _GalickiKernel(d)

    def func(x):
        q = kernel.quadratic(x)
        return float(np.dot(x, x)) + 0.25 * float(np.dot(q, q))

    def grad(x):
        x = np.asarray(x, float)
        q = kernel.quadratic(x)
        # d|q|^2/4 along v is <q, x*Dv + v*Dx> / 2
        return 2.0 * x + 0.5 * (kernel.sym_matrix(x).T @ q)

    return LevelSurface(func, grad, name="SD")


def galicki_triple(d: Sp2Element) -> ContactTriple:
    """The integrable family on S^D.

    The H-valued expression phi_x(v) = x^* v - (x^* D x / 4)(x^* D v +
    v^* D x) has identically vanishing real part on T_x S^D; its three
    imaginary components, scaled by -1/2, are the contact forms.  The
    scaling makes D = 0 reproduce the canonical triple exactly.
    """
    surface = galicki_surface(d)
    kernel = _GalickiKernel(d)

    forms = []
    for i in range(1, 4):
        def coeff(x, i=i):
            return -0.5 * kernel.bundle(x)[0][i]

        def jacobian(x, i=i):
            return -0.5 * kernel.bundle(x)[1][:, i, :].T

        forms.append(OneFormField(coeff, jacobian, name=f"galicki:{i}"))

    def realpart_defect(p):
        """Max |Re phi_x(v)| over tangent directions at p (should vanish)."""
        proj = surface.tangent_projector(p)
        real_cov = kernel.phi_matrix(p)[0]
        return float(np.abs(proj @ real_cov).max())

    return ContactTriple(surface, forms, name="galicki",
                         consistency_check=realpart_defect)


# ---------------------------------------------------------------------------
# Triple transformations
# ---------------------------------------------------------------------------


def conformal_rescale(ct: ContactTriple, f: ScalarField) -> ContactTriple:
    """The triple (f^2 eta_1, f^2 eta_2, f^2 eta_3) with product-rule Jacobians."""
    forms = []
    for form in ct.forms:
        def coeff(x, form=form):
            return f(x) ** 2 * form.coeff(x)

        jacobian = None
        if form.has_analytic_jacobian:
            def jacobian(x, form=form):
                fv = f(x)
                return (fv**2) * form.jacobian(x) + 2.0 * fv * np.outer(
                    form.coeff(x), f.gradient(x))

        forms.append(OneFormField(coeff, jacobian, name=f"{form.name}*f^2"))
    return ContactTriple(ct.surface, forms, name=f"{ct.name}:conformal",
                         orientation=ct.orientation,
                         consistency_check=None)


def so3_rotate(ct: ContactTriple, rot) -> ContactTriple:
    """Constant SO(3) mix of the three forms."""
    rot = np.asarray(rot, float)
    forms = []
    for i in range(3):
        def coeff(x, i=i):
            return sum(rot[i, j] * ct.forms[j].coeff(x) for j in range(3))

        jacobian = None
        if ct.analytic():
            def jacobian(x, i=i):
                return sum(rot[i, j] * ct.forms[j].jacobian(x) for j in range(3))

        forms.append(OneFormField(coeff, jacobian, name=f"{ct.name}:rot{i}"))
    return ContactTriple(ct.surface, forms, name=f"{ct.name}:so3",
                         orientation=ct.orientation)


def perturb_triple(ct: ContactTriple, deformations, t: float) -> ContactTriple:
    """eta_i + t * theta_i for three ambient deformation forms."""
    forms = []
    for form, theta in zip(ct.forms, deformations):
        def coeff(x, form=form, theta=theta):
            return form.coeff(x) + t * theta.coeff(x)

        jacobian = None
        if form.has_analytic_jacobian and theta.has_analytic_jacobian:
            def jacobian(x, form=form, theta=theta):
                return form.jacobian(x) + t * theta.jacobian(x)

        forms.append(OneFormField(coeff, jacobian, name=f"{form.name}+t*theta"))
    return ContactTriple(ct.surface, forms, name=f"{ct.name}:perturbed",
                         orientation=ct.orientation)


# ---------------------------------------------------------------------------
# Pointwise packs
# ---------------------------------------------------------------------------


@dataclass
class CompatiblePack:
    """Metric and quaternionic structure extracted from a form triple.

    All matrices live in the H-basis the input 2-forms were expressed
    in.  `forms` are the gauge-normalized form matrices, `endos` the
    I_i = -G^{-1} w_i, `volume` is sqrt(det G).
    """

    metric: np.ndarray
    endos: list[np.ndarray]
    forms: list[np.ndarray]
    gauge: np.ndarray
    gram: np.ndarray
    orientation_ok: bool
    volume: float

    def quaternion_defect(self) -> float:
        """Max deviation from I_i^2 = -Id and I_1 I_2 = I_3."""
        eye = np.eye(4)
        errs = [np.linalg.norm(ii @ ii + eye) for ii in self.endos]
        errs.append(np.linalg.norm(self.endos[0] @ self.endos[1] - self.endos[2]))
        return float(max(errs))

    def selfdual_defect(self) -> float:
        """Max |w_i ^ w_j - 2 delta_ij vol| over pairs."""
        out = 0.0
        for i in range(3):
            for j in range(3):
                target = 2.0 * self.volume if i == j else 0.0
                out = max(out, abs(_pf4(self.forms[i], self.forms[j]) - target))
        return out


def metric_from_triple(w1, w2, w3) -> CompatiblePack:
    """Compatible metric and quaternionic triple from three 2-forms.

    Requires a definite wedge Gram.  The triple is first brought to the
    wedge-orthonormal gauge by the symmetric unit-determinant factor
    (identity if already orthonormal), then the metric is the closed
    form G = -W2 W3^{-1} W1, exact for compatible triples.  Homogeneity:
    scaling the input by lambda scales G by lambda and fixes I_i.
    """
    w_raw = [np.asarray(w, float) for w in (w1, w2, w3)]
    gram = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            gram[i, j] = 0.5 * _pf4(w_raw[i], w_raw[j])
    evals = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    if np.min(np.abs(evals)) <= DEFINITE_TOL * np.max(np.abs(evals)) or (
            np.sign(evals[0]) != np.sign(evals[-1])):
        raise StructureError("wedge Gram of the triple is not definite")
    factor = _unit_det_inverse_sqrt(gram)
    w = [sum(factor[i, j] * w_raw[j] for j in range(3)) for i in range(3)]

    g_check = -(w[1] @ np.linalg.inv(w[2]) @ w[0])
    g_check = 0.5 * (g_check + g_check.T)
    gevals = np.linalg.eigvalsh(g_check)
    orientation_ok = bool(gevals[0] > 0.0)
    metric = g_check if orientation_ok else -g_check
    if np.linalg.eigvalsh(metric)[0] <= 0.0:
        raise StructureError("metric extraction failed: indefinite result")
    ginv = np.linalg.inv(metric)
    endos = [-(ginv @ wi) for wi in w]
    return CompatiblePack(
        metric=metric,
        endos=endos,
        forms=w,
        gauge=factor,
        gram=gram,
        orientation_ok=orientation_ok,
        volume=float(np.sqrt(np.linalg.det(metric))),
    )


@dataclass
class GramReport:
    """Outcome of the pointwise structure validation."""

    point: np.ndarray
    gram: np.ndarray
    eigenvalues: np.ndarray
    is_codim3: bool
    definite: bool
    orientation_ok: bool
    consistency_defect: float

    @property
    def is_qc(self) -> bool:
        return self.is_codim3 and self.definite and self.orientation_ok


def validate_qc(ct: ContactTriple, p) -> GramReport:
    """Check the structure conditions at one surface point."""
    p = np.asarray(p, float)
    if not ct.surface.on_surface(p):
        raise ValueError("point is not on the surface")
    defect = float(ct.consistency_check(p)) if ct.consistency_check else 0.0
    try:
        basis = ct.kernel_basis(p)
    except StructureError:
        return GramReport(p, np.full((3, 3), np.nan), np.full(3, np.nan),
                          False, False, False, defect)
    gram = ct.wedge_gram(p, basis)
    evals = np.linalg.eigvalsh(gram)
    definite = bool(
        np.min(np.abs(evals)) > DEFINITE_TOL * np.max(np.abs(evals))
        and np.sign(evals[0]) == np.sign(evals[-1])
    )
    orientation_ok = False
    if definite:
        w = ct.restricted_d_matrices(p, basis)
        try:
            pack = metric_from_triple(*w)
            orientation_ok = pack.orientation_ok
        except StructureError:
            definite = False
    return GramReport(p, gram, evals, True, definite, orientation_ok, defect)


# ---------------------------------------------------------------------------
# Frames, torsion, residual
# ---------------------------------------------------------------------------


@lru_cache(maxsize=1)
def family_table() -> rep4.ProjectorTable:
    """Projector table on R^4 (x) Sym^2(L+), shared by all frame work."""
    return rep4.build_projectors(rep4.TensorSpace(["R4", "Sym2L+"]))


@lru_cache(maxsize=1)
def _shift_matrix() -> np.ndarray:
    """Matrix of (r_1, r_2, r_3) -> packed family (I_j r_i + I_i r_j)_ij."""
    iq = rep4.quaternion_triple()
    cols = []
    for slot in range(3):
        for c in range(4):
            r = np.zeros((3, 4))
            r[slot, c] = 1.0
            fam = np.zeros((3, 3, 4))
            for i in range(3):
                for j in range(3):
                    fam[i, j] = iq[j] @ r[i] + iq[i] @ r[j]
            cols.append(rep4.pack_family(fam))
    return np.array(cols).T


@dataclass
class FramePack:
    """Per-point frame: g-orthonormal H-basis, Reeb complement, alphas."""

    point: np.ndarray
    hbasis: np.ndarray          # 8 x 4, ambient-orthonormal basis of H
    onb: np.ndarray             # 8 x 4, g-orthonormal basis of H
    reeb: np.ndarray            # 8 x 3, columns R_i with eta_j(R_i) = delta_ij
    alpha: np.ndarray           # (3, 3, 4): alpha_ij components in the ONB
    pack: CompatiblePack
    gauge_rot: np.ndarray       # U with I_i = U L_i U^T in ONB coordinates
    norm_coeffs: np.ndarray     # (3, 8) coefficients of the normalized forms
    d_mats: np.ndarray          # (3, 8, 8) ambient d-matrices of normalized forms
    complement_tag: str = "dual"

    def alpha_of(self, i: int, j: int, vec) -> float:
        """alpha_ij evaluated on an ambient H-vector."""
        comps = self.onb_coords(vec)
        return float(np.dot(self.alpha[i, j], comps))

    def onb_coords(self, vec) -> np.ndarray:
        """g-ONB coordinates of an ambient H-vector."""
        gram = self.onb.T @ self.onb
        return np.linalg.solve(gram, self.onb.T @ np.asarray(vec, float))

    def ambient_endo(self, i: int) -> np.ndarray:
        """I_i as an ambient 8x8 endomorphism supported on H."""
        ghalf_inv = self.onb  # columns already g-orthonormal
        ihat = self.ihat(i)
        pinv = np.linalg.pinv(ghalf_inv)
        return ghalf_inv @ ihat @ pinv

    def ihat(self, i: int) -> np.ndarray:
        """I_i in g-ONB coordinates (orthogonal complex structure)."""
        u = self.gauge_rot
        li = rep4.quaternion_triple()[i]
        return u @ li @ u.T


def _structure_rotation(endos_onb: list[np.ndarray]) -> np.ndarray:
    """U in SO(4) with I_i = U L_i U^T for a direct orthogonal triple."""
    u0 = np.array([1.0, 0.0, 0.0, 0.0])
    cols = [u0] + [e @ u0 for e in endos_onb]
    u = np.array(cols).T
    # the construction yields an orthogonal matrix for exact quaternionic
    # triples; re-orthonormalize to absorb float noise
    q, r = np.linalg.qr(u)
    q = q @ np.diag(np.sign(np.diag(r)))
    return q


def frame_pack(ct: ContactTriple, p, complement=None) -> FramePack:
    """Build the dual frame at p (complement = optional ambient hint)."""
    p = np.asarray(p, float)
    basis = ct.kernel_basis(p)
    nforms = ct.normalized_forms()
    coeffs = np.array([f.coeff(p) for f in nforms])
    dmats = np.array([f.d_matrix(p) for f in nforms])

    w = [basis.T @ dmats[i] @ basis for i in range(3)]
    pack = metric_from_triple(*w)
    if not pack.orientation_ok:
        raise StructureError("triple is not orientation consistent")
    # the normalized-form matrices in this basis (pack.forms went through
    # an extra pointwise gauge; for already normalized field coefficients
    # the two agree up to float noise)
    g_inv_half = _sym_inverse_sqrt(pack.metric)
    onb = basis @ g_inv_half
    endos_onb = [endo_in_onb(pack.metric, e) for e in pack.endos]
    u_rot = _structure_rotation(endos_onb)

    # Reeb complement: ambient-orthogonal of H inside T unless hinted
    if complement is None:
        proj = ct.surface.tangent_projector(p)
        span = _gram_schmidt(np.array([proj @ c for c in coeffs]).T)
    else:
        span = _gram_schmidt(np.asarray(complement, float))
    if span.shape[1] != 3:
        raise StructureError("complement span is degenerate")
    duality = coeffs @ span  # (3 forms) x (3 span vectors)
    if abs(np.linalg.det(duality)) < 1e-12:
        raise StructureError("forms degenerate on complement")
    reeb = span @ np.linalg.inv(duality)

    alpha = np.empty((3, 3, 4))
    for i in range(3):
        for j in range(3):
            alpha[i, j] = onb.T @ (dmats[j].T @ reeb[:, i])
    return FramePack(
        point=p, hbasis=basis, onb=onb, reeb=reeb, alpha=alpha, pack=pack,
        gauge_rot=u_rot, norm_coeffs=coeffs, d_mats=dmats,
    )


def _sym_inverse_sqrt(m: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(m)
    return evecs @ np.diag(evals**-0.5) @ evecs.T


def endo_in_onb(metric: np.ndarray, endo: np.ndarray) -> np.ndarray:
    """Endomorphism matrix in the g-orthonormal frame: G^{1/2} I G^{-1/2}."""
    evals, evecs = np.linalg.eigh(metric)
    half = evecs @ np.diag(evals**0.5) @ evecs.T
    inv_half = evecs @ np.diag(evals**-0.5) @ evecs.T
    return half @ endo @ inv_half


def dual_complement(ct: ContactTriple, p, hint=None) -> FramePack:
    """Frame with the Reeb duals solved inside a starting complement."""
    return frame_pack(ct, p, complement=hint)


@dataclass
class TorsionElement:
    """Symmetrized torsion family a_ij = alpha_ij + alpha_ji on H.

    `family` holds ONB components; `ref_family` the components rotated
    into the reference quaternionic gauge where the projector table
    applies; `vector` is the packed element of R^4 (x) Sym^2(L+).
    """

    family: np.ndarray
    ref_family: np.ndarray
    vector: np.ndarray
    complement_tag: str

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def component(self, label) -> np.ndarray:
        return family_table().project(label, self.vector)

    def component_norm(self, label) -> float:
        return float(np.linalg.norm(self.component(label)))

    def s51_residual_raw(self) -> float:
        return self.component_norm((5, 1))

    def s51_residual_normalized(self) -> float:
        return self.s51_residual_raw() / (1.0 + self.norm)

    def explicit_membership_defect(self) -> float:
        """Independent S^{5,1} test: sum_j ||sum_i I_i a_ij||.

        Zero iff the element lies in S^{5,1}; cross-validates the
        Casimir projector route.
        """
        return rep4.explicit_S51_membership(self.ref_family)


def torsion_from_frame(frame: FramePack) -> TorsionElement:
    fam = frame.alpha + frame.alpha.transpose(1, 0, 2)
    u = frame.gauge_rot
    ref = np.einsum("ba,ijb->ija", u, fam)
    return TorsionElement(
        family=fam,
        ref_family=ref,
        vector=rep4.pack_family(ref),
        complement_tag=frame.complement_tag,
    )


def vertical_torsion(ct: ContactTriple, p, frame: FramePack | None = None) -> TorsionElement:
    """a_ij = alpha_ij + alpha_ji packaged in R^4 (x) Sym^2(L+)."""
    if frame is None:
        frame = frame_pack(ct, p)
    return torsion_from_frame(frame)


def adapted_complement(ct: ContactTriple, p, frame: FramePack | None = None) -> FramePack:
    """The unique complement whose torsion lies entirely in S^{5,1}.

    Solves the 12-dim shift system killing the S^{3,1} + S^{1,1} parts
    (the shift law is alpha'_ij = alpha_ij + (I_j r_i)^flat).
    """
    if frame is None:
        frame = frame_pack(ct, p)
    tors = torsion_from_frame(frame)
    table = family_table()
    lower = table[(3, 1)].matrix + table[(1, 1)].matrix
    shift = _shift_matrix()
    sys_mat = lower @ shift
    rhs = -(lower @ tors.vector)
    sol, *_ = np.linalg.lstsq(sys_mat, rhs, rcond=None)
    r_ref = sol.reshape(3, 4)
    u = frame.gauge_rot
    reeb = frame.reeb.copy()
    for i in range(3):
        reeb[:, i] += frame.onb @ (u @ r_ref[i])

    alpha = np.empty((3, 3, 4))
    for i in range(3):
        for j in range(3):
            alpha[i, j] = frame.onb.T @ (frame.d_mats[j].T @ reeb[:, i])
    return FramePack(
        point=frame.point, hbasis=frame.hbasis, onb=frame.onb, reeb=reeb,
        alpha=alpha, pack=frame.pack, gauge_rot=frame.gauge_rot,
        norm_coeffs=frame.norm_coeffs, d_mats=frame.d_mats,
        complement_tag="adapted",
    )


@dataclass
class ResidualReport:
    """Pointwise integrability measurement."""

    point: np.ndarray
    raw: float
    normalized: float
    torsion_norm: float
    gram_eigenvalues: np.ndarray

    def passes(self, tol: float) -> bool:
        return self.normalized < tol


def integrability_residual(ct: ContactTriple, p, frame=None) -> ResidualReport:
    """Norm of the S^{5,1} torsion component (complement independent)."""
    if frame is None:
        frame = frame_pack(ct, p)
    tors = torsion_from_frame(frame)
    evals = np.linalg.eigvalsh(frame.pack.gram)
    return ResidualReport(
        point=frame.point,
        raw=tors.s51_residual_raw(),
        normalized=tors.s51_residual_normalized(),
        torsion_norm=tors.norm,
        gram_eigenvalues=evals,
    )


def conformal_shift_defect(ct: ContactTriple, f: ScalarField, p) -> float:
    """Defect of the predicted complement change under eta -> f^2 eta.

    The adapted Reeb fields of the rescaled triple should be
    f^{-2} (R_i - 2 I_i (grad f)|_H / f) against the original adapted
    frame; returns the max component deviation.
    """
    frame = adapted_complement(ct, p)
    rescaled = conformal_rescale(ct, f)
    got = adapted_complement(rescaled, p).reeb
    fv = f(p)
    df_h = frame.onb.T @ f.gradient(p)   # ONB components of df|_H = its g-sharp
    predicted = np.empty((8, 3))
    for i in range(3):
        ri = -2.0 * (frame.onb @ (frame.ihat(i) @ df_h)) / fv
        predicted[:, i] = (frame.reeb[:, i] + ri) / fv**2
    return float(np.abs(got - predicted).max())


def residual_complement_spread(ct: ContactTriple, p, count=10, seed=0,
                               scale=1.0) -> tuple[float, float]:
    """Diagnostic: S^{5,1} residual range over random Reeb complements."""
    rng = np.random.default_rng(seed)
    frame = frame_pack(ct, p)
    values = []
    for _ in range(count):
        shift = frame.onb @ rng.normal(scale=scale, size=(4, 3))
        comp = frame.reeb + shift
        f2 = frame_pack(ct, p, complement=comp)
        values.append(torsion_from_frame(f2).s51_residual_raw())
    return float(np.min(values)), float(np.max(values))
