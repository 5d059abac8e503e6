"""The adapted partial connection and its consistency laws.

The Koszul six-term formula defines the unique metric H-connection with
vanishing H-torsion; it extends to vertical directions by killing the
so-parts of the mixed torsion.  Two derived laws serve as oracles: the
derivative of the quaternionic structure along H is controlled by the
antisymmetrized alphas, and the covariant exterior derivative of the
vertical torsion has no S^{6,0} component (a Bianchi identity that
holds with no integrability assumption).

All fields are ambient evaluators; derivatives are central differences
along retracted curves.  Directional derivatives are linear in the
direction, so one stencil per frame direction serves every registered
field (the Koszul evaluations batch into small tables).  Vertical
torsion work uses the adapted complement throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import rep4
from .geometry import DEFAULT_FD_STEP, LevelSurface
from .qcstruct import (
    ContactTriple,
    FramePack,
    StructureError,
    adapted_complement,
    frame_pack,
    metric_from_triple,
)


# ---------------------------------------------------------------------------
# Intrinsic pointwise fields (basis-independent, safe to differentiate)
# ---------------------------------------------------------------------------


def structure_field(ct: ContactTriple):
    """q -> (M, I_amb, P_H) for the gauge-normalized triple.

    M is the compatible metric as an ambient bilinear form supported on
    H_q, I_amb the three quaternionic endomorphisms acting on H_q, and
    P_H the orthogonal projector onto H_q.  All three are independent of
    internal basis choices, so finite differences across nearby points
    are well defined.
    """

    def evaluate(q):
        data = ct._point_data(q)
        basis = data["basis"]
        factor = ct.gauge_factor(q)
        wn = [sum(factor[i, j] * data["wmats"][j] for j in range(3))
              for i in range(3)]
        pack = metric_from_triple(*wn)
        if not pack.orientation_ok:
            raise StructureError("triple is not orientation consistent")
        metric_amb = basis @ pack.metric @ basis.T
        endos_amb = [basis @ e @ basis.T for e in pack.endos]
        return metric_amb, endos_amb, basis @ basis.T

    return evaluate


def h_frame_fields(ct: ContactTriple, vectors):
    """Extend H-vectors at a point to H-tangent fields q -> P_H(q) v."""
    fields = []
    for v in np.asarray(vectors, float).T:
        def fld(q, v=v.copy()):
            data = ct._point_data(q)
            b = data["basis"]
            return b @ (b.T @ v)
        fields.append(fld)
    return fields


def h_projection_along_w(frame: FramePack, v) -> np.ndarray:
    """Projection of a T_pN vector onto H along the frame's complement."""
    v = np.asarray(v, float).copy()
    for i in range(3):
        v -= float(np.dot(frame.norm_coeffs[i], v)) * frame.reeb[:, i]
    return v


def _lie_bracket(surf: LevelSurface, xf, yf, p, step):
    x0 = np.asarray(xf(p), float)
    y0 = np.asarray(yf(p), float)

    def directional(field, direction):
        plus = surf.retract(p + step * direction)
        minus = surf.retract(p - step * direction)
        return (np.asarray(field(plus), float)
                - np.asarray(field(minus), float)) / (2.0 * step)

    return surf.tangent_projector(p) @ (directional(yf, x0) - directional(xf, y0))


# ---------------------------------------------------------------------------
# Koszul connection: direct form and batched stencil form
# ---------------------------------------------------------------------------


def koszul_formula(surface: LevelSurface, metric_eval, h_project, p,
                   xf, yf, zf, step=DEFAULT_FD_STEP) -> float:
    """2 g(nabla_X Y, Z) by the six-term formula, structure-agnostic.

    `metric_eval` maps a point to the ambient bilinear form of g;
    `h_project` projects a tangent vector onto H along the chosen
    complement.  On a flat configuration (constant metric, constant
    fields) every term vanishes and the Euclidean connection remains.
    """
    p = np.asarray(p, float)

    def gprod(fa, fb):
        def scalar(q):
            return float(fa(q) @ metric_eval(q) @ fb(q))
        return scalar

    def ddir(scalar, direction):
        plus = surface.retract(p + step * direction)
        minus = surface.retract(p - step * direction)
        return (scalar(plus) - scalar(minus)) / (2.0 * step)

    m0 = metric_eval(p)
    x0, y0, z0 = xf(p), yf(p), zf(p)

    def bracket_h(fa, fb):
        return h_project(_lie_bracket(surface, fa, fb, p, step))

    out = ddir(gprod(yf, zf), x0)
    out += ddir(gprod(zf, xf), y0)
    out -= ddir(gprod(xf, yf), z0)
    out += float(bracket_h(xf, yf) @ m0 @ z0)
    out -= float(bracket_h(xf, zf) @ m0 @ y0)
    out -= float(bracket_h(yf, zf) @ m0 @ x0)
    return out


def koszul(ct: ContactTriple, p, xf, yf, zf, frame: FramePack | None = None,
           step=DEFAULT_FD_STEP) -> float:
    """2 g(nabla_X Y, Z) at p by the six-term formula.

    `xf`, `yf`, `zf` are H-tangent field evaluators; the value depends
    on Y, Z only through their 1-jets and on X, Z only through their
    values at p, which the uniqueness tests exercise with varied
    extensions.
    """
    if frame is None:
        frame = frame_pack(ct, p)
    sf = structure_field(ct)
    return koszul_formula(
        ct.surface, lambda q: sf(q)[0],
        lambda v: h_projection_along_w(frame, v),
        p, xf, yf, zf, step=step,
    )


class StencilCalculus:
    """Batched Koszul evaluations over shared frame-direction stencils.

    Registers H-tangent fields, evaluates them (and the metric) at the
    eight stencil points p +- h X_a, and serves directional derivatives
    of metric products, Lie brackets, and covariant derivatives for any
    registered pair.  Directions decompose over the frame, so arbitrary
    direction vectors reuse the same tables.
    """

    def __init__(self, ct: ContactTriple, frame: FramePack, step=DEFAULT_FD_STEP):
        self.ct = ct
        self.frame = frame
        self.p = frame.point
        self.step = step
        self._sf = structure_field(ct)
        self._fields: list = []
        self._finalized = False
        self.frame_idx = [self.add_field(f)
                          for f in h_frame_fields(ct, frame.onb)]

    def add_field(self, field) -> int:
        if self._finalized:
            raise RuntimeError("stencil tables already built")
        self._fields.append(field)
        return len(self._fields) - 1

    def field_value(self, u: int) -> np.ndarray:
        self._build()
        return self._vals0[u]

    def _build(self):
        if self._finalized:
            return
        self._finalized = True
        p, h = self.p, self.step
        n = len(self._fields)
        self._vals0 = np.array([f(p) for f in self._fields])
        self._m0 = self._sf(p)[0]
        self._proj = self.ct.surface.tangent_projector(p)
        self._dvals = np.empty((4, n, 8))
        self._dg = np.empty((4, n, n))
        for k, a in enumerate(self.frame_idx):
            direction = self._vals0[a]
            plus = self.ct.surface.retract(p + h * direction)
            minus = self.ct.surface.retract(p - h * direction)
            vp = np.array([f(plus) for f in self._fields])
            vm = np.array([f(minus) for f in self._fields])
            self._dvals[k] = (vp - vm) / (2.0 * h)
            mp, mm = self._sf(plus)[0], self._sf(minus)[0]
            self._dg[k] = (vp @ mp @ vp.T - vm @ mm @ vm.T) / (2.0 * h)

    def _coords(self, v) -> np.ndarray:
        return self.frame.onb_coords(v)

    def derivative_of_field(self, direction, v: int) -> np.ndarray:
        """D_direction F_v by linearity over the frame stencils."""
        self._build()
        c = self._coords(direction)
        return np.einsum("k,kc->c", c, self._dvals[:, v, :])

    def dg_along(self, direction, u: int, v: int) -> float:
        """direction . g(F_u, F_v)."""
        self._build()
        c = self._coords(direction)
        return float(np.dot(c, self._dg[:, u, v]))

    def bracket_h(self, u: int, v: int) -> np.ndarray:
        """[F_u, F_v]_H at p (projection along the frame complement)."""
        self._build()
        raw = (self.derivative_of_field(self._vals0[u], v)
               - self.derivative_of_field(self._vals0[v], u))
        return h_projection_along_w(self.frame, self._proj @ raw)

    def gpair(self, vec_a, vec_b) -> float:
        self._build()
        return float(np.asarray(vec_a) @ self._m0 @ np.asarray(vec_b))

    def nabla_coords(self, u: int, v: int) -> np.ndarray:
        """ONB coordinates of nabla_{F_u} F_v via Koszul against the frame."""
        self._build()
        out = np.empty(4)
        x0 = self._vals0[u]
        y0 = self._vals0[v]
        br_uv = self.bracket_h(u, v)
        for c, zc in enumerate(self.frame_idx):
            z0 = self._vals0[zc]
            val = self.dg_along(x0, v, zc)
            val += self.dg_along(y0, zc, u)
            val -= self.dg_along(z0, u, v)
            val += self.gpair(br_uv, z0)
            val -= self.gpair(self.bracket_h(u, zc), y0)
            val -= self.gpair(self.bracket_h(v, zc), x0)
            out[c] = 0.5 * val
        return out


@dataclass
class FrameConnection:
    """Connection data over the g-orthonormal frame at one point."""

    frame: FramePack
    calculus: StencilCalculus
    nabla: np.ndarray          # (4, 4, 4): coords of nabla_{X_a} X_b
    step: float

    def nabla_of(self, a: int, b: int) -> np.ndarray:
        return self.frame.onb @ self.nabla[a, b]

    def metric_compat_defect(self) -> float:
        defect = 0.0
        calc = self.calculus
        for a in range(4):
            x0 = calc.field_value(a)
            for b in range(4):
                for c in range(4):
                    defect = max(defect, abs(
                        calc.dg_along(x0, b, c)
                        - self.nabla[a, b, c] - self.nabla[a, c, b]))
        return defect

    def torsion_defect(self) -> float:
        defect = 0.0
        for a in range(4):
            for b in range(4):
                t = (self.nabla[a, b] - self.nabla[b, a]
                     - self.frame.onb_coords(self.calculus.bracket_h(a, b)))
                defect = max(defect, float(np.linalg.norm(t)))
        return defect


def frame_connection(ct: ContactTriple, p, frame: FramePack | None = None,
                     step=DEFAULT_FD_STEP,
                     calculus: StencilCalculus | None = None) -> FrameConnection:
    """Koszul connection coefficients over the extended ONB frame."""
    if frame is None:
        frame = frame_pack(ct, p)
    if calculus is None:
        calculus = StencilCalculus(ct, frame, step=step)
    nabla = np.empty((4, 4, 4))
    for a in range(4):
        for b in range(4):
            nabla[a, b] = calculus.nabla_coords(a, b)
    return FrameConnection(frame=frame, calculus=calculus, nabla=nabla, step=step)


# ---------------------------------------------------------------------------
# Derivative of the quaternionic structure: gamma law
# ---------------------------------------------------------------------------


def gamma_from_alpha(frame: FramePack) -> np.ndarray:
    """gamma_ij = -(alpha_ij - alpha_ji)/2 as (3, 3, 4) ONB covectors."""
    return -0.5 * (frame.alpha - frame.alpha.transpose(1, 0, 2))


@dataclass
class GammaReport:
    deviation: float
    gamma_fd: np.ndarray
    gamma_law: np.ndarray
    offspan_defect: float


def gamma_check(ct: ContactTriple, p, step=DEFAULT_FD_STEP) -> GammaReport:
    """Compare nabla I_j extracted by finite differences with the alpha law.

    Only defined over the adapted complement: with another complement the
    alphas change while nabla I does not, so the law has no meaning there.
    """
    frame = adapted_complement(ct, p)
    calc = StencilCalculus(ct, frame, step=step)
    sf = structure_field(ct)
    fields4 = h_frame_fields(ct, frame.onb)

    # fields (I_j Y_b) for all j, b
    iy_idx = np.empty((3, 4), dtype=int)
    for j in range(3):
        for b in range(4):
            def iy(q, j=j, fb=fields4[b]):
                return sf(q)[1][j] @ fb(q)
            iy_idx[j, b] = calc.add_field(iy)

    conn = frame_connection(ct, p, frame=frame, calculus=calc, step=step)
    ihat = [frame.ihat(i) for i in range(3)]

    gamma_fd = np.empty((3, 3, 4))
    offspan = 0.0
    for j in range(3):
        for a in range(4):
            col = np.empty((4, 4))
            for b in range(4):
                nxiy = calc.nabla_coords(a, int(iy_idx[j, b]))
                col[:, b] = nxiy - ihat[j] @ conn.nabla[a, b]
            coeffs = np.array([-0.25 * np.trace(col @ ihat[i]) for i in range(3)])
            recon = sum(coeffs[i] * ihat[i] for i in range(3))
            offspan = max(offspan, float(np.linalg.norm(col - recon)))
            gamma_fd[:, j, a] = coeffs

    gamma_law = gamma_from_alpha(frame)
    deviation = float(np.abs(gamma_fd - gamma_law).max())
    return GammaReport(deviation=deviation, gamma_fd=gamma_fd,
                       gamma_law=gamma_law, offspan_defect=offspan)


# ---------------------------------------------------------------------------
# Vertical extension (so-part corrections)
# ---------------------------------------------------------------------------


def reeb_field(ct: ContactTriple, i: int, adapted=True):
    """The i-th Reeb field of the adapted (or dual) complement."""
    def fld(q):
        fr = adapted_complement(ct, q) if adapted else frame_pack(ct, q)
        return fr.reeb[:, i]
    return fld


@dataclass
class VerticalExtension:
    """nabla_{R_i} on H: corrected derivative plus diagnostics."""

    frame: FramePack
    initial: np.ndarray        # (4, 4): coords of the projected derivative
    symmetrizer: np.ndarray    # (4, 4): non-metricity correction
    rotation: np.ndarray       # (4, 4): unique so(H) correction a_R
    torsion_matrix: np.ndarray  # (4, 4): corrected (T_{R, .})_H
    metric_derivative: np.ndarray  # (4, 4): R . g(X_b, X_c)

    def so_part_defect(self) -> float:
        t = self.torsion_matrix
        return float(np.linalg.norm(0.5 * (t - t.T)))

    def nabla_matrix(self) -> np.ndarray:
        """Coordinates of nabla_R X_b for the frame fields (columns)."""
        return self.initial + 0.5 * self.symmetrizer + self.rotation

    def metric_compat_defect(self) -> float:
        """Max |R.g(X_b, X_c) - g(nabla_R X_b, X_c) - g(X_b, nabla_R X_c)|."""
        nm = self.nabla_matrix()
        defect = 0.0
        for b in range(4):
            for c in range(4):
                defect = max(defect, abs(
                    self.metric_derivative[b, c] - nm[c, b] - nm[b, c]))
        return defect


def vertical_extension(ct: ContactTriple, p, i: int,
                       step=DEFAULT_FD_STEP) -> VerticalExtension:
    """Covariant derivative along the adapted Reeb direction R_i.

    Projected ambient derivative, metric-symmetrized, then corrected by
    the unique a_R in so(H) that kills the skew part of (T_{R, .})_H.
    """
    frame = adapted_complement(ct, p)
    p = np.asarray(p, float)
    sf = structure_field(ct)
    fields = h_frame_fields(ct, frame.onb)
    r0 = frame.reeb[:, i]
    rfield = reeb_field(ct, i)

    plus = ct.surface.retract(p + step * r0)
    minus = ct.surface.retract(p - step * r0)
    vplus = np.array([f(plus) for f in fields])
    vminus = np.array([f(minus) for f in fields])
    dvals = (vplus - vminus) / (2.0 * step)
    mp, mm = sf(plus)[0], sf(minus)[0]
    dg = (vplus @ mp @ vplus.T - vminus @ mm @ vminus.T) / (2.0 * step)

    proj = ct.surface.tangent_projector(p)
    initial = np.empty((4, 4))
    for b in range(4):
        v = h_projection_along_w(frame, proj @ dvals[b])
        initial[:, b] = frame.onb_coords(v)

    sym = np.empty((4, 4))
    for b in range(4):
        for c in range(4):
            sym[b, c] = dg[b, c] - initial[c, b] - initial[b, c]
    metricized = initial + 0.5 * sym

    tors = np.empty((4, 4))
    for b in range(4):
        br = _lie_bracket(ct.surface, rfield, fields[b], p, step)
        br_h = h_projection_along_w(frame, br)
        tors[:, b] = metricized[:, b] - frame.onb_coords(br_h)
    rotation = -0.5 * (tors - tors.T)
    corrected = tors + rotation
    return VerticalExtension(frame=frame, initial=initial, symmetrizer=sym,
                             rotation=rotation, torsion_matrix=corrected,
                             metric_derivative=dg)


@dataclass
class ReebDerivativeReport:
    law_defect: float       # against -1/2 (alpha_ji - alpha_ij)(X) R_j
    so_w_defect: float      # skew part of the corrected T_X^W


def reeb_derivative_check(ct: ContactTriple, p,
                          step=DEFAULT_FD_STEP) -> ReebDerivativeReport:
    """Defect of nabla_X R_i = -1/2 sum_j (alpha_ji - alpha_ij)(X) R_j.

    nabla_X on W-sections mirrors the H-side construction: W-projection
    of the derivative, metric-symmetrization in the Reeb basis (where
    the W-metric is the identity), and the so(W) correction killing the
    skew part of T_X^W.
    """
    frame = adapted_complement(ct, p)
    p = np.asarray(p, float)
    fields = h_frame_fields(ct, frame.onb)
    rfields = [reeb_field(ct, i) for i in range(3)]
    proj = ct.surface.tangent_projector(p)

    def w_coords(v):
        return np.array([float(np.dot(frame.norm_coeffs[i], v)) for i in range(3)])

    defect = 0.0
    so_w = 0.0
    for a in range(4):
        x0 = fields[a](p)
        plus = ct.surface.retract(p + step * x0)
        minus = ct.surface.retract(p - step * x0)
        rplus = np.array([rf(plus) for rf in rfields])
        rminus = np.array([rf(minus) for rf in rfields])
        drs = (rplus - rminus) / (2.0 * step)

        initial = np.empty((3, 3))
        for i in range(3):
            initial[:, i] = w_coords(proj @ drs[i])
        # duality makes <R_i, R_j>_W constant, so the non-metricity is
        # -(initial + initial^T) and the metricized part is the skew part
        metricized = 0.5 * (initial - initial.T)

        tors = np.empty((3, 3))
        for i in range(3):
            br = _lie_bracket(ct.surface, fields[a], rfields[i], p, step)
            tors[:, i] = metricized[:, i] - w_coords(br)
        rot = -0.5 * (tors - tors.T)
        corrected_tors = tors + rot
        so_w = max(so_w, float(np.linalg.norm(
            0.5 * (corrected_tors - corrected_tors.T))))
        nabla_r = metricized + rot

        for i in range(3):
            predicted = np.array([
                -0.5 * (frame.alpha[j, i, a] - frame.alpha[i, j, a])
                for j in range(3)
            ])
            defect = max(defect, float(np.linalg.norm(nabla_r[:, i] - predicted)))
    return ReebDerivativeReport(law_defect=defect, so_w_defect=so_w)


# ---------------------------------------------------------------------------
# Bianchi operator
# ---------------------------------------------------------------------------


@lru_cache(maxsize=1)
def bianchi_table() -> rep4.ProjectorTable:
    return rep4.build_projectors(rep4.TensorSpace(["L+", "Sym2L+"]))


def _pack_sd_family(c: np.ndarray) -> np.ndarray:
    """Pack c[k, i, j] (symmetrized in ij) into the L+ (x) Sym2L+ carrier."""
    out = np.zeros(3 * 6)
    eye3 = np.eye(3)
    for k in range(3):
        for i in range(3):
            for j in range(3):
                coeff = 0.5 * (c[k, i, j] + c[k, j, i])
                out += coeff * np.kron(eye3[k], rep4.sym2_coords(i, j))
    return out


def torsion_covectors(ct: ContactTriple, q) -> np.ndarray:
    """Ambient covectors of a_ij = alpha_ij + alpha_ji at q (adapted)."""
    fr = adapted_complement(ct, q)
    cov = np.empty((3, 3, 8))
    for i in range(3):
        for j in range(3):
            cov[i, j] = fr.d_mats[j].T @ fr.reeb[:, i] + fr.d_mats[i].T @ fr.reeb[:, j]
    return cov


@dataclass
class BianchiReport:
    residual: float
    torsion_norm: float
    sd_norm: float


def bianchi_residual(ct: ContactTriple, p, step=1e-4) -> BianchiReport:
    """Norm of the S^{6,0} part of the covariant differential of T^W.

    Assembles (nabla_X sigma)_Y - (nabla_Y sigma)_X over the ONB frame,
    takes the self-dual part of the 2-form slot, and projects the
    resulting element of L+ (x) Sym^2(L+) onto S^{6,0}.  Vanishes to
    discretization error for every structure, integrable or not; the
    non-S^{6,0} parts do not vanish and `sd_norm` records their size.
    """
    frame = adapted_complement(ct, p)
    p = np.asarray(p, float)
    calc = StencilCalculus(ct, frame, step=step)
    conn = frame_connection(ct, p, frame=frame, calculus=calc, step=step)
    gamma = gamma_from_alpha(frame)

    cov0 = torsion_covectors(ct, p)
    a0 = np.einsum("ijc,ca->ija", cov0, frame.onb)

    values0 = np.array([calc.field_value(a) for a in range(4)])
    fields = h_frame_fields(ct, frame.onb)
    da = np.empty((4, 3, 3, 4))   # [a, i, j, b] = X_a . (a_ij(X_b))
    for a in range(4):
        plus = ct.surface.retract(p + step * values0[a])
        minus = ct.surface.retract(p - step * values0[a])
        cplus = torsion_covectors(ct, plus)
        cminus = torsion_covectors(ct, minus)
        vplus = np.array([f(plus) for f in fields])
        vminus = np.array([f(minus) for f in fields])
        sp = np.einsum("ijc,bc->ijb", cplus, vplus)
        sm = np.einsum("ijc,bc->ijb", cminus, vminus)
        da[a] = (sp - sm) / (2.0 * step)

    nab = np.empty((4, 4, 3, 3))
    for a in range(4):
        for b in range(4):
            for i in range(3):
                for j in range(3):
                    val = da[a, i, j, b]
                    val -= float(a0[i, j] @ conn.nabla[a, b])
                    val += sum(gamma[i, r, a] * a0[r, j, b] for r in range(3))
                    val += sum(gamma[j, r, a] * a0[i, r, b] for r in range(3))
                    nab[a, b, i, j] = val

    ihat = [frame.ihat(k) for k in range(3)]
    sd = np.empty((3, 3, 3))
    sd_norm = 0.0
    for i in range(3):
        for j in range(3):
            f2 = nab[:, :, i, j] - nab[:, :, i, j].T
            for k in range(3):
                sd[k, i, j] = -0.25 * float(np.sum(f2 * ihat[k]))
            sd_norm = max(sd_norm, float(np.abs(sd[:, i, j]).max()))

    vec = _pack_sd_family(sd)
    table = bianchi_table()
    residual = float(np.linalg.norm(table.project((6, 0), vec)))
    tors_norm = float(np.linalg.norm(rep4.pack_family(
        np.einsum("ba,ijb->ija", frame.gauge_rot, a0))))
    return BianchiReport(residual=residual, torsion_norm=tors_norm, sd_norm=sd_norm)
