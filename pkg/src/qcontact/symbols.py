"""Principal symbols of the base deformation complex.

The three operators, pushed down to the 4-dimensional base model, are a
first-order map into S^{3,1}, the second-order linearized integrability
map into S^{5,1}, and the first-order Bianchi map into S^{6,0}.  Their
symbols at a covector xi are explicit finite-dimensional linear maps
assembled from the same trace-solve and self-dual projection algebra as
the operators themselves; the exactness of the symbol sequence for
xi != 0 is the computational content of the ellipticity claim.

Covectors with vanishing horizontal part map to xi = 0 here (zero
symbol, full kernel).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from . import rep4


@lru_cache(maxsize=None)
def _table(tags: tuple[str, ...]) -> rep4.ProjectorTable:
    return rep4.build_projectors(rep4.TensorSpace(list(tags)))


@lru_cache(maxsize=None)
def _irrep_basis(tags: tuple[str, ...], label: tuple[int, int]) -> np.ndarray:
    """Orthonormal column basis of one irreducible block."""
    proj = _table(tags)[label]
    u, s, _ = np.linalg.svd(proj.matrix)
    return np.ascontiguousarray(u[:, s > 0.5])


def _ref_forms() -> list[np.ndarray]:
    """Reference self-dual form matrices (transposes of the I_i)."""
    return [m.T for m in rep4.quaternion_triple()]


def _pf4(a, b):
    return float(
        a[0, 1] * b[2, 3] - a[0, 2] * b[1, 3] + a[0, 3] * b[1, 2]
        + a[1, 2] * b[0, 3] - a[1, 3] * b[0, 2] + a[2, 3] * b[0, 1]
    )


def _wedge(xi: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.outer(xi, u) - np.outer(u, xi)


@dataclass
class SymbolMap:
    """One principal symbol as a dense matrix between irrep coordinates."""

    xi: np.ndarray
    source: str
    target: str
    degree: int
    matrix: np.ndarray

    @property
    def rank(self) -> int:
        if self.matrix.size == 0:
            return 0
        s = np.linalg.svd(self.matrix, compute_uv=False)
        if s.size == 0 or s[0] == 0.0:
            return 0
        return int(np.sum(s > 1e-9 * s[0]))

    def kernel(self) -> np.ndarray:
        """Orthonormal basis (columns) of the kernel."""
        _, s, vt = np.linalg.svd(self.matrix)
        r = self.rank
        return vt[r:].T

    def image(self) -> np.ndarray:
        """Orthonormal basis (columns) of the image."""
        u, s, _ = np.linalg.svd(self.matrix)
        return u[:, :self.rank]


# coordinate packings -------------------------------------------------------


def _pack_r4lp(u_triple: np.ndarray) -> np.ndarray:
    """(3, 4) family sum_i u_i (x) w_i into the R4 (x) L+ carrier."""
    out = np.zeros(12)
    eye3 = np.eye(3)
    for i in range(3):
        out += np.kron(u_triple[i], eye3[i])
    return out


def _unpack_r4lp(v: np.ndarray) -> np.ndarray:
    return v.reshape(4, 3).T.copy()


def s31_basis() -> np.ndarray:
    """Orthonormal basis of S^{3,1} inside R4 (x) L+ (12 x 8)."""
    return _irrep_basis(("R4", "L+"), (3, 1))


def s51_basis() -> np.ndarray:
    """Orthonormal basis of S^{5,1} inside R4 (x) Sym2L+ (24 x 12)."""
    return _irrep_basis(("R4", "Sym2L+"), (5, 1))


def s60_basis() -> np.ndarray:
    """Orthonormal basis of S^{6,0} inside L+ (x) Sym2L+ (18 x 7)."""
    return _irrep_basis(("L+", "Sym2L+"), (6, 0))


# the three symbols ---------------------------------------------------------


def symbol_D(xi) -> SymbolMap:
    """sigma(p^{3,1} grad): s -> P31(xi (x) s), from L+ into S^{3,1}."""
    xi = np.asarray(xi, float)
    basis31 = s31_basis()
    table = _table(("R4", "L+"))
    cols = np.empty((8, 3))
    eye3 = np.eye(3)
    for k in range(3):
        vec = _pack_r4lp(np.outer(eye3[k], xi))
        cols[:, k] = basis31.T @ table.project((3, 1), vec)
    return SymbolMap(xi=xi, source="S20", target="S31", degree=1, matrix=cols)


def _trace_solve_symbol(xi: np.ndarray, u_triple: np.ndarray) -> np.ndarray:
    """Symbol-level trace solve: the symmetric matrix Sym(xi, u).

    Mirrors the operator's pointwise algebra with d(theta_i) replaced by
    xi ^ u_i and the base 2-forms by the reference self-dual triple.
    """
    w = _ref_forms()
    s = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            s[i, j] = 0.5 * (_pf4(_wedge(xi, u_triple[i]), w[j])
                             + _pf4(_wedge(xi, u_triple[j]), w[i]))
    trace = -np.trace(s) / 5.0
    return -(s + trace * np.eye(3))


def symbol_A(xi) -> SymbolMap:
    """sigma(p^{5,1} grad^2): u -> P51 of -(xi (x) Sym(xi, u)).

    Second order: the only contribution is the differentiated trace
    solve, quadratic in xi; vertical contractions drop out of the
    principal part.
    """
    xi = np.asarray(xi, float)
    base31 = s31_basis()
    base51 = s51_basis()
    table = _table(("R4", "Sym2L+"))
    cols = np.empty((12, 8))
    for k in range(8):
        u = _unpack_r4lp(base31[:, k])
        sym = _trace_solve_symbol(xi, u)
        fam = np.einsum("ij,a->ija", -sym, xi)
        vec = rep4.pack_family(fam)
        cols[:, k] = base51.T @ table.project((5, 1), vec)
    return SymbolMap(xi=xi, source="S31", target="S51", degree=2, matrix=cols)


def symbol_B(xi) -> SymbolMap:
    """sigma(p^{6,0} grad): v -> P60 of the self-dual part of xi ^ a_ij."""
    xi = np.asarray(xi, float)
    base51 = s51_basis()
    base60 = s60_basis()
    table = _table(("L+", "Sym2L+"))
    iq = rep4.quaternion_triple()
    cols = np.empty((7, 12))
    for k in range(12):
        fam = rep4.unpack_family(base51[:, k])
        sd = np.empty((3, 3, 3))
        for i in range(3):
            for j in range(3):
                f2 = _wedge(xi, fam[i, j])
                for m in range(3):
                    sd[m, i, j] = -0.25 * float(np.sum(f2 * iq[m]))
        vec = _pack_sd(sd)
        cols[:, k] = base60.T @ table.project((6, 0), vec)
    return SymbolMap(xi=xi, source="S51", target="S60", degree=1, matrix=cols)


def _pack_sd(c: np.ndarray) -> np.ndarray:
    out = np.zeros(18)
    eye3 = np.eye(3)
    for k in range(3):
        for i in range(3):
            for j in range(3):
                out += 0.5 * (c[k, i, j] + c[k, j, i]) * np.kron(
                    eye3[k], rep4.sym2_coords(i, j))
    return out


# exactness and equivariance ------------------------------------------------


@dataclass
class ExactnessReport:
    """Ranks and kernel/image gaps of the symbol sequence at one xi."""

    xi: np.ndarray
    rank_d: int
    rank_a: int
    rank_b: int
    gap_da: float
    gap_ab: float

    @property
    def exact(self) -> bool:
        return (self.rank_d, self.rank_a, self.rank_b) == (3, 5, 7) and (
            max(self.gap_da, self.gap_ab) < 1e-8)


def exactness_at(xi) -> ExactnessReport:
    sd = symbol_D(xi)
    sa = symbol_A(xi)
    sb = symbol_B(xi)
    gap_da = rep4.subspace_distance(sd.image(), sa.kernel())
    gap_ab = rep4.subspace_distance(sa.image(), sb.kernel())
    return ExactnessReport(
        xi=np.asarray(xi, float),
        rank_d=sd.rank, rank_a=sa.rank, rank_b=sb.rank,
        gap_da=gap_da, gap_ab=gap_ab,
    )


def xi_design(count: int = 200, seed: int = 2024) -> np.ndarray:
    """Deterministic sample of unit covectors in R^4."""
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(count, 4))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def so4_rotation(angles_plus, angles_minus) -> np.ndarray:
    """Group element on R^4 from su(2)+ x su(2)- coordinates."""
    jp, jm = rep4.so4_generators()
    gen = sum(a * g for a, g in zip(angles_plus, jp))
    gen = gen + sum(a * g for a, g in zip(angles_minus, jm))
    return expm(gen)


def equivariance_defect(xi, angles_plus, angles_minus) -> float:
    """Max over the three symbols of || sigma_{g xi} - rho(g) sigma_xi rho(g)^-1 ||."""
    jp_r4, jm_r4 = rep4.so4_generators()
    gen_r4 = sum(a * g for a, g in zip(angles_plus, jp_r4))
    gen_r4 = gen_r4 + sum(a * g for a, g in zip(angles_minus, jm_r4))
    g_r4 = expm(gen_r4)
    gxi = g_r4 @ np.asarray(xi, float)

    defect = 0.0
    specs = [
        (symbol_D, ("L+",), None, ("R4", "L+"), (3, 1)),
        (symbol_A, ("R4", "L+"), (3, 1), ("R4", "Sym2L+"), (5, 1)),
        (symbol_B, ("R4", "Sym2L+"), (5, 1), ("L+", "Sym2L+"), (6, 0)),
    ]
    for fn, src_tags, src_label, tgt_tags, tgt_label in specs:
        rho_src = _block_rotation(src_tags, src_label, angles_plus, angles_minus)
        rho_tgt = _block_rotation(tgt_tags, tgt_label, angles_plus, angles_minus)
        s0 = fn(xi).matrix
        s1 = fn(gxi).matrix
        defect = max(defect, float(np.linalg.norm(
            s1 - rho_tgt @ s0 @ rho_src.T)))
    return defect


def _block_rotation(tags, label, angles_plus, angles_minus) -> np.ndarray:
    space = rep4.TensorSpace(list(tags))
    jp, jm = space.lift_generators()
    gen = sum(a * g for a, g in zip(angles_plus, jp))
    gen = gen + sum(a * g for a, g in zip(angles_minus, jm))
    big = expm(gen)
    if label is None:
        return big
    basis = _irrep_basis(tuple(tags), label)
    return basis.T @ big @ basis


# recorded constants --------------------------------------------------------


@dataclass(frozen=True)
class DimensionLedger:
    """Documented homology dimensions of the base complex.

    These are recorded constants, not recomputed: the index computation
    behind them is out of computational scope.
    """

    homology: dict = field(default_factory=lambda: {
        "H0": 10, "H1": 35, "H2": 0, "H3": 0})
    index: int = 35
    recompute: bool = False

    def as_dict(self) -> dict:
        return {"homology": dict(self.homology), "index": self.index,
                "recompute": self.recompute}


def dimension_ledger() -> DimensionLedger:
    return DimensionLedger()
