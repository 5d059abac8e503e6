"""Irreducible SO(4) projectors on small tensor spaces over R^4.

Spin(4) = Sp(1) x Sp(1): the self-dual su(2) factor acts on R^4 = H by
left multiplication, the anti-self-dual factor by right multiplication
(conjugate-twisted so both factors carry the same structure constants).
Real irreducibles are labeled S^{n,m} with n, m the doubled spins; their
dimension is (n+1)(m+1).

Projectors are built as joint eigenspace projectors of the two Casimir
operators, normalized so that the Casimir eigenvalue on spin s is
s(s+1).  Labels repeat on some spaces (isotypic blocks); these are kept
as single projectors with a multiplicity flag.  The hand parameterized
subspaces of R^4 (x) Sym^2(L+) serve as an independent cross-check of
the Casimir machinery.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass, field

import numpy as np

from .quatalg import QI, QJ, QK, left_mul_block, right_mul_block

# Tolerance used to match Casimir eigenvalues against s(s+1).
SPIN_MATCH_TOL = 1e-6
# Eigenvalue clustering tolerance inside one Casimir spectrum.
CLUSTER_TOL = 1e-8

FACTOR_DIMS = {"R4": 4, "L+": 3, "L-": 3, "Sym2L+": 6, "Sym3L+": 10}


def so4_generators() -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Spin-normalized generators (J+_a | J-_a) of so(4) on R^4.

    J+_a = (left mult by i,j,k)/2 generate the self-dual su(2), J-_a the
    anti-self-dual one (right mult by conjugates, halved).  They satisfy
    [J_1, J_2] = J_3 within each factor and [J+_a, J-_b] = 0, and each
    factor has Casimir (1/2)(3/2) Id on R^4.
    """
    plus = [0.5 * left_mul_block(q) for q in (QI, QJ, QK)]
    minus = [-0.5 * right_mul_block(q) for q in (QI, QJ, QK)]
    return plus, minus


def quaternion_triple() -> list[np.ndarray]:
    """Reference quaternionic structure (I_1, I_2, I_3) on R^4.

    Left multiplications by i, j, k: orthogonal, skew, I_1 I_2 = I_3,
    self-dual for the standard orientation.
    """
    return [left_mul_block(q) for q in (QI, QJ, QK)]


def _so3_adjoint() -> list[np.ndarray]:
    """Generators E_a on the 3-dim carrier of L+ ([E_1, E_2] = E_3)."""
    gens = []
    for a in range(3):
        e = np.zeros((3, 3))
        for b in range(3):
            for c in range(3):
                e[c, b] = _eps(a, b, c)
        gens.append(e)
    return gens


def _eps(a: int, b: int, c: int) -> float:
    if (a, b, c) in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        return 1.0
    if (a, b, c) in ((0, 2, 1), (2, 1, 0), (1, 0, 2)):
        return -1.0
    return 0.0


_SYM_BASES: dict[tuple[int, int], np.ndarray] = {}


def _sym_power_basis(dim: int, k: int) -> np.ndarray:
    """Isometric basis of Sym^k(R^dim) inside (R^dim)^(tensor k).

    Columns are orthonormal vectors spanning the image of the
    symmetrizer, so the induced inner product makes symmetrization an
    orthogonal projection.  Cached so every consumer shares one basis.
    """
    key = (dim, k)
    if key in _SYM_BASES:
        return _SYM_BASES[key]
    n = dim**k
    sym = np.zeros((n, n))
    perms = list(itertools.permutations(range(k)))
    for perm in perms:
        p = np.zeros((n, n))
        for idx in itertools.product(range(dim), repeat=k):
            src = _flatten(idx, dim)
            dst = _flatten(tuple(idx[perm[a]] for a in range(k)), dim)
            p[dst, src] += 1.0
        sym += p
    sym /= len(perms)
    evals, evecs = np.linalg.eigh(sym)
    cols = evecs[:, evals > 0.5]
    _SYM_BASES[key] = cols
    return cols


def _flatten(idx: tuple[int, ...], dim: int) -> int:
    out = 0
    for i in idx:
        out = out * dim + i
    return out


def _lift_to_tensor_power(gen: np.ndarray, k: int) -> np.ndarray:
    """Leibniz lift of a generator to the k-th tensor power."""
    dim = gen.shape[0]
    total = np.zeros((dim**k, dim**k))
    for slot in range(k):
        mats = [np.eye(dim)] * k
        mats[slot] = gen
        acc = mats[0]
        for m in mats[1:]:
            acc = np.kron(acc, m)
        total += acc
    return total


class _Factor:
    """One tensor factor: carrier dimension plus its J+ / J- action."""

    def __init__(self, tag: str):
        if tag not in FACTOR_DIMS:
            raise ValueError(f"unknown factor tag {tag!r}")
        self.tag = tag
        self.dim = FACTOR_DIMS[tag]
        ad = _so3_adjoint()
        if tag == "R4":
            self.jplus, self.jminus = so4_generators()
        elif tag == "L+":
            self.jplus, self.jminus = ad, [np.zeros((3, 3))] * 3
        elif tag == "L-":
            self.jplus, self.jminus = [np.zeros((3, 3))] * 3, ad
        else:
            k = {"Sym2L+": 2, "Sym3L+": 3}[tag]
            basis = _sym_power_basis(3, k)
            self.sym_basis = basis
            self.jplus = [basis.T @ _lift_to_tensor_power(g, k) @ basis for g in ad]
            self.jminus = [np.zeros((basis.shape[1],) * 2)] * 3


class TensorSpace:
    """Tensor product of factors from {R4, L+, L-, Sym2L+, Sym3L+}.

    The carrier is the Kronecker product of the factor carriers with the
    induced Euclidean inner product (symmetric powers are embedded
    isometrically, so plain dot products are the invariant pairing).
    """

    def __init__(self, factors):
        if not factors:
            raise ValueError("tensor space needs at least one factor")
        self.tags = tuple(factors)
        self._factors = [_Factor(t) for t in self.tags]
        self.dim = int(np.prod([f.dim for f in self._factors]))

    @property
    def signature(self) -> str:
        return "*".join(self.tags)

    def lift_generators(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Leibniz-rule extension of J+/J- to the full tensor space."""
        plus, minus = [], []
        for a in range(3):
            plus.append(self._lift_one([f.jplus[a] for f in self._factors]))
            minus.append(self._lift_one([f.jminus[a] for f in self._factors]))
        return plus, minus

    def _lift_one(self, gens: list[np.ndarray]) -> np.ndarray:
        total = np.zeros((self.dim, self.dim))
        for slot, g in enumerate(gens):
            mats = [np.eye(f.dim) for f in self._factors]
            mats[slot] = g
            acc = mats[0]
            for m in mats[1:]:
                acc = np.kron(acc, m)
            total += acc
        return total

    def casimirs(self) -> tuple[np.ndarray, np.ndarray]:
        plus, minus = self.lift_generators()
        cas_p = -sum(g @ g for g in plus)
        cas_m = -sum(g @ g for g in minus)
        return cas_p, cas_m


def lift_generators(space: TensorSpace) -> tuple[list[np.ndarray], list[np.ndarray]]:
    return space.lift_generators()


@dataclass
class Projector:
    """Orthogonal projector onto one S^{n,m} block (isotypic if mult > 1)."""

    label: tuple[int, int]
    matrix: np.ndarray
    rank: int
    casimir_pair: tuple[float, float]
    multiplicity: int = 1

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v


@dataclass
class ProjectorTable:
    """All S^{n,m} projectors of one tensor space."""

    space: TensorSpace
    blocks: dict[tuple[int, int], Projector] = field(default_factory=dict)

    def __getitem__(self, label: tuple[int, int]) -> Projector:
        return self.blocks[label]

    def __contains__(self, label) -> bool:
        return label in self.blocks

    def labels(self) -> list[tuple[int, int]]:
        return sorted(self.blocks)

    def project(self, label: tuple[int, int], v: np.ndarray) -> np.ndarray:
        return self.blocks[label].apply(v)

    def completeness_defect(self) -> float:
        total = sum(p.matrix for p in self.blocks.values())
        return float(np.linalg.norm(total - np.eye(self.space.dim)))


def _cluster(evals: np.ndarray) -> list[tuple[float, np.ndarray]]:
    """Group sorted eigenvalues into clusters of near-equal values."""
    order = np.argsort(evals)
    clusters: list[tuple[float, list[int]]] = []
    for idx in order:
        v = evals[idx]
        if clusters and abs(v - clusters[-1][0]) < CLUSTER_TOL * (1.0 + abs(v)):
            clusters[-1][1].append(idx)
        else:
            clusters.append((v, [idx]))
    return [(float(np.mean(evals[ix])), np.array(ix)) for v, ix in clusters]


def _spin_label(eig: float) -> int:
    """Doubled spin n from the Casimir eigenvalue s(s+1), s = n/2."""
    s = 0.5 * (-1.0 + np.sqrt(max(1.0 + 4.0 * eig, 0.0)))
    n = int(round(2.0 * s))
    if abs(0.5 * n * (0.5 * n + 1.0) - eig) > SPIN_MATCH_TOL:
        raise ValueError(f"Casimir eigenvalue {eig} is not of the form s(s+1)")
    return n


def build_projectors(space: TensorSpace, cache_path=None) -> ProjectorTable:
    """Joint Casimir eigenspace projectors, keyed by (n, m).

    If the joint eigenspace of a label is larger than (n+1)(m+1), the
    label occurs with multiplicity and the isotypic projector carries a
    multiplicity flag; kernels and images of full maps remain usable.
    """
    if cache_path is not None:
        table = _load_cache(space, cache_path)
        if table is not None:
            return table

    cas_p, cas_m = space.casimirs()
    evals_p, evecs_p = np.linalg.eigh(0.5 * (cas_p + cas_p.T))
    table = ProjectorTable(space)
    for eig_p, idx in _cluster(evals_p):
        vp = evecs_p[:, idx]
        n = _spin_label(eig_p)
        sub = vp.T @ cas_m @ vp
        evals_m, evecs_m = np.linalg.eigh(0.5 * (sub + sub.T))
        for eig_m, jdx in _cluster(evals_m):
            m = _spin_label(eig_m)
            basis = vp @ evecs_m[:, jdx]
            rank = basis.shape[1]
            irr = (n + 1) * (m + 1)
            if rank % irr != 0:
                raise ValueError(
                    f"joint eigenspace for S^{{{n},{m}}} has rank {rank}, "
                    f"not a multiple of {irr}"
                )
            label = (n, m)
            proj = basis @ basis.T
            if label in table.blocks:
                prev = table.blocks[label]
                proj = prev.matrix + proj
                rank += prev.rank
            table.blocks[label] = Projector(
                label=label,
                matrix=proj,
                rank=rank,
                casimir_pair=(eig_p, eig_m),
                multiplicity=rank // irr,
            )
    if cache_path is not None:
        _save_cache(table, cache_path)
    return table


# ---------------------------------------------------------------------------
# Packing of symmetric covector families into R^4 (x) Sym^2(L+)
# ---------------------------------------------------------------------------

_SYM2_BASIS = _sym_power_basis(3, 2)  # 9 x 6, isometric


def sym2_coords(i: int, j: int) -> np.ndarray:
    """Coordinates of w_i . w_j (symmetric product) in the Sym2L+ carrier."""
    v = np.zeros(9)
    v[3 * i + j] += 0.5
    v[3 * j + i] += 0.5
    return _SYM2_BASIS.T @ v


def pack_family(a: np.ndarray) -> np.ndarray:
    """Assemble sum_ij a_ij (x) w_i . w_j into the R4*Sym2L+ carrier.

    `a` has shape (3, 3, 4) and is used symmetrized; the result lives in
    the 24-dim carrier that the (R4, Sym2L+) projector table acts on.
    """
    a = np.asarray(a, dtype=float)
    out = np.zeros(4 * 6)
    for i in range(3):
        for j in range(3):
            coeff = 0.5 * (a[i, j] + a[j, i])
            out += np.kron(coeff, sym2_coords(i, j))
    return out


def unpack_family(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`pack_family` (returns the symmetric (3,3,4) family)."""
    mat = v.reshape(4, 6) @ _SYM2_BASIS.T  # 4 x 9, coordinates in L+ (x) L+
    a = np.zeros((3, 3, 4))
    for i in range(3):
        for j in range(3):
            a[i, j] = mat[:, 3 * i + j]
    return 0.5 * (a + a.transpose(1, 0, 2))


def s11_element(r: np.ndarray) -> np.ndarray:
    """sum_i r (x) I_i (x) I_i, the hand parameterization of S^{1,1}."""
    a = np.zeros((3, 3, 4))
    for i in range(3):
        a[i, i] = r
    return pack_family(a)


def s31_element(r1, r2, r3) -> np.ndarray:
    """sum_ij (I_i r_j + I_j r_i) (x) I_i (x) I_j with sum_i I_i r_i = 0.

    The trace constraint is enforced by projecting the input triple onto
    the kernel of (r_1, r_2, r_3) -> sum_i I_i r_i.
    """
    iq = quaternion_triple()
    r = [np.asarray(r1, float), np.asarray(r2, float), np.asarray(r3, float)]
    s = sum(iq[i] @ r[i] for i in range(3))
    r = [r[i] + iq[i] @ s / 3.0 for i in range(3)]  # I_i(I_i s) = -s
    a = np.zeros((3, 3, 4))
    for i in range(3):
        for j in range(3):
            a[i, j] = iq[i] @ r[j] + iq[j] @ r[i]
    return pack_family(a)


def _family_units() -> list[np.ndarray]:
    """Basis of symmetric (3,3,4) families, one unit per slot."""
    units = []
    for i, j in [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]:
        for c in range(4):
            a = np.zeros((3, 3, 4))
            a[i, j, c] = 1.0
            a[j, i, c] = 1.0
            units.append(a)
    return units


def s51_span() -> np.ndarray:
    """Orthonormal basis (as columns) of the parameterized S^{5,1}.

    Symmetric families a_ij with sum_i I_i a_ij = 0 for every j: 24
    family coordinates minus 12 constraints leave a 12-dim subspace.
    """
    iq = quaternion_triple()
    units = _family_units()
    con = np.zeros((12, len(units)))
    for col, a in enumerate(units):
        for j in range(3):
            con[4 * j:4 * j + 4, col] = sum(iq[i] @ a[i, j] for i in range(3))
    _, sv, vt = np.linalg.svd(con)
    null = vt[int(np.sum(sv > 1e-10 * sv[0])):]
    cols = [
        sum(coef * pack_family(units[t]) for t, coef in enumerate(row))
        for row in null
    ]
    return _orthonormal_columns(np.array(cols).T)


def s11_span() -> np.ndarray:
    cols = [s11_element(np.eye(4)[c]) for c in range(4)]
    return _orthonormal_columns(np.array(cols).T)


def s31_span() -> np.ndarray:
    cols = []
    for slot in range(3):
        for c in range(4):
            r = [np.zeros(4), np.zeros(4), np.zeros(4)]
            r[slot] = np.eye(4)[c]
            cols.append(s31_element(*r))
    return _orthonormal_columns(np.array(cols).T)


def _orthonormal_columns(m: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    if m.size == 0:
        return m.reshape(m.shape[0], 0)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return u[:, :0]
    return u[:, s > tol * s[0]]


def explicit_S51_membership(a: np.ndarray) -> float:
    """Residual sum_j ||sum_i I_i a_ij|| of the S^{5,1} membership test.

    `a` is a symmetric (3, 3, 4) covector family expressed in a frame
    where the quaternionic structure is the reference triple.  Zero iff
    the packed element lies in S^{5,1}.
    """
    iq = quaternion_triple()
    a = 0.5 * (np.asarray(a, float) + np.asarray(a, float).transpose(1, 0, 2))
    total = 0.0
    for j in range(3):
        s = sum(iq[i] @ a[i, j] for i in range(3))
        total += float(np.linalg.norm(s))
    return total


def subspace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """sin of the largest principal angle between the column spans.

    Computed as the spectral norm of (Id - Q_a Q_a^T) Q_b, which stays
    accurate for nearly identical subspaces (no 1 - cos^2 cancellation).
    """
    qa = _orthonormal_columns(np.asarray(a, float))
    qb = _orthonormal_columns(np.asarray(b, float))
    if qa.shape[1] != qb.shape[1]:
        return 1.0
    resid = qb - qa @ (qa.T @ qb)
    sv = np.linalg.svd(resid, compute_uv=False)
    return float(sv[0]) if sv.size else 0.0


# ---------------------------------------------------------------------------
# Optional binary cache (row-major float64 with a small dimensions header)
# ---------------------------------------------------------------------------

_CACHE_MAGIC = b"QCPT"


def _save_cache(table: ProjectorTable, path) -> None:
    with open(path, "wb") as fh:
        sig = table.space.signature.encode()
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<II", len(sig), len(table.blocks)))
        fh.write(sig)
        for label, proj in sorted(table.blocks.items()):
            fh.write(struct.pack(
                "<iiiiidd", label[0], label[1], proj.rank, proj.multiplicity,
                table.space.dim, proj.casimir_pair[0], proj.casimir_pair[1],
            ))
            fh.write(np.ascontiguousarray(proj.matrix, dtype="<f8").tobytes())


def _load_cache(space: TensorSpace, path):
    try:
        with open(path, "rb") as fh:
            if fh.read(4) != _CACHE_MAGIC:
                return None
            sig_len, n_blocks = struct.unpack("<II", fh.read(8))
            if fh.read(sig_len).decode() != space.signature:
                return None
            table = ProjectorTable(space)
            for _ in range(n_blocks):
                n, m, rank, mult, dim, cp, cm = struct.unpack("<iiiiidd", fh.read(36))
                mat = np.frombuffer(fh.read(8 * dim * dim), dtype="<f8").reshape(dim, dim)
                table.blocks[(n, m)] = Projector((n, m), mat.copy(), rank, (cp, cm), mult)
            return table
    except (OSError, struct.error):
        return None
