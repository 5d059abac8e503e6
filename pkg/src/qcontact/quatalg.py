"""Exact quaternion and H^2 = R^8 linear algebra.

All frame computations on the 7-sphere sit on top of this module: the
scalars H acts on R^8 = H^2 from the right, and right multiplication by
imaginary units realizes both the Reeb fields and the almost complex
structures of the canonical contact structure.

Coordinate convention: the basis of R^8 is (1, i, j, k) of the first H
factor followed by (1, i, j, k) of the second, so right multiplication
is block diagonal with two identical 4x4 blocks.
"""

from __future__ import annotations

import numpy as np


class Quaternion:
    """A quaternion w + x*i + y*j + z*k with float components."""

    __slots__ = ("w", "x", "y", "z")

    def __init__(self, w=0.0, x=0.0, y=0.0, z=0.0):
        self.w = float(w)
        self.x = float(x)
        self.y = float(y)
        self.z = float(z)

    @classmethod
    def from_array(cls, a) -> "Quaternion":
        return cls(a[0], a[1], a[2], a[3])

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def conj(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def norm(self) -> float:
        return float(np.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2))

    def __add__(self, q: "Quaternion") -> "Quaternion":
        return Quaternion(self.w + q.w, self.x + q.x, self.y + q.y, self.z + q.z)

    def __sub__(self, q: "Quaternion") -> "Quaternion":
        return Quaternion(self.w - q.w, self.x - q.x, self.y - q.y, self.z - q.z)

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def __mul__(self, q):
        if isinstance(q, Quaternion):
            return qmul(self, q)
        return Quaternion(self.w * q, self.x * q, self.y * q, self.z * q)

    def __rmul__(self, s) -> "Quaternion":
        return Quaternion(self.w * s, self.x * s, self.y * s, self.z * s)

    def __repr__(self) -> str:
        return f"Quaternion({self.w}, {self.x}, {self.y}, {self.z})"


QONE = Quaternion(1.0)
QI = Quaternion(0.0, 1.0)
QJ = Quaternion(0.0, 0.0, 1.0)
QK = Quaternion(0.0, 0.0, 0.0, 1.0)
IMAGINARY_UNITS = (QI, QJ, QK)


def qmul(p: Quaternion, q: Quaternion) -> Quaternion:
    """Hamilton product p*q (i*j = k, j*k = i, k*i = j)."""
    return Quaternion(
        p.w * q.w - p.x * q.x - p.y * q.y - p.z * q.z,
        p.w * q.x + p.x * q.w + p.y * q.z - p.z * q.y,
        p.w * q.y - p.x * q.z + p.y * q.w + p.z * q.x,
        p.w * q.z + p.x * q.y - p.y * q.x + p.z * q.w,
    )


def left_mul_block(q: Quaternion) -> np.ndarray:
    """4x4 matrix of v -> q*v on H with basis (1, i, j, k)."""
    m = np.empty((4, 4))
    basis = (QONE, QI, QJ, QK)
    for col, e in enumerate(basis):
        m[:, col] = qmul(q, e).as_array()
    return m


def right_mul_block(q: Quaternion) -> np.ndarray:
    """4x4 matrix of v -> v*q on H with basis (1, i, j, k)."""
    m = np.empty((4, 4))
    basis = (QONE, QI, QJ, QK)
    for col, e in enumerate(basis):
        m[:, col] = qmul(e, q).as_array()
    return m


def right_mul_matrix(q: Quaternion) -> np.ndarray:
    """8x8 matrix M with M @ v = v*q under the R^8 = H^2 identification.

    Block diagonal with two identical right-multiplication blocks.  Right
    action reverses composition order: M(p) @ M(q) = M(q*p).
    """
    block = right_mul_block(q)
    m = np.zeros((8, 8))
    m[:4, :4] = block
    m[4:, 4:] = block
    return m


def ambient_inner(u, v) -> float:
    """Euclidean dot product on R^8 = H^2."""
    return float(np.dot(np.asarray(u), np.asarray(v)))


def split_quaternion_pair(v) -> tuple[Quaternion, Quaternion]:
    """View an R^8 vector as a pair of quaternions."""
    v = np.asarray(v)
    return Quaternion.from_array(v[:4]), Quaternion.from_array(v[4:])


def join_quaternion_pair(a: Quaternion, b: Quaternion) -> np.ndarray:
    """Inverse of :func:`split_quaternion_pair`."""
    return np.concatenate([a.as_array(), b.as_array()])


def right_multiply_vector(v, q: Quaternion) -> np.ndarray:
    """v*q for v in R^8, componentwise on the two H factors."""
    a, b = split_quaternion_pair(v)
    return join_quaternion_pair(qmul(a, q), qmul(b, q))
