"""Canonical (KAK) decomposition of two-qubit unitaries.

Any 4x4 unitary factors as ``g * (V1 (x) V2) * E(tx, ty, tz) * (V3 (x) V4)``
with ``E(tx,ty,tz) = exp(i(tx XX + ty YY + tz ZZ))`` and Weyl-chamber
angles ``|tz| <= ty <= tx <= pi/4``.  V1/V3 act on local qubit 1 (the
most significant index), V2/V4 on local qubit 0.

The algorithm conjugates into the magic basis, orthogonally diagonalizes
the symmetric unitary ``m m^T``, and canonicalizes the extracted angles
with explicit local-Pauli and pi/4-rotation moves.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .linalg import I2, X, Y, Z, assert_unitary, kron

MAGIC = np.array(
    [[1, 0, 0, 1j], [0, 1j, 1, 0], [0, 1j, -1, 0], [1, 0, 0, -1j]],
    dtype=complex,
) / np.sqrt(2)
MAGIC_DAG = MAGIC.conj().T

# phase pattern of exp(i(x XX + y YY + z ZZ)) on the magic-basis columns,
# first column = global phase slot
_PHASE_PATTERN_FULL = np.array(
    [[1, 1, -1, 1], [1, 1, 1, -1], [1, -1, -1, -1], [1, -1, 1, 1]],
    dtype=float,
)
_PHASE_PATTERN = _PHASE_PATTERN_FULL

_ROT = {
    "X": (np.cos(np.pi / 4) * I2 - 1j * np.sin(np.pi / 4) * X),
    "Y": (np.cos(np.pi / 4) * I2 - 1j * np.sin(np.pi / 4) * Y),
    "Z": (np.cos(np.pi / 4) * I2 - 1j * np.sin(np.pi / 4) * Z),
}
_PAULI = {"X": X, "Y": Y, "Z": Z}

ANGLE_TOL = 1e-9
RECONSTRUCTION_TOL = 1e-8


class KakClass(Enum):
    THETA_Z_ZERO = "THETA_Z_ZERO"
    SWAP_CLASS = "SWAP_CLASS"
    GENERAL = "GENERAL"


@dataclass(frozen=True)
class KakParams:
    """Local unitaries, canonical angles and global phase of a 2-qubit gate."""

    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray
    v4: np.ndarray
    theta_x: float
    theta_y: float
    theta_z: float
    global_phase: complex

    @property
    def angles(self) -> tuple[float, float, float]:
        return (self.theta_x, self.theta_y, self.theta_z)

    def interaction(self) -> np.ndarray:
        return canonical_interaction(self.theta_x, self.theta_y, self.theta_z)

    def reconstruct(self) -> np.ndarray:
        return self.global_phase * (kron(self.v1, self.v2) @ self.interaction() @ kron(self.v3, self.v4))


def canonical_interaction(tx: float, ty: float, tz: float) -> np.ndarray:
    """exp(i(tx XX + ty YY + tz ZZ)) via its magic-basis diagonalization."""
    phases = _PHASE_PATTERN[:, 1:] @ np.array([tx, ty, tz])
    return MAGIC @ np.diag(np.exp(1j * phases)) @ MAGIC_DAG


@dataclass(frozen=True)
class UCoefficients:
    """Expansion U = u0 II + u1 XX + u2 YY + u3 ZZ of the interaction part."""

    u0: complex
    u1: complex
    u2: complex
    u3: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.u0, self.u1, self.u2, self.u3])


def u_coefficients(params: KakParams) -> UCoefficients:
    """Pauli-product coefficients from the three commuting exponentials."""
    cx, sx = np.cos(params.theta_x), np.sin(params.theta_x)
    cy, sy = np.cos(params.theta_y), np.sin(params.theta_y)
    cz, sz = np.cos(params.theta_z), np.sin(params.theta_z)
    return UCoefficients(
        u0=cx * cy * cz + 1j * sx * sy * sz,
        u1=cx * sy * sz + 1j * sx * cy * cz,
        u2=sx * cy * sz + 1j * cx * sy * cz,
        u3=sx * sy * cz + 1j * cx * cy * sz,
    )


def classify(params: KakParams) -> KakClass:
    tx, ty, tz = params.angles
    if abs(tz) <= ANGLE_TOL:
        return KakClass.THETA_Z_ZERO
    if all(abs(t - np.pi / 4) <= ANGLE_TOL for t in (tx, ty, abs(tz))):
        return KakClass.SWAP_CLASS
    return KakClass.GENERAL


def _normalize_columns(vecs: np.ndarray) -> np.ndarray:
    """Fix each real column's sign so its largest-|.| component is positive."""
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        pivot = int(np.argmax(np.abs(col)))
        if col[pivot] < 0:
            out[:, j] = -col
    return out


def _simultaneous_diagonalize(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Orthogonal basis diagonalizing two commuting real symmetric matrices.

    Columns are ordered by descending eigenphase of a + ib with a
    deterministic lexicographic tie-break on the (sign-normalized)
    eigenvector components.
    """
    vals_a, vecs = np.linalg.eigh(a)
    # refine within near-degenerate eigenspaces of a
    cols = []
    i = 0
    while i < 4:
        j = i
        while j + 1 < 4 and vals_a[j + 1] - vals_a[i] < 1e-7:
            j += 1
        block = vecs[:, i : j + 1]
        if j > i:
            sub = block.T @ b @ block
            _, rot = np.linalg.eigh((sub + sub.T) / 2)
            block = block @ rot
        cols.append(block)
        i = j + 1
    o = _normalize_columns(np.concatenate(cols, axis=1))
    da = np.einsum("ij,jk,ki->i", o.T, a, o)
    db = np.einsum("ij,jk,ki->i", o.T, b, o)
    phases = np.angle(da + 1j * db)
    # descending phase, ties broken lexicographically on components
    order = sorted(range(4), key=lambda k: (-phases[k], tuple(np.round(o[:, k], 12))))
    return o[:, order]


def _kron_factor(m: np.ndarray) -> tuple[complex, np.ndarray, np.ndarray]:
    """Split m = g * (a (x) b) with det(a) = det(b) = 1; m must be a product."""
    r, c = np.unravel_index(np.argmax(np.abs(m)), m.shape)
    ia, ib = divmod(int(r), 2)
    ja, jb = divmod(int(c), 2)
    a = np.array([[m[2 * 0 + ib, 2 * 0 + jb], m[2 * 0 + ib, 2 * 1 + jb]],
                  [m[2 * 1 + ib, 2 * 0 + jb], m[2 * 1 + ib, 2 * 1 + jb]]])
    b = np.array([[m[2 * ia + 0, 2 * ja + 0], m[2 * ia + 0, 2 * ja + 1]],
                  [m[2 * ia + 1, 2 * ja + 0], m[2 * ia + 1, 2 * ja + 1]]])
    a = a / np.sqrt(np.linalg.det(a))
    b = b / np.sqrt(np.linalg.det(b))
    g = m[r, c] / (a[ia, ja] * b[ib, jb])
    if np.max(np.abs(g * kron(a, b) - m)) > 1e-9:
        raise ValueError("matrix does not factor as a local tensor product")
    return g, a, b


class _Decomposition:
    """Mutable U = phase * (a1(x)a2) E(x,y,z) (b1(x)b2) under chamber moves."""

    def __init__(self, phase, a1, a2, b1, b2, x, y, z):
        self.phase = phase
        self.a1, self.a2, self.b1, self.b2 = a1, a2, b1, b2
        self.x, self.y, self.z = x, y, z

    def shift(self, axis: str, k: int):
        # E(..t..) = E(..t - k pi/2..) * (i P(x)P)^k absorbed rightwards
        p = _PAULI[axis]
        t = {"X": "x", "Y": "y", "Z": "z"}[axis]
        setattr(self, t, getattr(self, t) - k * np.pi / 2)
        self.phase *= 1j**k
        pk = np.linalg.matrix_power(p, k % 4) if k % 4 else I2
        self.b1 = pk @ self.b1
        self.b2 = pk @ self.b2

    def negate(self, axis: str):
        # conjugating by P on qubit 1 flips the two angles orthogonal to P
        p = _PAULI[axis]
        flips = {"Z": ("x", "y"), "X": ("y", "z"), "Y": ("x", "z")}[axis]
        for t in flips:
            setattr(self, t, -getattr(self, t))
        self.a1 = self.a1 @ p
        self.b1 = p @ self.b1

    def swap(self, t1: str, t2: str):
        # conjugating by R(x)R (pi/4 rotation about the third axis) swaps t1,t2
        third = ({"x", "y", "z"} - {t1, t2}).pop().upper()
        w = _ROT[third]
        wd = w.conj().T
        v1, v2 = getattr(self, t1), getattr(self, t2)
        setattr(self, t1, v2)
        setattr(self, t2, v1)
        self.a1 = self.a1 @ wd
        self.a2 = self.a2 @ wd
        self.b1 = w @ self.b1
        self.b2 = w @ self.b2

    def canonicalize(self):
        for t in ("x", "y", "z"):
            v = getattr(self, t)
            k = int(np.round(v / (np.pi / 2)))
            if v - k * np.pi / 2 <= -np.pi / 4 + 1e-12:
                k -= 1
            if k:
                self.shift(t.upper(), k)
        for _ in range(12):
            if self.x < -1e-15 and self.y < -1e-15:
                self.negate("Z")
            elif self.x < -1e-15:
                self.negate("Y")
            elif self.y < -1e-15:
                self.negate("X")
            if self.x < self.y - 1e-15:
                self.swap("x", "y")
                continue
            if self.y < abs(self.z) - 1e-15:
                self.swap("y", "z")
                continue
            if self.x >= np.pi / 4 - 1e-12 and self.z < -1e-15:
                self.negate("Y")  # flips (x, z)
                self.shift("X", -1)  # -pi/4 -> +pi/4
                continue
            if self.x >= -1e-15 and self.y >= -1e-15:
                break
        else:
            raise RuntimeError("Weyl chamber canonicalization did not converge")


def kak(u: np.ndarray) -> KakParams:
    """Canonical decomposition of a two-qubit unitary.

    Deterministic for a fixed input; raises on non-unitary input.
    """
    u = assert_unitary(np.asarray(u, dtype=complex))
    if u.shape != (4, 4):
        raise ValueError(f"expected a 4x4 unitary, got shape {u.shape}")
    m = MAGIC_DAG @ u @ MAGIC
    w = m @ m.T
    o = _simultaneous_diagonalize(w.real, w.imag)
    if np.linalg.det(o) < 0:
        o[:, 0] = -o[:, 0]
    d = np.einsum("ij,jk,ki->i", o.T, w, o)
    phis = np.angle(d) / 2
    # branch choice must make f^-1 O^T m special orthogonal
    f = np.exp(1j * phis)
    g = (o.T @ m) / f[:, None]
    if np.linalg.det(g).real < 0:
        phis[0] += np.pi
        f = np.exp(1j * phis)
        g = (o.T @ m) / f[:, None]
    if np.max(np.abs(g.imag)) > 1e-8:
        raise RuntimeError("magic-basis right factor is not real orthogonal")
    g = g.real

    c0, tx, ty, tz = np.linalg.solve(_PHASE_PATTERN_FULL, phis)
    ga, a1, a2 = _kron_factor(MAGIC @ o @ MAGIC_DAG)
    gb, b1, b2 = _kron_factor(MAGIC @ g @ MAGIC_DAG)

    dec = _Decomposition(ga * gb * np.exp(1j * c0), a1, a2, b1, b2, tx, ty, tz)
    dec.canonicalize()

    params = KakParams(
        v1=dec.a1, v2=dec.a2, v3=dec.b1, v4=dec.b2,
        theta_x=float(dec.x), theta_y=float(dec.y), theta_z=float(dec.z),
        global_phase=complex(dec.phase / abs(dec.phase)),
    )
    err = np.max(np.abs(params.reconstruct() - u))
    if err > RECONSTRUCTION_TOL:
        raise RuntimeError(f"KAK reconstruction error {err:.2e} exceeds tolerance")
    return params
