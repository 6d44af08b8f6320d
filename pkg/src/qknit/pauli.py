"""Pauli algebra and Clifford conjugation tables.

Paulis are stored in symplectic form (x bits, z bits, phase exponent of
i mod 4) with the per-qubit canonical order ``X^x Z^z``; the base-4
string index uses qubit 0 as the least significant digit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import all_paulis, num_qubits_of, pauli_string_to_indices

# per-letter (x, z, phase exponent): Y = i * X Z
_LETTER_XZP = {0: (0, 0, 0), 1: (1, 0, 0), 2: (1, 1, 1), 3: (0, 1, 0)}


@dataclass(frozen=True)
class SymplecticPauli:
    """i^phase * prod_q X_q^{x_q} Z_q^{z_q} over n qubits."""

    n: int
    x: int  # bit q set iff X on qubit q
    z: int
    phase: int  # exponent of i, mod 4

    def __mul__(self, other: "SymplecticPauli") -> "SymplecticPauli":
        if self.n != other.n:
            raise ValueError("qubit counts differ")
        swaps = bin(self.z & other.x).count("1")
        return SymplecticPauli(
            self.n, self.x ^ other.x, self.z ^ other.z, (self.phase + other.phase + 2 * swaps) % 4
        )

    @staticmethod
    def from_index(index: int, n: int, sign: int = 1) -> "SymplecticPauli":
        x = z = 0
        phase = 0 if sign == 1 else 2
        for q in range(n):
            lx, lz, lp = _LETTER_XZP[(index >> (2 * q)) & 3]
            x |= lx << q
            z |= lz << q
            phase += lp
        return SymplecticPauli(n, x, z, phase % 4)

    def to_index(self) -> tuple[int, int]:
        """(sign, base-4 index); the stored phase must be real after
        removing one factor of i per Y letter."""
        index = 0
        phase = self.phase
        for q in range(n := self.n):
            bx, bz = (self.x >> q) & 1, (self.z >> q) & 1
            digit = {(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}[(bx, bz)]
            index |= digit << (2 * q)
            phase -= _LETTER_XZP[digit][2]
        phase %= 4
        if phase not in (0, 2):
            raise ValueError("Pauli product is not Hermitian")
        return (1 if phase == 0 else -1), index


def pauli_index_from_string(label: str) -> int:
    digits = pauli_string_to_indices(label)
    return sum(d << (2 * q) for q, d in enumerate(digits))


def pauli_string_from_index(index: int, n: int) -> str:
    return "".join("IXYZ"[(index >> (2 * q)) & 3] for q in range(n))


class NotCliffordError(ValueError):
    """Raised when a unitary does not normalize the Pauli group."""


@dataclass(frozen=True)
class CliffordTableau:
    """Conjugation images of the generators X_q, Z_q under a Clifford.

    ``x_images[q]`` / ``z_images[q]`` hold U X_q U^dag / U Z_q U^dag.
    """

    n: int
    x_images: tuple[SymplecticPauli, ...]
    z_images: tuple[SymplecticPauli, ...]

    def conjugate_index(self, index: int, sign: int = 1) -> tuple[int, int]:
        """Image (sign, index) of a signed Pauli under the Clifford."""
        src = SymplecticPauli.from_index(index, self.n, sign)
        out = SymplecticPauli(self.n, 0, 0, src.phase)
        # conjugation is multiplicative over the X^x Z^z factorization
        for q in range(self.n):
            if (src.x >> q) & 1:
                out = out * self.x_images[q]
        for q in range(self.n):
            if (src.z >> q) & 1:
                out = out * self.z_images[q]
        return out.to_index()

    def conjugate_string(self, label: str) -> tuple[int, str]:
        sign, idx = self.conjugate_index(pauli_index_from_string(label))
        return sign, pauli_string_from_index(idx, self.n)


def _match_pauli(m: np.ndarray, n: int, atol: float) -> SymplecticPauli | None:
    """Identify m as +/- one Pauli matrix, or None."""
    paulis = all_paulis(n)
    coeffs = np.einsum("pba,ba->p", paulis.conj(), m) / (2**n)
    best = int(np.argmax(np.abs(coeffs)))
    c = coeffs[best]
    if abs(abs(c) - 1.0) > atol or abs(c.imag) > atol:
        return None
    sign = 1 if c.real > 0 else -1
    if np.max(np.abs(m - sign * paulis[best])) > atol:
        return None
    return SymplecticPauli.from_index(best, n, sign)


def is_clifford(u: np.ndarray, atol: float = 1e-9) -> bool:
    try:
        clifford_tableau(u, atol)
        return True
    except NotCliffordError:
        return False


def clifford_tableau(u: np.ndarray, atol: float = 1e-9) -> CliffordTableau:
    """Tableau from dense conjugation of all 2n generators.

    Raises NotCliffordError if any generator image fails to be a signed
    Pauli string within tolerance.
    """
    u = np.asarray(u, dtype=complex)
    n = num_qubits_of(u.shape[0])
    x_images, z_images = [], []
    for q in range(n):
        for kind, store in (("X", x_images), ("Z", z_images)):
            index = (1 if kind == "X" else 3) << (2 * q)
            gen = all_paulis(n)[index]
            img = _match_pauli(u @ gen @ u.conj().T, n, atol)
            if img is None:
                raise NotCliffordError(f"image of {kind}_{q} is not a signed Pauli")
            store.append(img)
    return CliffordTableau(n, tuple(x_images), tuple(z_images))


def pauli_conjugate(tableau: CliffordTableau, label: str) -> tuple[int, str]:
    """Signed image of a Pauli string under a verified Clifford tableau."""
    return tableau.conjugate_string(label)
