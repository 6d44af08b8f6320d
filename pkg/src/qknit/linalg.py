"""Dense complex linear algebra for small multi-qubit systems.

Conventions used throughout the package:

* Qubit 0 is the least significant bit of every amplitude index, so a
  state on qubits ``(q_{n-1}, ..., q_1, q_0)`` has amplitude index
  ``sum(bit_q << q)``.  Operators built with :func:`kron` therefore list
  the *highest* qubit first.
* Pauli strings are indexed in base 4 (I=0, X=1, Y=2, Z=3) with qubit 0
  again the least significant digit.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, reduce

import numpy as np

ATOL_UNITARY = 1e-10
ATOL_DENSITY = 1e-10
SCHMIDT_TRUNCATION = 1e-12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (I2, X, Y, Z)
PAULI_LABELS = "IXYZ"


def kron(*ops: np.ndarray) -> np.ndarray:
    """Tensor product; the first factor is the most significant."""
    return reduce(np.kron, ops)


def is_unitary(u: np.ndarray, atol: float = ATOL_UNITARY) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= atol


def assert_unitary(u: np.ndarray, atol: float = ATOL_UNITARY) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u, atol):
        raise ValueError("matrix is not unitary within tolerance")
    return u


def is_density_matrix(rho: np.ndarray, trace: float = 1.0, atol: float = ATOL_DENSITY) -> bool:
    rho = np.asarray(rho)
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        return False
    if abs(np.trace(rho).real - trace) > 1e-12:
        return False
    return np.linalg.eigvalsh(rho).min() >= -atol


def num_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if 1 << n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True)
class SchmidtData:
    """Schmidt form of a bipartite pure state.

    ``coefficients`` are nonincreasing and nonnegative; columns of
    ``basis_a``/``basis_b`` are the matching orthonormal local vectors,
    so the state is ``sum_i c_i |a_i> (x) |b_i>`` with the A factor most
    significant.
    """

    coefficients: np.ndarray
    basis_a: np.ndarray
    basis_b: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.coefficients)

    def reconstruct(self) -> np.ndarray:
        out = np.zeros(self.basis_a.shape[0] * self.basis_b.shape[0], dtype=complex)
        for c, a, b in zip(self.coefficients, self.basis_a.T, self.basis_b.T):
            out += c * np.kron(a, b)
        return out


def schmidt_decompose(state: np.ndarray, dim_a: int, dim_b: int) -> SchmidtData:
    """Schmidt decomposition across the split index = i_A * dim_b + i_B.

    The input must be normalized; coefficients below the truncation
    threshold are dropped.
    """
    state = np.asarray(state, dtype=complex).reshape(-1)
    if state.size != dim_a * dim_b:
        raise ValueError(f"state has {state.size} amplitudes, expected {dim_a * dim_b}")
    norm = np.linalg.norm(state)
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"state is not normalized (norm {norm:.3e})")
    m = state.reshape(dim_a, dim_b)
    u, s, vh = np.linalg.svd(m)
    keep = s > SCHMIDT_TRUNCATION
    return SchmidtData(coefficients=s[keep], basis_a=u[:, keep], basis_b=vh[keep, :].conj().T)


def regroup_state(state: np.ndarray, qubits_a: list[int], qubits_b: list[int]) -> np.ndarray:
    """Permute amplitudes so the A qubits form the most significant block.

    Within each block the given qubit order is kept, first entry most
    significant.  Together the two lists must cover every qubit exactly
    once.
    """
    state = np.asarray(state).reshape(-1)
    n = num_qubits_of(state.size)
    order = list(qubits_a) + list(qubits_b)
    if sorted(order) != list(range(n)):
        raise ValueError("qubit groups must partition range(n)")
    # numpy axis k of state.reshape([2]*n) is qubit n-1-k
    axes = [n - 1 - q for q in order]
    return state.reshape([2] * n).transpose(axes).reshape(-1)


def partial_trace(rho: np.ndarray, dims: list[int], keep: list[int]) -> np.ndarray:
    """Trace out all factors not in ``keep``; dims[0] is the most significant."""
    rho = np.asarray(rho)
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise ValueError(f"density matrix shape {rho.shape} does not match dims {dims}")
    k = len(dims)
    keep = sorted(keep)
    if any(i < 0 or i >= k for i in keep):
        raise ValueError(f"keep indices {keep} out of range for {k} subsystems")
    t = rho.reshape(list(dims) + list(dims))
    remaining = k
    # descending order keeps the row axis of factor i at position i
    for i in sorted((i for i in range(k) if i not in keep), reverse=True):
        t = np.trace(t, axis1=i, axis2=i + remaining)
        remaining -= 1
    d_keep = int(np.prod([dims[i] for i in keep])) if keep else 1
    return t.reshape(d_keep, d_keep)


def pauli_string_to_indices(label: str) -> list[int]:
    """Letter per qubit, character i = qubit i (so the string reads q0 first)."""
    try:
        return [PAULI_LABELS.index(ch) for ch in label]
    except ValueError:
        raise ValueError(f"invalid Pauli string {label!r}") from None


def pauli_matrix(index: int, n: int) -> np.ndarray:
    """Dense matrix of the n-qubit Pauli with base-4 index (qubit 0 = LSD)."""
    digits = [(index >> (2 * q)) & 3 for q in range(n)]
    return kron(*[PAULIS[digits[q]] for q in reversed(range(n))])


@lru_cache(maxsize=8)
def all_paulis(n: int) -> np.ndarray:
    """Stacked array of all 4**n Pauli matrices, indexed as in pauli_matrix."""
    out = np.empty((4**n, 2**n, 2**n), dtype=complex)
    for idx in range(4**n):
        out[idx] = pauli_matrix(idx, n)
    return out


def ptm(channel_images: list[np.ndarray] | np.ndarray) -> np.ndarray:
    """Pauli transfer matrix from the channel's action on every Pauli.

    ``channel_images[j]`` must be the image of the j-th (unnormalized)
    Pauli.  Entries beyond 1e-10 imaginary indicate the map does not
    preserve Hermiticity and raise.
    """
    images = np.asarray(channel_images, dtype=complex)
    m = images.shape[0]
    n = num_qubits_of(images.shape[1])
    if m != 4**n:
        raise ValueError(f"need 4^n images, got {m} for {n} qubits")
    paulis = all_paulis(n)
    r = np.einsum("iab,jba->ij", paulis, images) / (2**n)
    if np.max(np.abs(r.imag)) > 1e-10:
        raise ValueError("PTM has imaginary entries: map is not Hermiticity-preserving")
    return r.real


def unitary_ptm(u: np.ndarray) -> np.ndarray:
    """PTM of the unitary channel rho -> U rho U^dagger."""
    u = np.asarray(u, dtype=complex)
    n = num_qubits_of(u.shape[0])
    paulis = all_paulis(n)
    images = np.einsum("ab,jbc,dc->jad", u, paulis, u.conj())
    return ptm(images)


def bell_state() -> np.ndarray:
    return np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)


def max_entangled(dim: int) -> np.ndarray:
    """|Omega> = sum_i |ii>/sqrt(dim), first factor most significant."""
    out = np.zeros(dim * dim, dtype=complex)
    out[np.arange(dim) * dim + np.arange(dim)] = 1.0 / np.sqrt(dim)
    return out


def state_prep_unitary(target: np.ndarray) -> np.ndarray:
    """Deterministic unitary whose first column is the (normalized) target."""
    v = np.asarray(target, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    d = v.size
    basis = np.concatenate([v.reshape(-1, 1), np.eye(d, dtype=complex)], axis=1)
    q, _ = np.linalg.qr(basis)
    # QR fixes the first column only up to phase
    phase = q[:, 0].conj() @ v
    q[:, 0] *= phase
    return q


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho)
