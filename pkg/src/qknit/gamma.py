"""Closed-form sampling-overhead factors for nonlocal gates and states.

The central quantity is the gamma factor: the smallest one-norm of
quasiprobability coefficients over local operations, whose square is the
Monte Carlo shot overhead.  For two-qubit gates with canonical angles
(tx, ty, 0) or (pi/4, pi/4, pi/4) the lower bound from the gate's Choi
state meets the local-decomposition upper bound, giving an exact value;
everything else gets the bound pair only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kak as _kak
from .linalg import num_qubits_of, schmidt_decompose
from .pauli import NotCliffordError, is_clifford


class GammaError(ValueError):
    """Raised when an exact gamma value is requested outside its domain."""


def gamma_exact(params: _kak.KakParams) -> float:
    """Exact gamma factor for the two solvable canonical classes.

    Equal for LO, one-way CC and LOCC; raises GammaError for the general
    class, where only bounds are known.
    """
    cls = _kak.classify(params)
    if cls is _kak.KakClass.SWAP_CLASS:
        return 7.0
    if cls is not _kak.KakClass.THETA_Z_ZERO:
        raise GammaError("exact gamma factor is only known for theta_z = 0 or the SWAP class")
    sx, cx = np.sin(params.theta_x), np.cos(params.theta_x)
    sy, cy = np.sin(params.theta_y), np.cos(params.theta_y)
    return float(1 + 4 * abs(sx * cx) + 4 * abs(sy * cy) + 8 * abs(sx * cx * sy * cy))


def gamma_lo_upper(u: _kak.UCoefficients) -> float:
    """Local-decomposition upper bound from the Pauli-product coefficients."""
    c = u.as_array()
    total = 0.0
    for i in range(4):
        for j in range(4):
            if i != j:
                p = c[i] * np.conj(c[j])
                total += abs(p + np.conj(p)) + abs(p - np.conj(p))
    return float(1 + total)


def choi_state(u: np.ndarray, dim_a: int, dim_b: int) -> np.ndarray:
    """Choi state of U: act with U on halves of two maximally entangled pairs.

    U is indexed with the A factor most significant; the returned vector
    is ordered (A, A', B, B') with A slowest, so the AA':BB' split is the
    contiguous reshape (dim_a^2, dim_b^2).
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (dim_a * dim_b, dim_a * dim_b):
        raise ValueError("unitary dimension does not match declared split")
    psi = np.zeros((dim_a, dim_a, dim_b, dim_b), dtype=complex)
    for a in range(dim_a):
        for b in range(dim_b):
            psi[a, a, b, b] = 1.0
    psi /= np.sqrt(dim_a * dim_b)
    u4 = u.reshape(dim_a, dim_b, dim_a, dim_b)
    out = np.einsum("abcd,cxdy->axby", u4, psi)
    return out.reshape(-1)


def choi_schmidt_coefficients(u: np.ndarray, dim_a: int, dim_b: int) -> np.ndarray:
    phi = choi_state(u, dim_a, dim_b)
    return schmidt_decompose(phi, dim_a**2, dim_b**2).coefficients


def choi_schmidt_lower(u: np.ndarray, dim_a: int = 2, dim_b: int = 2) -> float:
    """Lower bound 2 (sum_i alpha_i)^2 - 1 from the Choi state's Schmidt form."""
    alphas = choi_schmidt_coefficients(u, dim_a, dim_b)
    return float(2 * np.sum(alphas) ** 2 - 1)


def robustness(psi: np.ndarray, dim_a: int, dim_b: int) -> float:
    """Entanglement robustness of a pure state: (sum_i alpha_i)^2 - 1."""
    alphas = schmidt_decompose(psi, dim_a, dim_b).coefficients
    return float(np.sum(alphas) ** 2 - 1)


def gamma_pure_state(psi: np.ndarray, dim_a: int, dim_b: int) -> float:
    """Optimal preparation overhead 1 + 2E for a bipartite pure state."""
    return 1 + 2 * robustness(psi, dim_a, dim_b)


def effective_gamma_k(u: np.ndarray, k: int, dim_a: int = 2, dim_b: int = 2) -> float:
    """Per-gate overhead of a size-k entanglement factory for a Clifford gate.

    Evaluates (2 (sum alpha)^{2k} - 1)^{1/k} with alpha the Choi-state
    Schmidt coefficients; rejects non-Clifford input since the batched
    teleportation protocol needs Pauli corrections.
    """
    if k < 1:
        raise ValueError("factory size k must be >= 1")
    if not is_clifford(np.asarray(u, dtype=complex)):
        raise NotCliffordError("effective factory gamma requires a Clifford unitary")
    s = float(np.sum(choi_schmidt_coefficients(u, dim_a, dim_b)))
    return float((2 * s ** (2 * k) - 1) ** (1.0 / k))


def crx_bounds(theta: float) -> tuple[float, float]:
    """(lower, upper) envelope for the asymptotic per-gate overhead of a
    controlled rotation; upper is capped at 2 by the Bell-pair protocol."""
    s = abs(np.sin(theta / 2))
    return (1 + s, min(1 + 2 * s, 2.0))


@dataclass(frozen=True)
class GammaReport:
    """Bound pair plus the exact value where the bounds provably meet."""

    gamma_lo_upper: float
    gamma_locc_lower: float
    gamma_exact: float | None
    kak_class: str
    angles: tuple[float, float, float]

    @property
    def overhead_squared(self) -> float:
        base = self.gamma_exact if self.gamma_exact is not None else self.gamma_lo_upper
        return base**2

    def to_dict(self) -> dict:
        return {
            "gammaLOUpper": self.gamma_lo_upper,
            "gammaLOCCLower": self.gamma_locc_lower,
            "gammaExact": self.gamma_exact,
            "kakClass": self.kak_class,
            "canonicalAngles": list(self.angles),
            "overheadSquared": self.overhead_squared,
        }


def gamma_report(u: np.ndarray) -> GammaReport:
    """Full bound/exact report for a two-qubit unitary (A = qubit 1)."""
    u = np.asarray(u, dtype=complex)
    if num_qubits_of(u.shape[0]) != 2:
        raise ValueError("gamma reports cover two-qubit unitaries")
    params = _kak.kak(u)
    cls = _kak.classify(params)
    upper = gamma_lo_upper(_kak.u_coefficients(params))
    lower = choi_schmidt_lower(u, 2, 2)
    exact = None
    if cls is not _kak.KakClass.GENERAL:
        exact = gamma_exact(params)
    return GammaReport(
        gamma_lo_upper=float(upper),
        gamma_locc_lower=float(lower),
        gamma_exact=exact,
        kak_class=cls.value,
        angles=params.angles,
    )
