"""Gate teleportation protocols and entanglement-factory decompositions.

A Clifford gate applied across the partition is realized by Bell-
measuring the workload qubits against a preexisting resource state
(the gate's Choi state, or a bare Bell pair for the CNOT) and applying
outcome-keyed local Pauli corrections.  Batching k resource states into
one jointly-prepared register lowers the per-gate overhead from
2(sum a)^2 - 1 to (2(sum a)^{2k} - 1)^{1/k}.
"""

from __future__ import annotations

import numpy as np

from .circuit import GateSpec, Setting
from .gamma import choi_state
from .linalg import X, Z, bell_state, kron
from .pauli import CliffordTableau, clifford_tableau, pauli_string_from_index
from .qpd import Qpd, QpdError, QpdTerm, vidal_state_qpd
from .sim import (
    Controlled,
    LocalInstrument,
    Measure,
    Postselect,
    TwoPartyProtocol,
    Unitary,
)

_CNOT = GateSpec("CNOT", (0, 1)).matrix()
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_PAULI_1Q = {"X": X, "Z": Z, "Y": 1j * X @ Z}


def bell_teleport_cnot(setting: Setting = Setting.LOCC) -> TwoPartyProtocol:
    """CNOT from one shared Bell pair, two measured bits and two Pauli
    corrections (control on party A, target on party B).

    Under the one-way setting the X-basis measurement on B is
    postselected on outcome 0 (branch weight doubled) so no message ever
    travels from B to A.
    """
    steps_a: list = [
        Unitary((0, 1), _CNOT),  # workload controls the resource half
        Measure(1, "Z", "flip"),
    ]
    steps_b: list = [
        Unitary((1, 0), _CNOT),  # resource half controls the workload
        Measure(1, "X", "phase"),
        Controlled((0,), X, ("flip",)),
    ]
    messages: list = [("A", ("flip",))]
    if setting is Setting.LOCC:
        steps_a.append(Controlled((0,), Z, ("phase",)))
        messages.append(("B", ("phase",)))
    elif setting is Setting.LO_ONEWAY_CC:
        steps_b.append(Postselect("phase", 0, scale=2.0))
    else:
        raise QpdError("CNOT teleportation needs classical communication")
    return TwoPartyProtocol(
        instr_a=LocalInstrument("A", tuple(steps_a)),
        instr_b=LocalInstrument("B", tuple(steps_b)),
        messages=tuple(messages),
        setting=setting,
        n_io_a=1, n_io_b=1, n_anc_a=1, n_anc_b=1,
    )


def _bell_measurement(workload_slot: int, resource_slot: int, phase_bit: str, flip_bit: str):
    """CNOT, H on the workload, then two computational measurements."""
    return (
        Unitary((workload_slot, resource_slot), _CNOT),
        Unitary((workload_slot,), _H),
        Measure(workload_slot, "Z", phase_bit),
        Measure(resource_slot, "Z", flip_bit),
    )


def _correction_steps(tableau: CliffordTableau):
    """Per-bit conditional Pauli halves on the gate-output resource legs.

    Bit 'flip' on a leg means the teleported state picked up X before the
    gate, 'phase' means Z; the needed correction is the gate's conjugate
    of that Pauli, split into its A-leg and B-leg letters.
    """
    corrections_a, corrections_b = [], []
    for bit, pauli_index in (
        ("flip_a", 1), ("phase_a", 3),  # X_a, Z_a
        ("flip_b", 1 << 2), ("phase_b", 3 << 2),  # X_b, Z_b
    ):
        _, image = tableau.conjugate_index(pauli_index)
        letters = pauli_string_from_index(image, 2)
        if letters[0] != "I":
            corrections_a.append(Controlled((1,), _PAULI_1Q[letters[0]], (bit,)))
        if letters[1] != "I":
            corrections_b.append(Controlled((1,), _PAULI_1Q[letters[1]], (bit,)))
    return corrections_a, corrections_b


def teleport_protocol(u: np.ndarray, include_resource: bool = True) -> TwoPartyProtocol:
    """Generic Clifford gate teleportation consuming the gate's Choi state.

    Party registers: slot 0 = workload leg, slot 1 = gate-output resource
    leg, slot 2 = entangled ancilla that gets Bell-measured against the
    workload.  All four measurement bits travel both ways; every branch
    realizes the gate exactly.  Raises on non-Clifford input, whose
    correction operator would not be local.
    """
    u = np.asarray(u, dtype=complex)
    tableau = clifford_tableau(u)  # NotCliffordError propagates
    corrections_a, corrections_b = _correction_steps(tableau)
    steps_a = list(_bell_measurement(0, 2, "phase_a", "flip_a")) + corrections_a
    steps_b = list(_bell_measurement(0, 2, "phase_b", "flip_b")) + corrections_b
    messages = (("A", ("flip_a", "phase_a")), ("B", ("flip_b", "phase_b")))
    resource = None
    if include_resource:
        swap = GateSpec("SWAP", (0, 1)).matrix()
        resource = choi_state(swap @ u @ swap, 2, 2)  # reorder to A-significant
    return TwoPartyProtocol(
        instr_a=LocalInstrument("A", tuple(steps_a)),
        instr_b=LocalInstrument("B", tuple(steps_b)),
        messages=messages,
        setting=Setting.LOCC,
        n_io_a=1, n_io_b=1, n_anc_a=2, n_anc_b=2,
        resource_init=resource,
    )


def _is_cnot(u: np.ndarray) -> bool:
    phases = u[np.abs(_CNOT) > 0.5]
    if np.any(np.abs(np.abs(phases) - 1) > 1e-10):
        return False
    return np.max(np.abs(u - phases[0] * _CNOT)) < 1e-10


def _composite_resource(single: np.ndarray, dim_a: int, dim_b: int, k: int) -> np.ndarray:
    """k-fold tensor power grouped as (all A factors, all B factors); gate
    slot g occupies digit g of each party's index, slot 0 least significant."""
    psi = single.reshape(dim_a, dim_b)
    out = psi
    for _ in range(k - 1):
        out = np.einsum("ab,cd->acbd", psi, out).reshape(dim_a * out.shape[0], out.shape[1] * dim_b)
    return out.reshape(-1)


def factory_qpd(u: np.ndarray, k: int, setting: Setting = Setting.LOCC) -> Qpd:
    """QPD for k parallel instances of a Clifford gate via joint resource
    preparation and per-slot teleportation.

    kappa = 2 (sum_i alpha_i)^{2k} - 1 over the Choi-state Schmidt
    coefficients; for the CNOT the resource is k bare Bell pairs (one
    qubit per party per slot), otherwise k full Choi states.
    """
    if k < 1:
        raise QpdError("factory size k must be >= 1")
    u = np.asarray(u, dtype=complex)
    if _is_cnot(u):
        single = bell_state()
        dim_a = dim_b = 2
        consume = tuple(bell_teleport_cnot(setting) for _ in range(k))
        name = f"CNOT^(x){k} factory"
    else:
        if setting is not Setting.LOCC:
            raise QpdError("one-way teleportation is only available for the CNOT shape")
        swap = GateSpec("SWAP", (0, 1)).matrix()
        phi = choi_state(swap @ u @ swap, 2, 2).reshape(2, 2, 2, 2)
        # within each party, put the gate-output leg (anc slot 0 of the
        # consume protocol) on the least significant bit
        single = phi.transpose(1, 0, 3, 2).reshape(-1)
        dim_a = dim_b = 4
        consume = tuple(teleport_protocol(u, include_resource=False) for _ in range(k))
        name = f"clifford^(x){k} factory"
    resource = _composite_resource(single, dim_a, dim_b, k)
    prep = vidal_state_qpd(resource, dim_a**k, dim_b**k, target_name=name, setting=setting)
    return Qpd(terms=prep.terms, target=name, setting=setting, consume=consume)


def oneway_variant(qpd: Qpd) -> Qpd:
    """Convert a LOCC CNOT-teleportation QPD to one-way classical
    communication by postselecting B's phase measurement on outcome 0.

    Each gate slot costs a branch-weight factor of two; the asymptotic
    per-gate overhead of the family is 2 * (sum alpha)^4 = 8 for CNOT.
    """
    if not qpd.consume:
        raise QpdError("only teleportation QPDs have a one-way variant")
    consume = []
    for c in qpd.consume:
        if c.n_anc_a != 1 or c.n_anc_b != 1:
            raise QpdError("one-way conversion needs the single-Bell-pair CNOT shape")
        consume.append(bell_teleport_cnot(Setting.LO_ONEWAY_CC))
    return Qpd(
        terms=qpd.terms,  # resource preparations are LO and carry over
        target=qpd.target + " (one-way)",
        setting=Setting.LO_ONEWAY_CC,
        consume=tuple(consume),
    )
