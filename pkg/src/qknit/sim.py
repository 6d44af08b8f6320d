"""Exact statevector simulation of two-party local protocols.

A protocol is a pair of per-party instruments (ordered step lists) plus
a classical message schedule.  The executor derives one static global
step order that respects each instrument's order and the availability
of classical bits, then either samples a single stochastic branch
(measurements drawn from Born probabilities) or enumerates every branch
exactly for channel verification.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .circuit import GateSpec, Setting
from .linalg import (
    all_paulis,
    kron,
    num_qubits_of,
    pauli_string_to_indices,
    state_prep_unitary,
)

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SH = np.diag([1, 1j]).astype(complex) @ _H  # maps Z eigenbasis to Y eigenbasis
_BASIS_CHANGE = {"Z": np.eye(2, dtype=complex), "X": _H, "Y": _SH}


class ProtocolError(ValueError):
    """Raised on malformed protocols or unsatisfiable message schedules."""


# ---------------------------------------------------------------------------
# steps


@dataclass(frozen=True)
class Unitary:
    qubits: tuple[int, ...]  # party-local slot indices
    matrix: np.ndarray


@dataclass(frozen=True)
class Measure:
    """Projective measurement in a Pauli eigenbasis, recording bit 0/1."""

    qubit: int
    basis: str
    bit: str


@dataclass(frozen=True)
class Controlled:
    """Apply the unitary iff the XOR of the named bits is 1."""

    qubits: tuple[int, ...]
    matrix: np.ndarray
    key: tuple[str, ...]


@dataclass(frozen=True)
class SignWeight:
    """weight *= scale * (-1)^(XOR of named bits)."""

    bits: tuple[str, ...]
    scale: float = 1.0


@dataclass(frozen=True)
class Postselect:
    """Keep the shot only if the named bit has the wanted value; surviving
    branches are scaled to keep the estimator unbiased."""

    bit: str
    value: int
    scale: float = 2.0


@dataclass(frozen=True)
class Prepare:
    """Unitary completion sending |0..0> on the slots to the target state."""

    qubits: tuple[int, ...]
    state: np.ndarray


@dataclass(frozen=True)
class PhasedPrepare:
    """Prepare sum_k sqrt(coeffs[k]) e^(+/- i phi_k) basis[:, k] using the
    protocol's shared random phases (sign -1 on party B conjugates them)."""

    qubits: tuple[int, ...]
    coeffs: np.ndarray
    basis: np.ndarray
    phase_sign: int


Step = Unitary | Measure | Controlled | SignWeight | Postselect | Prepare | PhasedPrepare


def _required_bits(step: Step) -> tuple[str, ...]:
    if isinstance(step, Controlled):
        return step.key
    if isinstance(step, SignWeight):
        return step.bits
    if isinstance(step, Postselect):
        return (step.bit,)
    return ()


def _touched_qubits(step: Step) -> tuple[int, ...]:
    if isinstance(step, (Unitary, Controlled, Prepare, PhasedPrepare)):
        return step.qubits
    if isinstance(step, Measure):
        return (step.qubit,)
    return ()


@dataclass(frozen=True)
class LocalInstrument:
    """Ordered steps of one party; slot indices are local to that party."""

    party: str
    steps: tuple[Step, ...]

    def __post_init__(self):
        if self.party not in ("A", "B"):
            raise ProtocolError("party must be 'A' or 'B'")


@dataclass(frozen=True)
class TwoPartyProtocol:
    """Local instruments plus classical messages under a declared setting.

    Each party's register is io slots (the channel's external legs)
    followed by ancilla slots; ancillas start in |0> unless the protocol
    declares a joint ``resource_init`` over (A ancillas, B ancillas) with
    the A block most significant.
    """

    instr_a: LocalInstrument
    instr_b: LocalInstrument
    messages: tuple[tuple[str, tuple[str, ...]], ...] = ()
    setting: Setting = Setting.LO
    n_io_a: int = 1
    n_io_b: int = 1
    n_anc_a: int = 0
    n_anc_b: int = 0
    shared_phase_count: int = 0
    resource_init: np.ndarray | None = None

    def __post_init__(self):
        if self.setting is Setting.LO and self.messages:
            raise ProtocolError("LO protocols cannot carry classical messages")
        if self.setting is Setting.LO_ONEWAY_CC and any(f != "A" for f, _ in self.messages):
            raise ProtocolError("one-way protocols only send messages from A to B")
        for instr, n in ((self.instr_a, self.n_io_a + self.n_anc_a),
                         (self.instr_b, self.n_io_b + self.n_anc_b)):
            for step in instr.steps:
                if any(not 0 <= q < n for q in _touched_qubits(step)):
                    raise ProtocolError(
                        f"step on party {instr.party} touches slot outside its register"
                    )
        if self.resource_init is not None:
            expected = 2 ** (self.n_anc_a + self.n_anc_b)
            if np.asarray(self.resource_init).size != expected:
                raise ProtocolError("resource_init size does not match ancilla register")

    def schedule(self) -> list[tuple[str, Step]]:
        """Static global step order respecting instrument order and the
        message schedule; raises on unsatisfiable bit references."""
        avail = {"A": set(), "B": set()}
        pos = {"A": 0, "B": 0}
        steps = {"A": self.instr_a.steps, "B": self.instr_b.steps}
        im = 0
        out: list[tuple[str, Step]] = []
        while pos["A"] < len(steps["A"]) or pos["B"] < len(steps["B"]) or im < len(self.messages):
            progress = False
            while im < len(self.messages):
                sender, names = self.messages[im]
                if set(names) <= avail[sender]:
                    receiver = "B" if sender == "A" else "A"
                    avail[receiver].update(names)
                    im += 1
                    progress = True
                else:
                    break
            for party in ("A", "B"):
                if pos[party] < len(steps[party]):
                    step = steps[party][pos[party]]
                    if set(_required_bits(step)) <= avail[party]:
                        out.append((party, step))
                        if isinstance(step, Measure):
                            avail[party].add(step.bit)
                        pos[party] += 1
                        progress = True
                        break
            if not progress:
                raise ProtocolError("protocol deadlock: step or message references an unrecorded bit")
        return out


# ---------------------------------------------------------------------------
# state


@dataclass
class SimState:
    """Pure-state branch: amplitudes, recorded classical bits, signed weight."""

    amplitudes: np.ndarray
    bits: dict = field(default_factory=dict)
    weight: float = 1.0

    @property
    def num_qubits(self) -> int:
        return num_qubits_of(self.amplitudes.size)

    @staticmethod
    def zeros(n: int) -> "SimState":
        amps = np.zeros(2**n, dtype=complex)
        amps[0] = 1.0
        return SimState(amplitudes=amps)

    def copy(self) -> "SimState":
        return SimState(self.amplitudes.copy(), dict(self.bits), self.weight)


def apply_unitary(amps: np.ndarray, u: np.ndarray, qubits: list[int] | tuple[int, ...]) -> np.ndarray:
    """Apply a k-qubit unitary; qubits[0] is the least significant local index."""
    n = num_qubits_of(amps.size)
    k = len(qubits)
    t = amps.reshape([2] * n)
    u_t = u.reshape([2] * (2 * k))
    col_axes = [k + (k - 1 - i) for i in range(k)]
    state_axes = [n - 1 - q for q in qubits]
    t = np.tensordot(u_t, t, axes=(col_axes, state_axes))
    dest = [n - 1 - qubits[k - 1 - j] for j in range(k)]
    return np.moveaxis(t, list(range(k)), dest).reshape(-1)


def apply_gate(state: SimState, gate: GateSpec) -> SimState:
    """Unitary gate application on a simulator state (norm preserved)."""
    state.amplitudes = apply_unitary(state.amplitudes, gate.matrix(), gate.qubits)
    return state


def expectation(state: SimState, observable: str) -> float:
    """weight * <psi|O|psi> for a Pauli-string observable (char i = qubit i)."""
    amps = state.amplitudes
    if len(observable) != state.num_qubits:
        raise ValueError("observable length must match qubit count")
    out = amps
    for q, idx in enumerate(pauli_string_to_indices(observable)):
        if idx:
            out = apply_unitary(out, all_paulis(1)[idx], [q])
    return float(state.weight * np.real(np.vdot(amps, out)))


def _measure_probability(amps: np.ndarray, qubit: int) -> float:
    n = num_qubits_of(amps.size)
    t = np.abs(amps.reshape([2] * n)) ** 2
    axis = n - 1 - qubit
    p1 = t.take(1, axis=axis).sum()
    total = t.sum()
    return float(p1 / total)


def _project(amps: np.ndarray, qubit: int, value: int) -> np.ndarray:
    n = num_qubits_of(amps.size)
    t = amps.reshape([2] * n).copy()
    idx = [slice(None)] * n
    idx[n - 1 - qubit] = 1 - value
    t[tuple(idx)] = 0.0
    return t.reshape(-1)


def _slot_map(protocol: TwoPartyProtocol, qubits_a, qubits_b):
    if len(qubits_a) != protocol.n_io_a + protocol.n_anc_a:
        raise ProtocolError("party A qubit list does not match protocol register")
    if len(qubits_b) != protocol.n_io_b + protocol.n_anc_b:
        raise ProtocolError("party B qubit list does not match protocol register")
    return {"A": list(qubits_a), "B": list(qubits_b)}


def _init_resource(state: SimState, protocol: TwoPartyProtocol, slots) -> None:
    if protocol.resource_init is None:
        return
    anc = slots["A"][protocol.n_io_a :] + slots["B"][protocol.n_io_b :]
    # resource_init lists the A ancilla block most significant
    state.amplitudes = apply_unitary(
        state.amplitudes, state_prep_unitary(protocol.resource_init), list(reversed(anc))
    )


def _run_step(
    state: SimState,
    party: str,
    step: Step,
    slots,
    rng: np.random.Generator | None,
    phases: np.ndarray | None,
    forced_outcomes: dict | None = None,
) -> None:
    q = [slots[party][i] for i in _touched_qubits(step)]
    if isinstance(step, Unitary):
        state.amplitudes = apply_unitary(state.amplitudes, step.matrix, q)
    elif isinstance(step, Prepare):
        state.amplitudes = apply_unitary(state.amplitudes, state_prep_unitary(step.state), q)
    elif isinstance(step, PhasedPrepare):
        if phases is None:
            raise ProtocolError("phased preparation without shared phases")
        amps = np.sqrt(step.coeffs) * np.exp(1j * step.phase_sign * phases[: len(step.coeffs)])
        target = step.basis @ amps
        state.amplitudes = apply_unitary(state.amplitudes, state_prep_unitary(target), q)
    elif isinstance(step, Measure):
        v = _BASIS_CHANGE[step.basis]
        state.amplitudes = apply_unitary(state.amplitudes, v.conj().T, q)
        if forced_outcomes is not None:
            outcome = forced_outcomes[step.bit]
            state.amplitudes = _project(state.amplitudes, q[0], outcome)
        else:
            p1 = _measure_probability(state.amplitudes, q[0])
            outcome = int(rng.random() < p1)
            state.amplitudes = _project(state.amplitudes, q[0], outcome)
            norm = np.linalg.norm(state.amplitudes)
            state.amplitudes = state.amplitudes / norm
        state.amplitudes = apply_unitary(state.amplitudes, v, q)
        state.bits[step.bit] = outcome
    elif isinstance(step, Controlled):
        parity = 0
        for name in step.key:
            parity ^= state.bits[name]
        if parity:
            state.amplitudes = apply_unitary(state.amplitudes, step.matrix, q)
    elif isinstance(step, SignWeight):
        parity = 0
        for name in step.bits:
            parity ^= state.bits[name]
        state.weight *= step.scale * (-1 if parity else 1)
    elif isinstance(step, Postselect):
        if state.bits[step.bit] != step.value:
            state.weight = 0.0
        else:
            state.weight *= step.scale
    else:
        raise ProtocolError(f"unknown step type {type(step).__name__}")


def execute_protocol(
    state: SimState,
    protocol: TwoPartyProtocol,
    qubits_a: list[int],
    qubits_b: list[int],
    rng: np.random.Generator,
) -> SimState:
    """Run one stochastic branch of the protocol on global qubits.

    Measurement outcomes are drawn from Born probabilities; the state's
    signed weight accumulates sign rules, postselection scales and zeros.
    """
    slots = _slot_map(protocol, qubits_a, qubits_b)
    _init_resource(state, protocol, slots)
    phases = None
    if protocol.shared_phase_count:
        phases = rng.uniform(0.0, 2 * np.pi, protocol.shared_phase_count)
    for party, step in protocol.schedule():
        _run_step(state, party, step, slots, rng, phases)
        if state.weight == 0.0:
            break
    return state


_ENUM_PHASES = (0.0, np.pi / 2, np.pi, 3 * np.pi / 2)


def enumerate_branches(
    state: SimState, protocol: TwoPartyProtocol, qubits_a: list[int], qubits_b: list[int]
):
    """Yield (weight, amplitudes) over all measurement branches and (for
    protocols with shared phases) the exact four-point phase ensemble.

    Branch amplitudes are unnormalized: their squared norm carries the
    Born probability, so expected channels are plain weighted sums.
    """
    slots = _slot_map(protocol, qubits_a, qubits_b)
    schedule = protocol.schedule()
    mbits = [s.bit for _, s in schedule if isinstance(s, Measure)]
    base = state.copy()
    _init_resource(base, protocol, slots)
    r = protocol.shared_phase_count
    phase_grid = itertools.product(_ENUM_PHASES, repeat=r) if r else [()]
    for phase_tuple in phase_grid:
        phases = np.array(phase_tuple) if r else None
        for outcome_bits in itertools.product((0, 1), repeat=len(mbits)):
            branch = base.copy()
            branch.weight /= 4**r
            forced = dict(zip(mbits, outcome_bits))
            for party, step in schedule:
                _run_step(branch, party, step, slots, None, phases, forced_outcomes=forced)
                if branch.weight == 0.0:
                    break
            if branch.weight != 0.0:
                yield branch.weight, branch.amplitudes


def protocol_choi(protocol: TwoPartyProtocol) -> np.ndarray:
    """Exact Choi matrix of the protocol's expected channel on its io legs.

    Io qubits are ordered (A io slots, then B io slots) from least
    significant; the Choi state is over (io, mirror) with io most
    significant, normalized so the identity channel gives a rank-one
    projector of trace 1.
    """
    n_io = protocol.n_io_a + protocol.n_io_b
    n_anc = protocol.n_anc_a + protocol.n_anc_b
    m = n_io + n_anc
    total = m + n_io
    # global layout: A io, A anc, B io, B anc, mirror block
    qubits_a = list(range(protocol.n_io_a)) + [n_io + i for i in range(protocol.n_anc_a)]
    qubits_b = [protocol.n_io_a + i for i in range(protocol.n_io_b)] + [
        n_io + protocol.n_anc_a + i for i in range(protocol.n_anc_b)
    ]
    init = SimState.zeros(total)
    cnot = GateSpec("CNOT", (0, 1)).matrix()
    # maximally entangled pairs between io qubit q and mirror qubit m + q
    for q in range(n_io):
        init.amplitudes = apply_unitary(init.amplitudes, _H, [m + q])
        init.amplitudes = apply_unitary(init.amplitudes, cnot, [m + q, q])
    dim_io = 2**n_io
    dim_anc = 2**n_anc
    choi = np.zeros((dim_io * dim_io, dim_io * dim_io), dtype=complex)
    for weight, amps in enumerate_branches(init, protocol, qubits_a, qubits_b):
        # regroup axes to (anc, io, mirror), each block qubit-0-last so the
        # flattened (io, mirror) index matches the Choi row convention
        t = amps.reshape([2] * total)
        order = (
            [total - 1 - q for q in range(n_io, m)]  # ancillas (traced out)
            + [total - 1 - q for q in reversed(range(n_io))]  # io, MSB first
            + [total - 1 - q for q in reversed(range(m, total))]  # mirror
        )
        v = t.transpose(order).reshape(dim_anc, dim_io * dim_io)
        choi += weight * (v.T @ v.conj())
    return choi


def choi_of_unitary(u: np.ndarray) -> np.ndarray:
    """Choi matrix of a unitary channel, normalized to trace 1."""
    u = np.asarray(u, dtype=complex)
    d = u.shape[0]
    omega = np.zeros(d * d, dtype=complex)
    omega[np.arange(d) * d + np.arange(d)] = 1.0 / np.sqrt(d)
    v = (np.kron(u, np.eye(d)) @ omega).reshape(d, d)
    vec = v.reshape(-1)
    return np.outer(vec, vec.conj())


def choi_to_ptm(choi: np.ndarray) -> np.ndarray:
    """Convert a trace-1-normalized Choi matrix to the PTM."""
    d2 = choi.shape[0]
    d = int(np.sqrt(d2))
    n = num_qubits_of(d)
    paulis = all_paulis(n)
    c = choi.reshape(d, d, d, d)  # (out, mirror, out', mirror')
    # R[a,b] = tr[(P_a (x) P_b^T) choi]
    r = np.einsum("aij,bkl,jkil->ab", paulis, paulis, c)
    if np.max(np.abs(r.imag)) > 1e-9:
        raise ValueError("channel is not Hermiticity-preserving")
    return r.real


def protocol_ptm(protocol: TwoPartyProtocol) -> np.ndarray:
    """Exact PTM of the protocol's expected channel via branch enumeration.

    Capped at three qubits per party to bound the enumeration size.
    """
    if protocol.n_io_a + protocol.n_anc_a > 3 or protocol.n_io_b + protocol.n_anc_b > 3:
        raise ProtocolError("protocol_ptm caps at 3 qubits per party")
    return choi_to_ptm(protocol_choi(protocol))
