"""Executable quasiprobability decompositions.

A QPD writes a target channel (or state preparation) as a signed
combination of two-party local protocols; sampling one term per shot
with probability |a_i|/kappa and weighting by kappa*sign(a_i) gives an
unbiased estimator with shot overhead kappa^2.

Gate decompositions come from an l1-minimizing linear program over a
finite atom set of local instruments; optimality is certified per gate
family when the LP value meets the Choi-state lower bound.  State
preparations use the explicit robustness-optimal decomposition: the
negative part is a mixture of Schmidt-basis product states, the positive
part an ensemble of shared-random-phase product states whose phase
average reproduces the required separable state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .circuit import Setting
from .linalg import all_paulis, ptm, schmidt_decompose
from .sim import (
    Controlled,
    LocalInstrument,
    Measure,
    PhasedPrepare,
    Postselect,
    Prepare,
    SignWeight,
    Step,
    TwoPartyProtocol,
    Unitary,
    protocol_choi,
)

_SETTING_RANK = {Setting.LO: 0, Setting.LO_ONEWAY_CC: 1, Setting.LOCC: 2}


def setting_leq(a: Setting, b: Setting) -> bool:
    return _SETTING_RANK[a] <= _SETTING_RANK[b]


class QpdError(ValueError):
    """Raised on invalid or infeasible decomposition requests."""


@dataclass(frozen=True)
class QpdTerm:
    """Signed coefficient plus the local protocol realizing this branch."""

    coefficient: float
    protocol: TwoPartyProtocol


@dataclass(frozen=True)
class Qpd:
    """Signed mixture of local protocols realizing a nonlocal target.

    For factory decompositions the terms prepare the shared resource
    register and ``consume`` holds the per-gate-slot teleportation
    protocols, identical across terms; plain QPDs leave it empty.
    """

    terms: tuple[QpdTerm, ...]
    target: str
    setting: Setting
    consume: tuple[TwoPartyProtocol, ...] = ()

    def __post_init__(self):
        for t in self.terms:
            if not setting_leq(t.protocol.setting, self.setting):
                raise QpdError("term protocol exceeds the parent QPD's setting")
        for c in self.consume:
            if not setting_leq(c.setting, self.setting):
                raise QpdError("consume protocol exceeds the parent QPD's setting")

    @property
    def kappa(self) -> float:
        return float(sum(abs(t.coefficient) for t in self.terms))

    def probabilities(self) -> np.ndarray:
        a = np.array([abs(t.coefficient) for t in self.terms])
        return a / a.sum()

    def flattened_term(self, index: int) -> TwoPartyProtocol:
        return _flatten_term(self, self.terms[index])

    def expected_choi(self) -> np.ndarray:
        """sum_i a_i Choi(term_i), consume protocols included, by exhaustive
        branch enumeration (the defining-identity verification oracle)."""
        total = None
        for term in self.terms:
            c = term.coefficient * protocol_choi(_flatten_term(self, term))
            total = c if total is None else total + c
        return total

    def to_json(self) -> str:
        doc = {
            "target": self.target,
            "setting": self.setting.value,
            "kappa": self.kappa,
            "terms": [
                {
                    "coefficient": t.coefficient,
                    "partyA": [_step_to_json(s) for s in t.protocol.instr_a.steps],
                    "partyB": [_step_to_json(s) for s in t.protocol.instr_b.steps],
                    "messages": [[f, list(names)] for f, names in t.protocol.messages],
                    "sharedPhases": t.protocol.shared_phase_count,
                }
                for t in self.terms
            ],
            "consume": [
                {
                    "partyA": [_step_to_json(s) for s in c.instr_a.steps],
                    "partyB": [_step_to_json(s) for s in c.instr_b.steps],
                    "messages": [[f, list(names)] for f, names in c.messages],
                }
                for c in self.consume
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def _cnum(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _step_to_json(step: Step) -> dict:
    if isinstance(step, Unitary):
        return {"type": "unitary", "qubits": list(step.qubits),
                "matrix": [_cnum(z) for z in step.matrix.reshape(-1)]}
    if isinstance(step, Measure):
        return {"type": "measure", "qubit": step.qubit, "basis": step.basis, "bit": step.bit}
    if isinstance(step, Controlled):
        return {"type": "controlled", "qubits": list(step.qubits), "key": list(step.key),
                "matrix": [_cnum(z) for z in step.matrix.reshape(-1)]}
    if isinstance(step, SignWeight):
        return {"type": "signWeight", "bits": list(step.bits), "scale": step.scale}
    if isinstance(step, Postselect):
        return {"type": "postselect", "bit": step.bit, "value": step.value, "scale": step.scale}
    if isinstance(step, Prepare):
        return {"type": "prepare", "qubits": list(step.qubits),
                "state": [_cnum(z) for z in step.state.reshape(-1)]}
    if isinstance(step, PhasedPrepare):
        return {"type": "phasedPrepare", "qubits": list(step.qubits),
                "coeffs": [float(c) for c in step.coeffs],
                "basis": [_cnum(z) for z in step.basis.reshape(-1)],
                "phaseSign": step.phase_sign}
    raise QpdError(f"unserializable step {type(step).__name__}")


def _remap(step: Step, qubit_map: list[int], suffix: str = "") -> Step:
    def mq(qs):
        return tuple(qubit_map[q] for q in qs)

    if isinstance(step, Unitary):
        return Unitary(mq(step.qubits), step.matrix)
    if isinstance(step, Measure):
        return Measure(qubit_map[step.qubit], step.basis, step.bit + suffix)
    if isinstance(step, Controlled):
        return Controlled(mq(step.qubits), step.matrix, tuple(k + suffix for k in step.key))
    if isinstance(step, SignWeight):
        return SignWeight(tuple(b + suffix for b in step.bits), step.scale)
    if isinstance(step, Postselect):
        return Postselect(step.bit + suffix, step.value, step.scale)
    if isinstance(step, Prepare):
        return Prepare(mq(step.qubits), step.state)
    if isinstance(step, PhasedPrepare):
        return PhasedPrepare(mq(step.qubits), step.coeffs, step.basis, step.phase_sign)
    raise QpdError(f"cannot remap step {type(step).__name__}")


def _flatten_term(qpd: Qpd, term: QpdTerm) -> TwoPartyProtocol:
    """Single protocol equivalent to the term's resource preparation
    followed by every consume protocol on its gate slot.

    Layout per party: k gate-leg blocks first (io), then the resource
    register (ancillas) in slot order.
    """
    if not qpd.consume:
        return term.protocol
    prep = term.protocol
    k = len(qpd.consume)
    c0 = qpd.consume[0]
    io_a, io_b = c0.n_io_a, c0.n_io_b
    anc_a, anc_b = c0.n_anc_a, c0.n_anc_b
    prep_size_a = prep.n_io_a + prep.n_anc_a
    prep_size_b = prep.n_io_b + prep.n_anc_b
    if prep_size_a != k * anc_a or prep_size_b != k * anc_b:
        raise QpdError("preparation register does not match the consume protocols")
    map_prep_a = [k * io_a + i for i in range(prep_size_a)]
    map_prep_b = [k * io_b + i for i in range(prep_size_b)]
    steps_a = [_remap(s, map_prep_a) for s in prep.instr_a.steps]
    steps_b = [_remap(s, map_prep_b) for s in prep.instr_b.steps]
    messages = list(prep.messages)
    for g, cons in enumerate(qpd.consume):
        map_a = [g * io_a + i for i in range(io_a)] + [k * io_a + g * anc_a + i for i in range(anc_a)]
        map_b = [g * io_b + i for i in range(io_b)] + [k * io_b + g * anc_b + i for i in range(anc_b)]
        steps_a += [_remap(s, map_a, suffix=f"@{g}") for s in cons.instr_a.steps]
        steps_b += [_remap(s, map_b, suffix=f"@{g}") for s in cons.instr_b.steps]
        messages += [(f, tuple(n + f"@{g}" for n in names)) for f, names in cons.messages]
    return TwoPartyProtocol(
        instr_a=LocalInstrument("A", tuple(steps_a)),
        instr_b=LocalInstrument("B", tuple(steps_b)),
        messages=tuple(messages),
        setting=qpd.setting,
        n_io_a=k * io_a,
        n_io_b=k * io_b,
        n_anc_a=k * anc_a,
        n_anc_b=k * anc_b,
        shared_phase_count=prep.shared_phase_count,
    )


# ---------------------------------------------------------------------------
# atom set

_PAULI_1Q = all_paulis(1)


def _projector(basis: str, outcome: int) -> np.ndarray:
    sign = 1 if outcome == 0 else -1
    return 0.5 * (np.eye(2) + sign * _PAULI_1Q["IXYZ".index(basis)])


@dataclass(frozen=True)
class Atom:
    """One per-party instrument with its exact expected superoperator."""

    label: str
    steps: tuple[Step, ...]
    ptm: np.ndarray


def _instrument_branches(steps: tuple[Step, ...]):
    """(weight, kraus) pairs of a single-qubit instrument; the weight is
    the sign rule applied to the branch's recorded bits."""
    branches = [(1.0, np.eye(2, dtype=complex), {})]
    for step in steps:
        new = []
        for w, kraus, bits in branches:
            if isinstance(step, Unitary):
                new.append((w, step.matrix @ kraus, bits))
            elif isinstance(step, Measure):
                for outcome in (0, 1):
                    new.append((w, _projector(step.basis, outcome) @ kraus,
                                {**bits, step.bit: outcome}))
            elif isinstance(step, SignWeight):
                for wb, kb, bb in [(w, kraus, bits)]:
                    parity = 0
                    for name in step.bits:
                        parity ^= bb[name]
                    new.append((wb * step.scale * (-1 if parity else 1), kb, bb))
            else:
                raise QpdError(f"atoms cannot contain {type(step).__name__} steps")
        branches = new
    return [(w, k) for w, k, _ in branches]


def _instrument_ptm_1q(steps: tuple[Step, ...]) -> np.ndarray:
    branches = _instrument_branches(steps)
    images = []
    for p in _PAULI_1Q:
        images.append(sum(w * (k @ p @ k.conj().T) for w, k in branches))
    return ptm(images)


def atom_kraus_weight_sum(atom: Atom) -> np.ndarray:
    """sum_b |w_b| K_b^dag K_b; <= identity certifies the instrument's
    positive and negative parts sum to a trace-nonincreasing CP map."""
    return sum(abs(w) * (k.conj().T @ k) for w, k in _instrument_branches(atom.steps))


@dataclass(frozen=True)
class AtomSet:
    """Tensor pairs of per-party instruments with cached product PTMs."""

    party_atoms: tuple[Atom, ...]
    pairs: tuple[tuple[int, int], ...]
    pair_ptms: np.ndarray  # (n_pairs, 256): vectorized 16x16 PTMs

    @property
    def size(self) -> int:
        return len(self.pairs)

    def pair_protocol(self, pair_index: int) -> TwoPartyProtocol:
        ia, ib = self.pairs[pair_index]
        steps_a = tuple(_rename_bits(s, "a") for s in self.party_atoms[ia].steps)
        steps_b = tuple(_rename_bits(s, "b") for s in self.party_atoms[ib].steps)
        return TwoPartyProtocol(
            instr_a=LocalInstrument("A", steps_a),
            instr_b=LocalInstrument("B", steps_b),
            setting=Setting.LO,
        )

    def pair_label(self, pair_index: int) -> str:
        ia, ib = self.pairs[pair_index]
        return f"{self.party_atoms[ia].label} (x) {self.party_atoms[ib].label}"


def _rename_bits(step: Step, tag: str) -> Step:
    if isinstance(step, Measure):
        return Measure(step.qubit, step.basis, f"{step.bit}_{tag}")
    if isinstance(step, SignWeight):
        return SignWeight(tuple(f"{b}_{tag}" for b in step.bits), step.scale)
    return step


def _unitary_family() -> list[tuple[str, np.ndarray]]:
    out = [("id", np.eye(2, dtype=complex))]
    for axis, label in ((1, "X"), (2, "Y"), (3, "Z")):
        out.append((f"pauli{label}", _PAULI_1Q[axis].astype(complex)))
    rots = []
    for axis, label in ((1, "X"), (2, "Y"), (3, "Z")):
        for sgn, tag in ((1, "+"), (-1, "-")):
            u = np.cos(np.pi / 4) * np.eye(2) - 1j * sgn * np.sin(np.pi / 4) * _PAULI_1Q[axis]
            rots.append((f"rot{label}{tag}", u.astype(complex)))
    out += rots
    # rotation-after-Pauli products supply the reflection channels
    for rl, ru in rots:
        for pl in ("X", "Y", "Z"):
            out.append((f"{rl}.pauli{pl}", ru @ _PAULI_1Q["IXYZ".index(pl)]))
    return out


def default_atom_set() -> AtomSet:
    """Identity, Paulis, pi/2 rotations, signed Pauli-basis measurement
    instruments and their compositions, on both parties, deduplicated by
    expected superoperator."""
    candidates: list[Atom] = []
    unitaries = _unitary_family()
    for label, u in unitaries:
        steps: tuple[Step, ...] = () if label == "id" else (Unitary((0,), u),)
        candidates.append(Atom(label, steps, _instrument_ptm_1q(steps)))
    # measurements, optionally preceded by a basic unitary, with both
    # outcome-sign rules
    basic = [("", None)] + [(f"{lbl}>", u) for lbl, u in unitaries[:10]]
    for pre_label, pre in basic:
        for basis in "XYZ":
            for rule, tag in (((), "++"), (("m",), "+-")):
                steps = ()
                if pre is not None:
                    steps += (Unitary((0,), pre),)
                steps += (Measure(0, basis, "m"),)
                if rule:
                    steps += (SignWeight(rule, 1.0),)
                label = f"{pre_label}meas{basis}:{tag}"
                candidates.append(Atom(label, steps, _instrument_ptm_1q(steps)))
    # dedupe by PTM
    atoms: list[Atom] = []
    seen: set[bytes] = set()
    for atom in candidates:
        key = np.round(atom.ptm, 10).tobytes()
        if key not in seen:
            seen.add(key)
            atoms.append(atom)
    pairs = [(i, j) for i in range(len(atoms)) for j in range(len(atoms))]
    pair_ptms = np.empty((len(pairs), 256))
    for idx, (i, j) in enumerate(pairs):
        # io qubit 0 = party A, so B's factor is the significant kron factor
        pair_ptms[idx] = np.kron(atoms[j].ptm, atoms[i].ptm).reshape(-1)
    return AtomSet(tuple(atoms), tuple(pairs), pair_ptms)


# ---------------------------------------------------------------------------
# l1-minimizing decomposition


def solve_min_l1(
    target_ptm: np.ndarray,
    atoms: AtomSet,
    target_name: str = "target",
    coefficient_cutoff: float = 1e-9,
) -> Qpd:
    """Minimum-one-norm decomposition of the target channel over the atoms.

    Solved as a linear program with split positive/negative coefficient
    parts; raises QpdError when the atom span misses the target.
    """
    b = np.asarray(target_ptm, dtype=float).reshape(-1)
    if b.size != 256:
        raise QpdError("target PTM must be 16x16 (a two-qubit channel)")
    m = atoms.pair_ptms.T  # (256, n)
    n = atoms.size
    res = linprog(
        c=np.ones(2 * n),
        A_eq=np.concatenate([m, -m], axis=1),
        b_eq=b,
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise QpdError(f"l1 minimization failed: {res.message}")
    coeffs = res.x[:n] - res.x[n:]
    err = np.max(np.abs(m @ coeffs - b))
    if err > 1e-7:
        raise QpdError(f"LP solution violates the defining identity by {err:.2e}")
    terms = tuple(
        QpdTerm(float(a), atoms.pair_protocol(i))
        for i, a in enumerate(coeffs)
        if abs(a) > coefficient_cutoff
    )
    return Qpd(terms=terms, target=target_name, setting=Setting.LO)


# ---------------------------------------------------------------------------
# state-preparation decomposition (robustness-optimal)


def vidal_state_qpd(
    psi: np.ndarray,
    dim_a: int,
    dim_b: int,
    target_name: str = "state",
    setting: Setting = Setting.LOCC,
) -> Qpd:
    """Optimal QPD preparing a bipartite pure state with product preparations.

    kappa = 1 + 2E with E = (sum_i alpha_i)^2 - 1: one positive term with
    shared-random-phase product states (coefficient 1+E) and one negative
    Schmidt-pair product preparation per ordered pair i != j (coefficient
    -alpha_i alpha_j); a product state collapses to the single trivial term.
    """
    sd = schmidt_decompose(np.asarray(psi, dtype=complex), dim_a, dim_b)
    n_a, n_b = _qubits_of(dim_a), _qubits_of(dim_b)
    slots_a, slots_b = tuple(range(n_a)), tuple(range(n_b))
    alphas = sd.coefficients
    r = len(alphas)
    if sd.rank > 16:
        raise QpdError("Schmidt rank above 16 is not supported")
    if r == 1:
        prep = TwoPartyProtocol(
            instr_a=LocalInstrument("A", (Prepare(slots_a, sd.basis_a[:, 0]),)),
            instr_b=LocalInstrument("B", (Prepare(slots_b, sd.basis_b[:, 0]),)),
            setting=Setting.LO,
            n_io_a=n_a, n_io_b=n_b,
        )
        return Qpd(terms=(QpdTerm(1.0, prep),), target=target_name, setting=setting)
    weight = float(np.sum(alphas))
    robust = weight**2 - 1
    pos = TwoPartyProtocol(
        instr_a=LocalInstrument(
            "A", (PhasedPrepare(slots_a, alphas / weight, sd.basis_a, +1),)
        ),
        instr_b=LocalInstrument(
            "B", (PhasedPrepare(slots_b, alphas / weight, sd.basis_b, -1),)
        ),
        setting=Setting.LO,
        n_io_a=n_a, n_io_b=n_b,
        shared_phase_count=r,
    )
    terms = [QpdTerm(1 + robust, pos)]
    for i in range(r):
        for j in range(r):
            if i == j:
                continue
            prep = TwoPartyProtocol(
                instr_a=LocalInstrument("A", (Prepare(slots_a, sd.basis_a[:, i]),)),
                instr_b=LocalInstrument("B", (Prepare(slots_b, sd.basis_b[:, j]),)),
                setting=Setting.LO,
                n_io_a=n_a, n_io_b=n_b,
            )
            terms.append(QpdTerm(-float(alphas[i] * alphas[j]), prep))
    return Qpd(terms=tuple(terms), target=target_name, setting=setting)


def _qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if 1 << n != dim:
        raise QpdError(f"dimension {dim} is not a power of two")
    return n
