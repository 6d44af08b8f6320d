"""Circuit representation with an explicit A/B qubit bipartition.

Gates carry an ordered qubit list; for multi-qubit gate matrices the
*first* listed qubit is the least significant local index, matching the
global qubit-0-is-LSB convention.  Angle conventions: ``RZ(t) =
exp(-i t Z / 2)``, ``CRs(t)`` is a controlled ``exp(-i t s / 2)`` on the
second qubit, and ``RXX(t) = exp(-i t X(x)X / 2)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .linalg import I2, X, Y, Z, is_unitary, kron

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j]).astype(complex)
_T = np.diag([1, np.exp(1j * np.pi / 4)]).astype(complex)
_P0 = np.diag([1, 0]).astype(complex)
_P1 = np.diag([0, 1]).astype(complex)


class CircuitError(ValueError):
    """Raised on malformed circuit documents or gate specs."""


def rotation(axis: np.ndarray, theta: float) -> np.ndarray:
    """exp(-i theta axis / 2) for a Hermitian involution axis."""
    return np.cos(theta / 2) * np.eye(axis.shape[0]) - 1j * np.sin(theta / 2) * axis


def _controlled(u: np.ndarray) -> np.ndarray:
    # control = first listed qubit = least significant local index
    return kron(I2, _P0) + kron(u, _P1)


_FIXED_1Q = {"H": _H, "X": X, "Y": Y, "Z": Z, "S": _S, "T": _T}
_FIXED_2Q = {
    "CNOT": _controlled(X),
    "CZ": _controlled(Z),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
    "iSWAP": np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex),
}
_AXES = {"X": X, "Y": Y, "Z": Z}

GATE_NAMES = (
    "H", "X", "Y", "Z", "S", "T", "RX", "RY", "RZ",
    "CNOT", "CZ", "SWAP", "iSWAP", "RXX", "RYY", "RZZ",
    "CRX", "CRY", "CRZ", "U2x2", "U4x4",
)
_CANONICAL = {name.upper(): name for name in GATE_NAMES}

# (arity, number of params, needs explicit matrix)
_SIGNATURES = {
    **{g: (1, 0, False) for g in ("H", "X", "Y", "Z", "S", "T")},
    **{g: (1, 1, False) for g in ("RX", "RY", "RZ")},
    **{g: (2, 0, False) for g in ("CNOT", "CZ", "SWAP", "iSWAP")},
    **{g: (2, 1, False) for g in ("RXX", "RYY", "RZZ", "CRX", "CRY", "CRZ")},
    "U2x2": (1, 0, True),
    "U4x4": (2, 0, True),
}


@dataclass(frozen=True)
class GateSpec:
    """One gate application: name, angle params, ordered qubit indices."""

    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    matrix_data: np.ndarray | None = None

    def __post_init__(self):
        canonical = _CANONICAL.get(self.name.upper())
        if canonical is None:
            raise CircuitError(f"unknown gate name {self.name!r}")
        object.__setattr__(self, "name", canonical)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        arity, n_params, needs_matrix = _SIGNATURES[canonical]
        if len(self.qubits) != arity:
            raise CircuitError(f"gate {canonical} expects {arity} qubit(s), got {len(self.qubits)}")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"gate {canonical} has repeated qubits {self.qubits}")
        if len(self.params) != n_params:
            raise CircuitError(f"gate {canonical} expects {n_params} param(s), got {len(self.params)}")
        if needs_matrix:
            if self.matrix_data is None:
                raise CircuitError(f"gate {canonical} requires an explicit matrix")
            m = np.asarray(self.matrix_data, dtype=complex)
            dim = 2**arity
            if m.shape != (dim, dim):
                raise CircuitError(f"gate {canonical} matrix must be {dim}x{dim}, got {m.shape}")
            if not is_unitary(m):
                raise CircuitError(f"gate {canonical} matrix is not unitary")
            object.__setattr__(self, "matrix_data", m)
        elif self.matrix_data is not None:
            raise CircuitError(f"gate {canonical} does not take an explicit matrix")

    def matrix(self) -> np.ndarray:
        """Local unitary; first listed qubit is the least significant index."""
        if self.name in _FIXED_1Q:
            return _FIXED_1Q[self.name].copy()
        if self.name in _FIXED_2Q:
            return _FIXED_2Q[self.name].copy()
        if self.name in ("RX", "RY", "RZ"):
            return rotation(_AXES[self.name[1]], self.params[0])
        if self.name in ("RXX", "RYY", "RZZ"):
            axis = _AXES[self.name[1]]
            return rotation(kron(axis, axis), self.params[0])
        if self.name in ("CRX", "CRY", "CRZ"):
            return _controlled(rotation(_AXES[self.name[2]], self.params[0]))
        return self.matrix_data.copy()


@dataclass(frozen=True)
class CircuitIR:
    """Gate list over a fixed A/B qubit bipartition plus a Pauli observable.

    ``observable[q]`` is the Pauli letter measured on qubit q.
    """

    num_qubits: int
    partition: tuple[str, ...]
    gates: tuple[GateSpec, ...]
    observable: str

    def __post_init__(self):
        if self.num_qubits < 1:
            raise CircuitError("numQubits must be positive")
        if len(self.partition) != self.num_qubits:
            raise CircuitError("partition length must equal numQubits")
        if any(p not in ("A", "B") for p in self.partition):
            raise CircuitError("partition labels must be 'A' or 'B'")
        if len(self.observable) != self.num_qubits:
            raise CircuitError("observable length must equal numQubits")
        if any(ch not in "IXYZ" for ch in self.observable):
            raise CircuitError(f"invalid observable {self.observable!r}")
        for i, g in enumerate(self.gates):
            for q in g.qubits:
                if not 0 <= q < self.num_qubits:
                    raise CircuitError(f"gate {i} ({g.name}) qubit {q} out of range")

    def qubits_in(self, party: str) -> list[int]:
        return [q for q, p in enumerate(self.partition) if p == party]

    def gate_parties(self, gate: GateSpec) -> set[str]:
        return {self.partition[q] for q in gate.qubits}

    def is_nonlocal(self, gate: GateSpec) -> bool:
        return len(self.gate_parties(gate)) == 2


def nonlocal_gates(circuit: CircuitIR) -> list[int]:
    """Indices of gates that span both partition labels, in circuit order."""
    return [i for i, g in enumerate(circuit.gates) if circuit.is_nonlocal(g)]


class Setting(Enum):
    """Operational setting for the local decomposition."""

    LO = "LO"
    LO_ONEWAY_CC = "LO_ONEWAY_CC"
    LOCC = "LOCC"


@dataclass
class CutPlan:
    """How each nonlocal gate gets replaced by local operations."""

    setting: Setting
    factory_size: int = 1
    per_gate_method: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.factory_size < 1:
            raise CircuitError("factory size k must be >= 1")
        for idx, method in self.per_gate_method.items():
            if method not in ("lp-qpd", "teleport-factory"):
                raise CircuitError(f"unknown cut method {method!r} for gate {idx}")


def _matrix_to_json(m: np.ndarray) -> list[list[float]]:
    return [[float(x.real), float(x.imag)] for x in m.reshape(-1)]


def _matrix_from_json(data, dim: int, where: str) -> np.ndarray:
    if not isinstance(data, list) or len(data) != dim * dim:
        raise CircuitError(f"{where}: matrix must list {dim * dim} [re, im] pairs")
    try:
        flat = [complex(re, im) for re, im in data]
    except (TypeError, ValueError):
        raise CircuitError(f"{where}: matrix entries must be [re, im] pairs") from None
    return np.array(flat, dtype=complex).reshape(dim, dim)


def parse_circuit(text: str | bytes | dict) -> CircuitIR:
    """Parse the JSON interchange format into a validated CircuitIR."""
    if isinstance(text, dict):
        doc = text
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CircuitError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise CircuitError("top-level JSON value must be an object")
    for key in ("numQubits", "partition", "gates", "observable"):
        if key not in doc:
            raise CircuitError(f"missing required field {key!r}")
    if not isinstance(doc["numQubits"], int):
        raise CircuitError("numQubits: must be an integer")
    if not isinstance(doc["partition"], list):
        raise CircuitError("partition: must be a list of 'A'/'B' labels")
    if not isinstance(doc["gates"], list):
        raise CircuitError("gates: must be a list")
    if not isinstance(doc["observable"], str):
        raise CircuitError("observable: must be a Pauli string")

    gates = []
    for i, entry in enumerate(doc["gates"]):
        where = f"gates[{i}]"
        if not isinstance(entry, dict) or "name" not in entry or "qubits" not in entry:
            raise CircuitError(f"{where}: each gate needs 'name' and 'qubits'")
        name = entry["name"]
        if not isinstance(name, str):
            raise CircuitError(f"{where}: gate name must be a string")
        qubits = entry["qubits"]
        if not isinstance(qubits, list) or not all(isinstance(q, int) for q in qubits):
            raise CircuitError(f"{where}: qubits must be a list of integers")
        params = entry.get("params", [])
        if not isinstance(params, list):
            raise CircuitError(f"{where}: params must be a list of angles")
        matrix = None
        if "matrix" in entry:
            dim = 2 ** len(qubits)
            matrix = _matrix_from_json(entry["matrix"], dim, where)
        try:
            gates.append(GateSpec(name, tuple(qubits), tuple(params), matrix))
        except CircuitError as exc:
            raise CircuitError(f"{where}: {exc}") from None

    try:
        return CircuitIR(
            num_qubits=doc["numQubits"],
            partition=tuple(doc["partition"]),
            gates=tuple(gates),
            observable=doc["observable"],
        )
    except CircuitError as exc:
        raise CircuitError(str(exc)) from None


def serialize_circuit(circuit: CircuitIR) -> str:
    """Inverse of parse_circuit with stable field ordering."""
    gates = []
    for g in circuit.gates:
        entry: dict = {"name": g.name, "qubits": list(g.qubits)}
        if g.params:
            entry["params"] = list(g.params)
        if g.matrix_data is not None:
            entry["matrix"] = _matrix_to_json(g.matrix_data)
        gates.append(entry)
    doc = {
        "numQubits": circuit.num_qubits,
        "partition": list(circuit.partition),
        "gates": gates,
        "observable": circuit.observable,
    }
    return json.dumps(doc, indent=2)
