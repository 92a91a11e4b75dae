"""Reversible gates and circuits built from NOT, CNOT and FREDKIN.

Bit vectors are tuples of 0/1; wire ``i`` is element ``i``.  For
exhaustive checks whole input sets are evaluated at once as integer
arrays where bit ``i`` of each integer holds wire ``i``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .thermo import ThermalContext

MAX_EXHAUSTIVE_WIDTH = 20

_ARITY = {"NOT": ("t",), "CNOT": ("c", "t"), "FREDKIN": ("c", "a", "b")}


class CircuitError(ValueError):
    """Structural problem with a gate, circuit or its input."""


@dataclass(frozen=True)
class Gate:
    kind: str
    wires: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in _ARITY:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        wires = tuple(int(w) for w in self.wires)
        if len(wires) != len(_ARITY[self.kind]):
            raise CircuitError(f"{self.kind} takes {len(_ARITY[self.kind])} wires, got {wires}")
        if len(set(wires)) != len(wires) or min(wires) < 0:
            raise CircuitError(f"wire indices must be distinct and nonnegative: {wires}")
        object.__setattr__(self, "wires", wires)

    @classmethod
    def NOT(cls, target):
        return cls("NOT", (target,))

    @classmethod
    def CNOT(cls, control, target):
        return cls("CNOT", (control, target))

    @classmethod
    def FREDKIN(cls, control, a, b):
        return cls("FREDKIN", (control, a, b))

    def __str__(self):
        args = " ".join(f"{n}={w}" for n, w in zip(_ARITY[self.kind], self.wires))
        return f"{self.kind} {args}"


def apply_gate(gate: Gate, bits: Sequence[int]) -> tuple[int, ...]:
    if max(gate.wires) >= len(bits):
        raise CircuitError(f"gate {gate} does not fit a register of width {len(bits)}")
    out = list(bits)
    if gate.kind == "NOT":
        (t,) = gate.wires
        out[t] ^= 1
    elif gate.kind == "CNOT":
        c, t = gate.wires
        out[t] ^= out[c]
    else:
        c, a, b = gate.wires
        if out[c]:
            out[a], out[b] = out[b], out[a]
    return tuple(out)


def apply_gate_packed(gate: Gate, states: np.ndarray) -> np.ndarray:
    """Vectorized :func:`apply_gate` on integer-packed states."""
    s = states.copy()
    if gate.kind == "NOT":
        (t,) = gate.wires
        s ^= 1 << t
    elif gate.kind == "CNOT":
        c, t = gate.wires
        s ^= ((s >> c) & 1) << t
    else:
        c, a, b = gate.wires
        d = ((s >> a) ^ (s >> b)) & (s >> c) & 1
        s ^= (d << a) | (d << b)
    return s


@dataclass(frozen=True)
class Circuit:
    """A gate list over ``width`` wires.

    Inputs are the wires without a declared ancilla constant; outputs are
    the wires not declared garbage.  Both are listed in wire order.
    """

    width: int
    gates: tuple[Gate, ...] = ()
    ancilla: Mapping[int, int] = field(default_factory=dict)
    garbage: frozenset[int] = frozenset()

    def __post_init__(self):
        if self.width < 1:
            raise CircuitError("width must be positive")
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "ancilla", dict(sorted(self.ancilla.items())))
        object.__setattr__(self, "garbage", frozenset(self.garbage))
        for g in self.gates:
            if max(g.wires) >= self.width:
                raise CircuitError(f"gate {g} exceeds width {self.width}")
        for w, v in self.ancilla.items():
            if not 0 <= w < self.width or v not in (0, 1):
                raise CircuitError(f"bad ancilla {w}={v}")
        if any(not 0 <= w < self.width for w in self.garbage):
            raise CircuitError("garbage wire out of range")

    @property
    def inputs(self) -> tuple[int, ...]:
        return tuple(w for w in range(self.width) if w not in self.ancilla)

    @property
    def outputs(self) -> tuple[int, ...]:
        return tuple(w for w in range(self.width) if w not in self.garbage)

    def then(self, other: "Circuit") -> "Circuit":
        """Sequential composition on the same wires (ancilla/garbage of ``self``)."""
        if other.width != self.width:
            raise CircuitError("cannot compose circuits of different width")
        return Circuit(self.width, self.gates + other.gates, self.ancilla, self.garbage)

    def fill(self, inputs: Sequence[int]) -> tuple[int, ...]:
        """Full-width register from values on the input wires plus ancilla constants."""
        if len(inputs) != len(self.inputs):
            raise CircuitError(f"expected {len(self.inputs)} input bits, got {len(inputs)}")
        bits = [0] * self.width
        for w, v in zip(self.inputs, inputs):
            bits[w] = int(v)
        for w, v in self.ancilla.items():
            bits[w] = v
        return tuple(bits)

    def run_packed(self, states: np.ndarray) -> np.ndarray:
        s = np.asarray(states, dtype=np.int64)
        for g in self.gates:
            s = apply_gate_packed(g, s)
        return s


def run_circuit(circuit: Circuit, inputs: Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Evaluate ``circuit``; returns ``(full_output, projected_output)``."""
    bits = circuit.fill(inputs)
    for g in circuit.gates:
        bits = apply_gate(g, bits)
    return bits, tuple(bits[w] for w in circuit.outputs)


def run_full(circuit: Circuit, bits: Sequence[int]) -> tuple[int, ...]:
    """Evaluate on an arbitrary full-width register, ignoring ancilla constants."""
    if len(bits) != circuit.width:
        raise CircuitError(f"expected {circuit.width} bits, got {len(bits)}")
    out = tuple(bits)
    for g in circuit.gates:
        out = apply_gate(g, out)
    return out


def _pack(bits: Sequence[int]) -> int:
    return sum(int(b) << i for i, b in enumerate(bits))


def _unpack(value: int, width: int) -> tuple[int, ...]:
    return tuple((value >> i) & 1 for i in range(width))


def _extract(states: np.ndarray, wires: Sequence[int]) -> np.ndarray:
    out = np.zeros_like(states)
    for j, w in enumerate(wires):
        out |= ((states >> w) & 1) << j
    return out


def _input_states(circuit: Circuit) -> np.ndarray:
    """All admissible full-width registers (inputs enumerated, ancillas fixed)."""
    k = len(circuit.inputs)
    idx = np.arange(1 << k, dtype=np.int64)
    states = np.zeros_like(idx)
    for j, w in enumerate(circuit.inputs):
        states |= ((idx >> j) & 1) << w
    for w, v in circuit.ancilla.items():
        states |= v << w
    return states


def collisions(outputs: Iterable) -> dict:
    """Map each output value hit more than once to its preimage size."""
    return {o: n for o, n in Counter(outputs).items() if n > 1}


@dataclass(frozen=True)
class BijectivityReport:
    bijective: bool
    bits_erased: float
    collisions: dict

    def __bool__(self):
        return self.bijective


def is_bijective(circuit: Circuit) -> BijectivityReport:
    """Exhaustively check the full-width map and measure projection loss.

    ``bits_erased`` is log2(#admissible inputs / #distinct projected outputs).
    """
    if circuit.width > MAX_EXHAUSTIVE_WIDTH:
        raise CircuitError(f"width {circuit.width} exceeds exhaustive cap {MAX_EXHAUSTIVE_WIDTH}")
    everything = np.arange(1 << circuit.width, dtype=np.int64)
    full = circuit.run_packed(everything)
    bijective = np.unique(full).size == everything.size

    projected = _extract(circuit.run_packed(_input_states(circuit)), circuit.outputs)
    values, counts = np.unique(projected, return_counts=True)
    erased = math.log2(projected.size / values.size)
    coll = {int(v): int(c) for v, c in zip(values, counts) if c > 1}
    return BijectivityReport(bool(bijective), erased, coll)


def truth_table(circuit: Circuit) -> dict[tuple[int, ...], tuple[int, ...]]:
    """Projected output for every input assignment."""
    k = len(circuit.inputs)
    return {
        _unpack(i, k): run_circuit(circuit, _unpack(i, k))[1] for i in range(1 << k)
    }


def synthesize(primitive: str) -> Circuit:
    """FREDKIN-only construction of a classical primitive.

    Input wires come first (x, then y); ancillas follow.  COPY has two
    outputs (x, x); every other primitive has one.
    """
    F = Gate.FREDKIN
    p = primitive.upper()
    if p == "NOT":
        # x, a=0, b=1: x=1 swaps the constants, so b ends up as not-x
        return Circuit(3, [F(0, 1, 2)], ancilla={1: 0, 2: 1}, garbage={0, 1})
    if p == "AND":
        # x, y, a=0: x=1 moves y onto a
        return Circuit(3, [F(0, 1, 2)], ancilla={2: 0}, garbage={0, 1})
    if p == "OR":
        # x, y, a=1: x=1 moves the constant 1 onto y's line
        return Circuit(3, [F(0, 2, 1)], ancilla={2: 1}, garbage={0, 2})
    if p == "COPY":
        # x, a=1, b=0: b becomes x, a keeps not-x as garbage
        return Circuit(3, [F(0, 1, 2)], ancilla={1: 1, 2: 0}, garbage={1})
    if p == "XOR":
        # x, y, c=0, d=1: y spreads into (c, d) = (y, not-y); x then picks not-y
        return Circuit(4, [F(1, 2, 3), F(0, 2, 3)], ancilla={2: 0, 3: 1}, garbage={0, 1, 3})
    raise ValueError(f"unknown primitive {primitive!r}")


REFERENCE = {
    "NOT": lambda x: (1 - x,),
    "AND": lambda x, y: (x & y,),
    "OR": lambda x, y: (x | y,),
    "XOR": lambda x, y: (x ^ y,),
    "COPY": lambda x: (x, x),
}


def _entropy_nats(weights: Mapping) -> float:
    total = sum(weights.values())
    h = 0.0
    for w in weights.values():
        if w > 0:
            pr = w / total
            h -= pr * math.log(pr)
    return h


def erasure_cost(ctx: ThermalContext, circuit: Circuit, input_distribution=None) -> float:
    """Minimum work to reset the garbage wires to constants.

    ``input_distribution`` maps input tuples to probabilities; ``None`` means
    uniform over all input assignments.  The joint garbage marginal is used,
    so correlated garbage is charged once.
    """
    if not circuit.garbage:
        return 0.0
    k = len(circuit.inputs)
    if input_distribution is None:
        input_distribution = {_unpack(i, k): 1.0 for i in range(1 << k)}
    garbage = sorted(circuit.garbage)
    marginal: Counter = Counter()
    for x, pr in input_distribution.items():
        if pr <= 0:
            continue
        full, _ = run_circuit(circuit, x)
        marginal[tuple(full[w] for w in garbage)] += pr
    return ctx.kT * _entropy_nats(marginal)


def random_circuit(rng: np.random.Generator, width: int, n_gates: int, kinds=("NOT", "CNOT", "FREDKIN")) -> Circuit:
    gates = []
    for _ in range(n_gates):
        kind = kinds[int(rng.integers(len(kinds)))]
        wires = rng.choice(width, size=len(_ARITY[kind]), replace=False)
        gates.append(Gate(kind, tuple(int(w) for w in wires)))
    return Circuit(width, gates)


# -- text format -------------------------------------------------------------


def dumps(circuit: Circuit) -> str:
    lines = [f"width {circuit.width}"]
    lines += [f"ancilla {w}={v}" for w, v in circuit.ancilla.items()]
    lines += [f"garbage {w}" for w in sorted(circuit.garbage)]
    lines += [str(g) for g in circuit.gates]
    return "\n".join(lines) + "\n"


def loads(text: str) -> Circuit:
    width = None
    gates, ancilla, garbage = [], {}, set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        try:
            if head == "width":
                width = int(rest[0])
            elif head == "ancilla":
                w, v = rest[0].split("=")
                ancilla[int(w)] = int(v)
            elif head == "garbage":
                garbage.add(int(rest[0]))
            elif head in _ARITY:
                args = dict(tok.split("=") for tok in rest)
                gates.append(Gate(head, tuple(int(args[n]) for n in _ARITY[head])))
            else:
                raise CircuitError(f"unknown directive {head!r}")
        except (IndexError, KeyError, ValueError) as exc:
            raise CircuitError(f"line {lineno}: cannot parse {raw!r}") from exc
    if width is None:
        raise CircuitError("missing width header")
    return Circuit(width, gates, ancilla, garbage)
