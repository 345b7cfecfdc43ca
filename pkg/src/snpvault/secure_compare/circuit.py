"""Boolean circuits in gate-list form and the equality comparator."""

from dataclasses import dataclass
from typing import NamedTuple

from ..errors import InputLengthMismatch, WidthOutOfRange

MAX_WIDTH = 128

TRUTH_TABLES = {
    "XOR": (0, 1, 1, 0),
    "AND": (0, 0, 0, 1),
    "OR": (0, 1, 1, 1),
    "NOT": (1, 0),
}


class Gate(NamedTuple):
    kind: str
    inputs: tuple
    output: int


@dataclass(frozen=True)
class BooleanCircuit:
    n_wires: int
    garbler_inputs: tuple
    evaluator_inputs: tuple
    gates: tuple
    outputs: tuple

    def evaluate(self, garbler_bits, evaluator_bits):
        """Plaintext evaluation; returns the list of output bits."""
        if len(garbler_bits) != len(self.garbler_inputs):
            raise InputLengthMismatch("garbler input length")
        if len(evaluator_bits) != len(self.evaluator_inputs):
            raise InputLengthMismatch("evaluator input length")
        wires = [None] * self.n_wires
        for w, b in zip(self.garbler_inputs, garbler_bits):
            wires[w] = b
        for w, b in zip(self.evaluator_inputs, evaluator_bits):
            wires[w] = b
        for g in self.gates:
            table = TRUTH_TABLES[g.kind]
            if g.kind == "NOT":
                wires[g.output] = table[wires[g.inputs[0]]]
            else:
                a, b = g.inputs
                wires[g.output] = table[2 * wires[a] + wires[b]]
        return [wires[w] for w in self.outputs]


def to_bits(x, width):
    """Little-endian bit list of ``x`` truncated to ``width`` bits."""
    return [(x >> i) & 1 for i in range(width)]


def from_bits(bits):
    return sum(b << i for i, b in enumerate(bits))


def build_equality_circuit(width):
    """Circuit with output 1 iff the two ``width``-bit inputs are equal.

    Wires ``0..width-1`` carry the garbler's input, ``width..2*width-1`` the
    evaluator's.  Bitwise XOR, a balanced OR tree, then NOT.
    """
    if not 1 <= width <= MAX_WIDTH:
        raise WidthOutOfRange(f"width {width} outside 1..{MAX_WIDTH}")
    garbler = tuple(range(width))
    evaluator = tuple(range(width, 2 * width))
    gates = []
    nxt = 2 * width

    layer = []
    for x, y in zip(garbler, evaluator):
        gates.append(Gate("XOR", (x, y), nxt))
        layer.append(nxt)
        nxt += 1
    while len(layer) > 1:
        merged = []
        for i in range(0, len(layer) - 1, 2):
            gates.append(Gate("OR", (layer[i], layer[i + 1]), nxt))
            merged.append(nxt)
            nxt += 1
        if len(layer) % 2:
            merged.append(layer[-1])
        layer = merged
    gates.append(Gate("NOT", (layer[0],), nxt))
    return BooleanCircuit(nxt + 1, garbler, evaluator, tuple(gates), (nxt,))
