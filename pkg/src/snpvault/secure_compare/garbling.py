"""Yao garbling with point-and-permute, four-row tables for binary gates.

Each wire gets two random 128-bit labels whose permute bits differ.  A
table row is indexed by the permute bits of the input labels and holds the
output label (key and permute bit) masked by a hash of the input keys and
the gate index.  The evaluator learns one label per wire and decrypts
exactly one row per gate.
"""

import hashlib
import struct
from dataclasses import dataclass

from ..errors import DecodeFailure, InputLengthMismatch
from .circuit import TRUTH_TABLES

KEY_BYTES = 16
LABEL_BYTES = KEY_BYTES + 1
DIGEST_BYTES = 16


@dataclass(frozen=True, slots=True)
class WireLabel:
    key: bytes
    pbit: int

    def to_bytes(self):
        return self.key + bytes((self.pbit,))

    @classmethod
    def from_bytes(cls, data):
        if len(data) != LABEL_BYTES or data[-1] > 1:
            raise DecodeFailure("malformed wire label")
        return cls(bytes(data[:-1]), data[-1])


@dataclass(frozen=True)
class GarbledCircuit:
    """What the garbler ships to the evaluator.  The topology is public."""

    circuit: object
    tables: tuple
    garbler_labels: tuple
    decoding: tuple

    def to_bytes(self):
        parts = [lbl.to_bytes() for lbl in self.garbler_labels]
        for rows in self.tables:
            parts.extend(rows)
        for d0, d1 in self.decoding:
            parts.append(d0)
            parts.append(d1)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, circuit, data):
        off = 0

        def take(k):
            nonlocal off
            if off + k > len(data):
                raise DecodeFailure("garbled circuit truncated")
            chunk = data[off:off + k]
            off += k
            return chunk

        labels = tuple(WireLabel.from_bytes(take(LABEL_BYTES)) for _ in circuit.garbler_inputs)
        tables = tuple(
            tuple(take(LABEL_BYTES) for _ in range(2 if g.kind == "NOT" else 4))
            for g in circuit.gates
        )
        decoding = tuple((take(DIGEST_BYTES), take(DIGEST_BYTES)) for _ in circuit.outputs)
        if off != len(data):
            raise DecodeFailure("trailing bytes after garbled circuit")
        return cls(circuit, tables, labels, decoding)


def _pad(gate_index, *keys):
    h = hashlib.blake2b(b"".join(keys) + struct.pack(">I", gate_index), digest_size=LABEL_BYTES)
    return int.from_bytes(h.digest(), "big")


def _xor(label_bytes, pad):
    return (int.from_bytes(label_bytes, "big") ^ pad).to_bytes(LABEL_BYTES, "big")


def _output_digest(index, label):
    return hashlib.blake2b(
        label.to_bytes(), digest_size=DIGEST_BYTES, person=b"snpv-out" + struct.pack(">I", index)
    ).digest()


def _fresh_pair(rng):
    p = rng.getrandbits(1)
    return (
        WireLabel(rng.randbytes(KEY_BYTES), p),
        WireLabel(rng.randbytes(KEY_BYTES), p ^ 1),
    )


def garble(circuit, garbler_input, rng):
    """Garble ``circuit`` with the garbler's bits fixed to ``garbler_input``.

    Returns ``(GarbledCircuit, evaluator_pairs)``; the pairs are the
    ``(label_for_0, label_for_1)`` of each evaluator wire, to be handed
    out through oblivious transfer.
    """
    if len(garbler_input) != len(circuit.garbler_inputs):
        raise InputLengthMismatch(
            f"garbler input has {len(garbler_input)} bits, circuit expects {len(circuit.garbler_inputs)}"
        )
    labels = [None] * circuit.n_wires
    for w in circuit.garbler_inputs + circuit.evaluator_inputs:
        labels[w] = _fresh_pair(rng)

    tables = []
    for gid, g in enumerate(circuit.gates):
        out = labels[g.output] = _fresh_pair(rng)
        truth = TRUTH_TABLES[g.kind]
        if g.kind == "NOT":
            rows = [None, None]
            for va in (0, 1):
                la = labels[g.inputs[0]][va]
                rows[la.pbit] = _xor(out[truth[va]].to_bytes(), _pad(gid, la.key))
        else:
            rows = [None] * 4
            pa, pb = labels[g.inputs[0]], labels[g.inputs[1]]
            for va in (0, 1):
                la = pa[va]
                for vb in (0, 1):
                    lb = pb[vb]
                    rows[2 * la.pbit + lb.pbit] = _xor(
                        out[truth[2 * va + vb]].to_bytes(), _pad(gid, la.key, lb.key)
                    )
        tables.append(tuple(rows))

    garbler_labels = tuple(labels[w][b] for w, b in zip(circuit.garbler_inputs, garbler_input))
    decoding = tuple(
        (_output_digest(i, labels[w][0]), _output_digest(i, labels[w][1]))
        for i, w in enumerate(circuit.outputs)
    )
    pairs = [labels[w] for w in circuit.evaluator_inputs]
    return GarbledCircuit(circuit, tuple(tables), garbler_labels, decoding), pairs


def evaluate_outputs(gc, evaluator_labels):
    circuit = gc.circuit
    if len(evaluator_labels) != len(circuit.evaluator_inputs):
        raise InputLengthMismatch("one label per evaluator wire required")
    wires = [None] * circuit.n_wires
    for w, lbl in zip(circuit.garbler_inputs, gc.garbler_labels):
        wires[w] = lbl
    for w, lbl in zip(circuit.evaluator_inputs, evaluator_labels):
        wires[w] = lbl
    for gid, g in enumerate(circuit.gates):
        rows = gc.tables[gid]
        if g.kind == "NOT":
            la = wires[g.inputs[0]]
            raw = _xor(rows[la.pbit], _pad(gid, la.key))
        else:
            la, lb = wires[g.inputs[0]], wires[g.inputs[1]]
            raw = _xor(rows[2 * la.pbit + lb.pbit], _pad(gid, la.key, lb.key))
        wires[g.output] = WireLabel.from_bytes(raw)

    bits = []
    for i, w in enumerate(circuit.outputs):
        d = _output_digest(i, wires[w])
        d0, d1 = gc.decoding[i]
        if d == d0:
            bits.append(0)
        elif d == d1:
            bits.append(1)
        else:
            raise DecodeFailure(f"output wire {w} label not in decoding map")
    return bits


def evaluate(gc, evaluator_labels):
    """Evaluate a single-output garbled circuit and decode its bit."""
    (bit,) = evaluate_outputs(gc, evaluator_labels)
    return bit
