"""Secure equality testing: garbled circuits, oblivious transfer, masking."""

from .circuit import BooleanCircuit, Gate, build_equality_circuit, from_bits, to_bits
from .garbling import GarbledCircuit, WireLabel, evaluate, evaluate_outputs, garble
from .masked import (
    DEFAULT_MASK_BITS,
    cs_compare,
    garbled_equality,
    masked_equality,
    researcher_compare,
)
from .ot import OTReceiver, OTSender, ot_exchange

__all__ = [
    "BooleanCircuit",
    "Gate",
    "build_equality_circuit",
    "from_bits",
    "to_bits",
    "GarbledCircuit",
    "WireLabel",
    "evaluate",
    "evaluate_outputs",
    "garble",
    "DEFAULT_MASK_BITS",
    "cs_compare",
    "garbled_equality",
    "masked_equality",
    "researcher_compare",
    "OTReceiver",
    "OTSender",
    "ot_exchange",
]
