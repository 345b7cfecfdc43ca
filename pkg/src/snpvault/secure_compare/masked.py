"""Equality test on an encrypted value by additive masking plus a garbled circuit.

The cloud server holds ``E(val_n)``, the researcher holds ``val_q`` and the
secret key.  Per comparison:

    CS -> R   MASKED_VALUE     sid, E(val_n + mu)           mu uniform, kappa bits
    R  -> CS  GARBLED_CIRCUIT  OT setup, circuit for [x = y] with x = mu'
    CS -> R   OT_RECEIVER_MSG  one point per bit of mu
    R  -> CS  OT_SENDER_MSG    masked label pairs

where ``mu' = (D(E(val_n + mu)) - val_q) mod 2^kappa``.  ``mu' = mu`` exactly
when the values agree.  Only the CS evaluates the circuit, so only it learns
the bit; the researcher sees ``val_n + mu``, which is uniform mod 2^kappa.
"""

import struct
import threading
from functools import lru_cache

from ..errors import DecodeFailure, DecryptionMismatch, WidthOutOfRange
from ..paillier import (
    add_ciphertexts,
    ciphertext_from_bytes,
    ciphertext_to_bytes,
    ciphertext_wire_size,
    decrypt,
    encrypt,
)
from ..rand import child_rng, system_rng
from ..transport import LoopbackChannel, Frame, MessageType, error_frame
from .circuit import build_equality_circuit, to_bits
from .garbling import LABEL_BYTES, GarbledCircuit, WireLabel, evaluate, garble
from .ot import (
    POINT_BYTES,
    OTReceiver,
    OTSender,
    decode_points,
    decode_replies,
    encode_points,
    encode_replies,
    ot_exchange,
)

DEFAULT_MASK_BITS = 64
MAX_VALUE = 16  # largest genotype or phenotype code
_SID = struct.Struct(">I")


@lru_cache(maxsize=None)
def equality_circuit(width):
    return build_equality_circuit(width)


def check_mask_bits(mask_bits, key_bits):
    if not 1 <= mask_bits <= 128:
        raise WidthOutOfRange(f"mask width {mask_bits} outside 1..128")
    if mask_bits + 5 >= key_bits:
        raise WidthOutOfRange(f"mask width {mask_bits} too large for a {key_bits}-bit modulus")


# -- message payloads -------------------------------------------------------

def encode_masked_value(pk, sid, ct):
    return _SID.pack(sid) + ciphertext_to_bytes(pk, ct)


def decode_masked_value(pk, payload):
    if len(payload) != _SID.size + ciphertext_wire_size(pk):
        raise DecodeFailure("malformed MASKED_VALUE payload")
    (sid,) = _SID.unpack_from(payload)
    return sid, ciphertext_from_bytes(pk, payload[_SID.size:])


def encode_garbled_message(setup, gc):
    return setup + gc.to_bytes()


def decode_garbled_message(circuit, payload):
    if len(payload) < POINT_BYTES:
        raise DecodeFailure("GARBLED_CIRCUIT payload truncated")
    return payload[:POINT_BYTES], GarbledCircuit.from_bytes(circuit, payload[POINT_BYTES:])


# -- the two roles ----------------------------------------------------------

def cs_compare(channel, session, pk, enc_val, sid, mask_bits=DEFAULT_MASK_BITS,
               rng=None, annotation=None):
    """Cloud-server side of one comparison; returns ``[val_n = val_q]``."""
    check_mask_bits(mask_bits, pk.bits)
    rng = rng or system_rng()
    circuit = equality_circuit(mask_bits)
    mu = rng.getrandbits(mask_bits)
    masked = add_ciphertexts(pk, enc_val, encrypt(pk, mu, rng))
    channel.send(
        Frame(MessageType.MASKED_VALUE, session, encode_masked_value(pk, sid, masked)), annotation
    )

    frame = channel.expect(MessageType.GARBLED_CIRCUIT)
    setup, gc = decode_garbled_message(circuit, frame.payload)
    receiver = OTReceiver(setup, to_bits(mu, mask_bits), rng)
    channel.send(
        Frame(MessageType.OT_RECEIVER_MSG, session, encode_points(receiver.points)), annotation
    )

    frame = channel.expect(MessageType.OT_SENDER_MSG)
    replies = decode_replies(frame.payload, mask_bits, LABEL_BYTES)
    labels = [WireLabel.from_bytes(x) for x in receiver.finish(replies)]
    return evaluate(gc, labels)


def researcher_mask_difference(sk, masked, val_q, mask_bits):
    """``mu' = (D(masked) - val_q) mod 2^kappa``, with a range check on the plaintext."""
    delta = decrypt(sk, masked)
    if delta >= (1 << mask_bits) + MAX_VALUE:
        raise DecryptionMismatch("masked value outside the expected range")
    return (delta - val_q) % (1 << mask_bits)


def researcher_compare(channel, session, sk, masked, val_q, mask_bits=DEFAULT_MASK_BITS, rng=None):
    """Researcher side, entered after a MASKED_VALUE carrying ``masked`` arrived."""
    rng = rng or system_rng()
    circuit = equality_circuit(mask_bits)
    mu_prime = researcher_mask_difference(sk, masked, val_q, mask_bits)
    gc, pairs = garble(circuit, to_bits(mu_prime, mask_bits), rng)
    sender = OTSender(rng)
    channel.send(Frame(MessageType.GARBLED_CIRCUIT, session, encode_garbled_message(sender.setup, gc)))

    frame = channel.expect(MessageType.OT_RECEIVER_MSG)
    points = decode_points(frame.payload, mask_bits)
    replies = sender.respond(points, [(l0.to_bytes(), l1.to_bytes()) for l0, l1 in pairs])
    channel.send(Frame(MessageType.OT_SENDER_MSG, session, encode_replies(replies)))


# -- in-process drivers -----------------------------------------------------

def garbled_equality(x, y, width, rng=None):
    """Garble [x = y] with ``x`` as garbler input, transfer ``y``'s labels by OT, evaluate."""
    rng = rng or system_rng()
    circuit = equality_circuit(width)
    gc, pairs = garble(circuit, to_bits(x, width), rng)
    chosen = ot_exchange(
        [(l0.to_bytes(), l1.to_bytes()) for l0, l1 in pairs], to_bits(y, width), rng
    )
    return evaluate(gc, [WireLabel.from_bytes(c) for c in chosen])


def masked_equality(enc_val_n, val_q, pk, sk, mask_bits=DEFAULT_MASK_BITS, rng=None,
                    transcript=None, session=0):
    """Run both roles over a loopback pair; returns the bit the CS learns."""
    check_mask_bits(mask_bits, pk.bits)
    rng = rng or system_rng()
    cs_rng = child_rng(rng, "cs")  # the two threads must not share a generator
    cs, researcher = LoopbackChannel.pair("CS", "R", transcript)
    failure = []

    def serve():
        try:
            frame = researcher.expect(MessageType.MASKED_VALUE)
            _, masked = decode_masked_value(pk, frame.payload)
            researcher_compare(researcher, session, sk, masked, val_q, mask_bits, rng)
        except Exception as exc:
            failure.append(exc)
            try:
                researcher.send(error_frame(session, exc))
            except Exception:
                pass

    t = threading.Thread(target=serve, daemon=True)
    t.start()
    try:
        bit = cs_compare(cs, session, pk, enc_val_n, 0, mask_bits, cs_rng)
    except Exception:
        if failure:
            raise failure[0] from None
        raise
    finally:
        cs.close()
        t.join()
        researcher.close()
    return bit

