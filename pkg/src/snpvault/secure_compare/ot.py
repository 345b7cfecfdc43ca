"""Batched 1-out-of-2 oblivious transfer over the secp256k1 group.

Diffie-Hellman based ("simplest OT" shape), written additively:

    sender    a,  A = aG                          -> setup point A
    receiver  b_i, B_i = b_iG        if c_i = 0
                   B_i = A + b_iG    if c_i = 1   -> B_1..B_k
              key_i = H(i, A, B_i, b_iA)
    sender    k0_i = H(i, A, B_i, aB_i)
              k1_i = H(i, A, B_i, aB_i - aA)      -> m0_i ^ k0_i, m1_i ^ k1_i

The receiver can derive only ``k_{c_i}``; the sender sees uniformly
distributed ``B_i`` regardless of ``c_i``.  The setup point travels with
the garbled circuit, so a batch costs one receiver and one sender message.
"""

import hashlib
import struct

from coincurve import PublicKey

from ..errors import LengthMismatch, MalformedGroupElement
from ..rand import system_rng

ORDER = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
POINT_BYTES = 33


def _scalar(rng):
    return rng.randrange(1, ORDER).to_bytes(32, "big")


def _parse_point(data):
    try:
        return PublicKey(bytes(data))
    except Exception as exc:
        raise MalformedGroupElement(f"not a secp256k1 point: {exc}") from None


def _kdf(index, setup, point, shared, length):
    h = hashlib.blake2b(
        setup + point + shared, digest_size=length, person=b"snpv-ot" + struct.pack(">I", index)
    )
    return int.from_bytes(h.digest(), "big")


def _mask(message, pad):
    return (int.from_bytes(message, "big") ^ pad).to_bytes(len(message), "big")


class OTSender:
    def __init__(self, rng=None):
        rng = rng or system_rng()
        self._a = _scalar(rng)
        a = int.from_bytes(self._a, "big")
        self.setup = PublicKey.from_secret(self._a).format()
        self._minus_aa = PublicKey.from_secret((-a * a % ORDER).to_bytes(32, "big"))

    def respond(self, receiver_points, pairs):
        """Return ``[(e0, e1), ...]`` for the receiver's points."""
        if len(receiver_points) != len(pairs):
            raise LengthMismatch(f"{len(receiver_points)} points for {len(pairs)} message pairs")
        out = []
        for i, (raw, (m0, m1)) in enumerate(zip(receiver_points, pairs)):
            if len(m0) != len(m1):
                raise LengthMismatch("messages of a pair must have equal length")
            point = _parse_point(raw)
            s0 = point.multiply(self._a)
            try:
                s1 = PublicKey.combine_keys([s0, self._minus_aa])
            except Exception:
                raise MalformedGroupElement("receiver point equals the setup point") from None
            k0 = _kdf(i, self.setup, raw, s0.format(), len(m0))
            k1 = _kdf(i, self.setup, raw, s1.format(), len(m1))
            out.append((_mask(m0, k0), _mask(m1, k1)))
        return out


class OTReceiver:
    def __init__(self, setup, choices, rng=None):
        rng = rng or system_rng()
        big_a = _parse_point(setup)
        self.setup = bytes(setup)
        self.choices = list(choices)
        self.points = []
        self._shared = []
        for c in self.choices:
            while True:
                b = _scalar(rng)
                gb = PublicKey.from_secret(b)
                try:
                    point = gb if c == 0 else PublicKey.combine_keys([big_a, gb])
                    break
                except Exception:  # b*G == -A, astronomically unlikely
                    continue
            self.points.append(point.format())
            self._shared.append(big_a.multiply(b).format())

    def finish(self, sender_pairs):
        if len(sender_pairs) != len(self.choices):
            raise LengthMismatch(f"{len(sender_pairs)} replies for {len(self.choices)} choices")
        out = []
        for i, (c, shared, point, pair) in enumerate(
            zip(self.choices, self._shared, self.points, sender_pairs)
        ):
            e = pair[c]
            out.append(_mask(e, _kdf(i, self.setup, point, shared, len(e))))
        return out


def encode_points(points):
    return b"".join(points)


def decode_points(data, count):
    if len(data) != count * POINT_BYTES:
        raise LengthMismatch(f"expected {count} points, got {len(data)} bytes")
    return [data[i:i + POINT_BYTES] for i in range(0, len(data), POINT_BYTES)]


def encode_replies(replies):
    return b"".join(e0 + e1 for e0, e1 in replies)


def decode_replies(data, count, length):
    if len(data) != 2 * count * length:
        raise LengthMismatch(f"expected {count} reply pairs of {length}-byte messages")
    return [
        (data[i:i + length], data[i + length:i + 2 * length])
        for i in range(0, len(data), 2 * length)
    ]


def ot_exchange(pairs, choices, rng=None):
    """Run a whole batch in-process; returns the receiver's chosen messages."""
    if len(pairs) != len(choices):
        raise LengthMismatch(f"{len(pairs)} pairs for {len(choices)} choice bits")
    sender = OTSender(rng)
    receiver = OTReceiver(sender.setup, choices, rng)
    return receiver.finish(sender.respond(receiver.points, pairs))
