"""Masked equality test: what each side sees during one comparison."""

import random

from snpvault.paillier import add_ciphertexts, decrypt, encrypt, keygen
from snpvault.secure_compare import build_equality_circuit, garble, garbled_equality, to_bits
from snpvault.secure_compare.masked import masked_equality, researcher_mask_difference
from snpvault.transport import Transcript

rng = random.Random(3)
pk, sk = keygen(256, rng)
kappa = 64

print("== the circuit ==")
circuit = build_equality_circuit(8)
kinds = [gate.kind for gate in circuit.gates]
print("   width 8:", {k: kinds.count(k) for k in sorted(set(kinds))})
gc, pairs = garble(circuit, to_bits(42, 8), rng)
print("   garbled tables:", len(gc.tables), " bytes:", len(gc.to_bytes()))

print("== garble, transfer labels, evaluate ==")
for x, y in [(42, 42), (42, 43), (0, 255)]:
    print(f"   [{x} = {y}] ->", garbled_equality(x, y, 8, rng))

print("== the mask ==")
val_n, val_q = 6, 6
mu = rng.getrandbits(kappa)
masked = add_ciphertexts(pk, encrypt(pk, val_n, rng), encrypt(pk, mu, rng))
print("   researcher decrypts:", decrypt(sk, masked))
print("   mu' == mu?", researcher_mask_difference(sk, masked, val_q, kappa) == mu)
print("   with val_q = 16:", researcher_mask_difference(sk, masked, 16, kappa) == mu)

print("== both parties over a loopback channel ==")
t = Transcript()
bit = masked_equality(encrypt(pk, 9, rng), 9, pk, sk, rng=rng, transcript=t)
print("   bit:", bit)
for e in t.entries:
    print(f"   {e.direction}  {e.type.name:16s} {e.nbytes:6d} bytes")
