"""Additive homomorphism, scaling and re-randomisation with small keys."""

import random

from snpvault.paillier import (
    add_ciphertexts,
    decrypt,
    encrypt,
    keygen,
    rerandomize,
    scalar_multiply,
)

rng = random.Random(2)  # seeded: fine for a demo, never for real keys
pk, sk = keygen(256, rng)
print("n has", pk.n.bit_length(), "bits")

a, b = encrypt(pk, 5, rng), encrypt(pk, 3, rng)
print("E(5) * E(3) ->", decrypt(sk, add_ciphertexts(pk, a, b)))
print("E(5) ^ 7    ->", decrypt(sk, scalar_multiply(pk, a, 7)))

c1, c2 = encrypt(pk, 5, rng), encrypt(pk, 5, rng)
print("two encryptions of 5 equal?", c1 == c2)
print("re-randomised still 5?", decrypt(sk, rerandomize(pk, c1, rng)))

# a running total, the way the cloud server sums counts
acc = encrypt(pk, 0, rng)
for count in (2, 0, 4, 1):
    acc = add_ciphertexts(pk, acc, encrypt(pk, count, rng))
print("sum of 2, 0, 4, 1 ->", decrypt(sk, acc))

# plaintexts live mod n
print("(n - 1) + 2 ->", decrypt(sk, add_ciphertexts(pk, encrypt(pk, pk.n - 1, rng), encrypt(pk, 2, rng))))
