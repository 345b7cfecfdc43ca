"""Paillier cryptosystem with generator g = n + 1.

Multiplying ciphertexts adds plaintexts and raising a ciphertext to ``k``
scales its plaintext by ``k``, both modulo ``n``.  Arithmetic runs on
gmpy2; values crossing the API are plain ``int``.
"""

import math
from dataclasses import dataclass, field

import gmpy2

from .errors import CiphertextOutOfRange, InsufficientKeyBits, MessageOutOfRange
from .rand import is_test_rng, system_rng

DEFAULT_KEY_BITS = 1024
PRODUCTION_MIN_BITS = 1024
TEST_MIN_BITS = 128
MILLER_RABIN_ROUNDS = 64


@dataclass(frozen=True)
class PublicKey:
    n: int
    nsquare: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nsquare", self.n * self.n)

    @property
    def g(self):
        return self.n + 1

    @property
    def bits(self):
        return self.n.bit_length()

    @property
    def ciphertext_bytes(self):
        return (self.nsquare.bit_length() + 7) // 8


@dataclass(frozen=True)
class SecretKey:
    """Decryption key.  ``p`` and ``q`` are kept only by the key generator;
    key files carry ``n``, ``lam`` and ``mu`` alone."""

    n: int
    lam: int
    mu: int
    p: int = field(default=0, repr=False)
    q: int = field(default=0, repr=False)

    @property
    def public_key(self):
        return PublicKey(self.n)

    @property
    def has_factors(self):
        return self.p > 1 and self.q > 1


@dataclass(frozen=True, slots=True)
class PaillierCiphertext:
    c: int


def _random_prime(bits, rng):
    while True:
        candidate = rng.getrandbits(bits) | (3 << (bits - 2)) | 1
        if gmpy2.is_prime(candidate, MILLER_RABIN_ROUNDS):
            return int(candidate)


def keygen(key_bits=DEFAULT_KEY_BITS, rng=None):
    """Generate ``(PublicKey, SecretKey)`` with an exactly ``key_bits``-bit modulus.

    Without ``rng`` the OS entropy pool is used and the production floor of
    1024 bits applies.  A seeded ``random.Random`` selects test mode, which
    accepts moduli down to 128 bits.
    """
    test_mode = is_test_rng(rng)
    floor = TEST_MIN_BITS if test_mode else PRODUCTION_MIN_BITS
    if key_bits < floor:
        mode = "test" if test_mode else "production"
        raise InsufficientKeyBits(f"{key_bits}-bit keys below the {mode} floor of {floor}")
    rng = rng or system_rng()
    half = key_bits // 2
    while True:
        p = _random_prime(half, rng)
        q = _random_prime(key_bits - half, rng)
        n = p * q
        if p != q and n.bit_length() == key_bits and math.gcd(n, (p - 1) * (q - 1)) == 1:
            break
    lam = math.lcm(p - 1, q - 1)
    mu = pow(lam, -1, n)
    return PublicKey(n), SecretKey(n, lam, mu, p, q)


def _random_unit(n, rng):
    while True:
        r = rng.randrange(1, n)
        if math.gcd(r, n) == 1:
            return r


def encrypt(pk, m, rng=None):
    if not 0 <= m < pk.n:
        raise MessageOutOfRange(f"plaintext must lie in [0, n)")
    rng = rng or system_rng()
    r = _random_unit(pk.n, rng)
    c = (1 + m * pk.n) * gmpy2.powmod(r, pk.n, pk.nsquare) % pk.nsquare
    return PaillierCiphertext(int(c))


class FactorEncryptor:
    """Encryption for the key owner, using the factorisation of ``n``.

    The randomiser ``r^n mod n^2`` only depends on ``r mod p`` and
    ``r mod q``, and modulo ``p^2`` it equals ``y^p`` for a uniform ``y``
    in ``[1, p)``.  Building it from the two CRT halves gives the same
    distribution as public-key encryption at a fraction of the cost.
    """

    def __init__(self, sk, rng=None):
        if not sk.has_factors:
            raise ValueError("secret key has no factorisation")
        self.n = sk.n
        self.nsquare = sk.n * sk.n
        self.p, self.q = gmpy2.mpz(sk.p), gmpy2.mpz(sk.q)
        self.p2, self.q2 = self.p * self.p, self.q * self.q
        self.p2_inv = gmpy2.invert(self.p2, self.q2)
        self.rng = rng or system_rng()

    def randomiser(self):
        rng = self.rng
        rp = gmpy2.powmod(rng.randrange(1, int(self.p)), self.p, self.p2)
        rq = gmpy2.powmod(rng.randrange(1, int(self.q)), self.q, self.q2)
        return rp + self.p2 * ((rq - rp) * self.p2_inv % self.q2)

    def encrypt(self, m):
        if not 0 <= m < self.n:
            raise MessageOutOfRange("plaintext must lie in [0, n)")
        return PaillierCiphertext(int((1 + m * self.n) * self.randomiser() % self.nsquare))


def decrypt(sk, ct):
    c = ct.c
    nsquare = sk.n * sk.n
    if not 0 <= c < nsquare:
        raise CiphertextOutOfRange("ciphertext must lie in [0, n^2)")
    u = gmpy2.powmod(c, sk.lam, nsquare)
    return int((u - 1) // sk.n * sk.mu % sk.n)


def add_ciphertexts(pk, c1, c2):
    return PaillierCiphertext(c1.c * c2.c % pk.nsquare)


def scalar_multiply(pk, ct, k):
    if k < 0:
        raise ValueError("scalar must be non-negative")
    return PaillierCiphertext(int(gmpy2.powmod(ct.c, k, pk.nsquare)))


def rerandomize(pk, ct, rng=None):
    return add_ciphertexts(pk, ct, encrypt(pk, 0, rng))


def is_valid_ciphertext(pk, ct):
    return 0 < ct.c < pk.nsquare and math.gcd(ct.c, pk.n) == 1


def ciphertext_to_bytes(pk, ct):
    """Wire form: 4-byte big-endian length, then the value zero-padded to
    ``pk.ciphertext_bytes`` so every ciphertext under one key has one size."""
    width = pk.ciphertext_bytes
    return width.to_bytes(4, "big") + ct.c.to_bytes(width, "big")


def ciphertext_from_bytes(pk, data):
    """Inverse of ``ciphertext_to_bytes``; ``data`` must be exactly one ciphertext."""
    width = pk.ciphertext_bytes
    if len(data) != 4 + width or int.from_bytes(data[:4], "big") != width:
        raise CiphertextOutOfRange(f"expected a length-prefixed {width}-byte ciphertext")
    c = int.from_bytes(data[4:], "big")
    if c >= pk.nsquare:
        raise CiphertextOutOfRange("ciphertext must lie in [0, n^2)")
    return PaillierCiphertext(c)


def ciphertext_wire_size(pk):
    return 4 + pk.ciphertext_bytes


# -- key files ------------------------------------------------------------

def _write_fields(path, fields):
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{k}={v}\n" for k, v in fields.items())


def write_secret_key(path, sk, **extra):
    """Text key file of ``name=decimal`` lines; ``extra`` adds integer fields."""
    _write_fields(path, {"n": sk.n, "λ": sk.lam, "μ_dec": sk.mu, **extra})


def write_public_key(path, pk, **extra):
    _write_fields(path, {"n": pk.n, **extra})


def read_key_fields(path):
    fields = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}: malformed key line {line!r}")
            fields[key.strip()] = int(value.strip())
    return fields


def read_secret_key(path):
    f = read_key_fields(path)
    lam = f.get("λ", f.get("lambda"))
    mu = f.get("μ_dec", f.get("mu_dec", f.get("mu")))
    if "n" not in f or lam is None or mu is None:
        raise ValueError(f"{path}: secret key needs n, λ and μ_dec fields")
    return SecretKey(f["n"], lam, mu)


def read_public_key(path):
    f = read_key_fields(path)
    if "n" not in f:
        raise ValueError(f"{path}: missing field n")
    return PublicKey(f["n"])
