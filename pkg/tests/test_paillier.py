import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from snpvault.errors import CiphertextOutOfRange, InsufficientKeyBits, MessageOutOfRange
from snpvault.paillier import (
    FactorEncryptor,
    PaillierCiphertext,
    add_ciphertexts,
    ciphertext_from_bytes,
    ciphertext_to_bytes,
    decrypt,
    encrypt,
    is_valid_ciphertext,
    keygen,
    read_public_key,
    read_secret_key,
    rerandomize,
    scalar_multiply,
    write_public_key,
    write_secret_key,
)


def test_keygen_shape(keys):
    pk, sk = keys
    assert pk.bits == 256
    assert pk.g == pk.n + 1
    assert sk.p * sk.q == pk.n and sk.p != sk.q
    assert sk.lam == math.lcm(sk.p - 1, sk.q - 1)


def test_keygen_production_roundtrip():
    pk, sk = keygen(1024)
    assert pk.bits == 1024
    assert decrypt(sk, encrypt(pk, 7)) == 7


def test_keygen_seeded_is_deterministic():
    a = keygen(256, random.Random(5))
    b = keygen(256, random.Random(5))
    assert a[0] == b[0] and a[1] == b[1]


def test_keygen_floors():
    with pytest.raises(InsufficientKeyBits):
        keygen(64, random.Random(1))
    with pytest.raises(InsufficientKeyBits):
        keygen(512)  # no seeded rng: production floor applies


def test_zero_and_boundaries(keys, rng):
    pk, sk = keys
    for m in (0, 1, pk.n - 1):
        assert decrypt(sk, encrypt(pk, m, rng)) == m


def test_message_range(keys):
    pk, _ = keys
    with pytest.raises(MessageOutOfRange):
        encrypt(pk, pk.n)
    with pytest.raises(MessageOutOfRange):
        encrypt(pk, -1)


def test_ciphertext_range(keys):
    pk, sk = keys
    with pytest.raises(CiphertextOutOfRange):
        decrypt(sk, PaillierCiphertext(pk.nsquare))


def test_probabilistic_encryption(keys, rng):
    pk, sk = keys
    c1, c2 = encrypt(pk, 5, rng), encrypt(pk, 5, rng)
    assert c1 != c2
    assert decrypt(sk, c1) == decrypt(sk, c2) == 5


def test_worked_homomorphic_examples(keys, rng):
    pk, sk = keys
    assert decrypt(sk, add_ciphertexts(pk, encrypt(pk, 2, rng), encrypt(pk, 3, rng))) == 5
    assert decrypt(sk, scalar_multiply(pk, encrypt(pk, 4, rng), 3)) == 12
    total = add_ciphertexts(pk, encrypt(pk, 1, rng), encrypt(pk, 1, rng))
    assert decrypt(sk, total) == 2


def test_scalar_edge_cases(keys, rng):
    pk, sk = keys
    c = encrypt(pk, 9, rng)
    assert decrypt(sk, scalar_multiply(pk, c, 1)) == 9
    assert decrypt(sk, scalar_multiply(pk, c, 0)) == 0
    with pytest.raises(ValueError):
        scalar_multiply(pk, c, -1)


@given(st.data())
def test_roundtrip_and_identity(keys, data):
    pk, sk = keys
    rng = random.Random(data.draw(st.integers()))
    m = data.draw(st.integers(0, pk.n - 1))
    c = encrypt(pk, m, rng)
    assert is_valid_ciphertext(pk, c)
    assert decrypt(sk, c) == m
    assert decrypt(sk, add_ciphertexts(pk, encrypt(pk, 0, rng), c)) == m
    assert decrypt(sk, rerandomize(pk, c, rng)) == m


def test_factor_encryptor_matches_public_encryption(keys, rng):
    pk, sk = keys
    fe = FactorEncryptor(sk, rng)
    for m in (0, 1, 16, pk.n - 1, rng.randrange(pk.n)):
        c = fe.encrypt(m)
        assert is_valid_ciphertext(pk, c)
        assert decrypt(sk, c) == m
    # its randomiser is an n-th power residue, like r^n
    r = fe.randomiser()
    assert decrypt(sk, PaillierCiphertext(int(r))) == 0


def test_factor_encryptor_needs_factors(keys, tmp_path):
    _, sk = keys
    write_secret_key(tmp_path / "k", sk)
    with pytest.raises(ValueError):
        FactorEncryptor(read_secret_key(tmp_path / "k"))


def test_wire_encoding(keys, rng):
    pk, _ = keys
    c = encrypt(pk, 3, rng)
    data = ciphertext_to_bytes(pk, c)
    assert len(data) == 4 + pk.ciphertext_bytes
    assert int.from_bytes(data[:4], "big") == pk.ciphertext_bytes
    assert ciphertext_from_bytes(pk, data) == c
    small = PaillierCiphertext(1)
    assert len(ciphertext_to_bytes(pk, small)) == len(data)
    with pytest.raises(CiphertextOutOfRange):
        ciphertext_from_bytes(pk, data[:-1])


def test_key_files(keys, tmp_path, rng):
    pk, sk = keys
    write_secret_key(tmp_path / "secret.key", sk, snps=5)
    write_public_key(tmp_path / "public.key", pk)
    text = (tmp_path / "secret.key").read_text(encoding="utf-8").splitlines()
    assert [line.split("=")[0] for line in text] == ["n", "λ", "μ_dec", "snps"]
    sk2 = read_secret_key(tmp_path / "secret.key")
    pk2 = read_public_key(tmp_path / "public.key")
    assert pk2 == pk
    assert decrypt(sk2, encrypt(pk2, 11, rng)) == 11
