"""Randomness sources.

Production code draws from the OS (``random.SystemRandom``).  Seeded
generators exist for reproducible tests and benchmarks only; they are NOT
cryptographically secure and every key or mask they produce is unsafe.
"""

import os
import random

TEST_SEED_ENV = "SNPVAULT_TEST_SEED"


def system_rng():
    return random.SystemRandom()


def seeded_rng(seed, label=""):
    """Deterministic, insecure generator for test mode.

    ``SNPVAULT_TEST_SEED`` overrides ``seed`` when set.  ``label`` derives
    independent streams from one seed (e.g. one per party).
    """
    env = os.environ.get(TEST_SEED_ENV)
    if env is not None:
        seed = int(env)
    return random.Random(f"{seed}/{label}")


def resolve_rng(rng=None, seed=None, label=""):
    if rng is not None:
        return rng
    if seed is not None:
        return seeded_rng(seed, label)
    return system_rng()


def is_test_rng(rng):
    return rng is not None and not isinstance(rng, random.SystemRandom)


def child_rng(rng, label):
    """Split off an independent generator of the same kind."""
    if not is_test_rng(rng):
        return system_rng()
    return random.Random(f"{rng.getrandbits(64)}/{label}")
