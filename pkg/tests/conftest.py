import random

import pytest
from hypothesis import settings

from snpvault.genomics import example_dataset
from snpvault.paillier import keygen

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture(scope="session")
def cohort10():
    return example_dataset()


@pytest.fixture(scope="session")
def keys():
    """A 256-bit seeded keypair shared by the fast tests."""
    return keygen(256, random.Random("snpvault-tests"))


@pytest.fixture
def rng(request):
    return random.Random(request.node.name)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
