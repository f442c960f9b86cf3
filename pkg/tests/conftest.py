import numpy as np
import pytest

from seal.cartpole import CartPoleEnv, cartpole_meta
from seal.watermark import build_env, default_cartpole_spec


@pytest.fixture
def spec():
    return default_cartpole_spec()


@pytest.fixture
def meta():
    return cartpole_meta()


@pytest.fixture
def wm_env(spec, meta):
    return build_env(spec, meta)


@pytest.fixture
def cartpole():
    return CartPoleEnv(seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


ACCEPTANCE_LINES = []


def record_criterion(name, ok, detail=""):
    """Remember an acceptance outcome for the end-of-run summary."""
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
