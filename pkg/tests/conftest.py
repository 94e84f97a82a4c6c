import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gaitmatch.core import KernelSet, ModeKernel  # noqa: E402

ACCEPTANCE_LINES = []


def random_kernel(rng, n, mode_id="k", scale=20.0):
    return ModeKernel(mode_id, rng.normal(0.0, scale, size=(n, 4)))


def random_kernel_set(rng, lengths, scale=20.0):
    return KernelSet(random_kernel(rng, n, f"m{i}", scale) for i, n in enumerate(lengths))


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


@pytest.fixture
def record_acceptance():
    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
