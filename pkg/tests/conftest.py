import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from weaklink import CircuitSpec, JJLink, QPSLink  # noqa: E402
from weaklink.cavity import CavityParams  # noqa: E402

# lines collected by the acceptance suite, printed in the terminal summary
ACCEPTANCE_LINES = {}

L_Q_ENERGY = 20432.68910084765  # inductive energy of an 8 pH wire (GHz)


def sawtooth_spec(chi=0.99995, e0=973.0):
    return CircuitSpec(0.0074, 0.97, 568.0, 452.0, JJLink(e0, chi))


def phase_slip_spec(e_q=60.0):
    return CircuitSpec(0.0052, 0.97, 840.0, 305.0, QPSLink(e_q, L_Q_ENERGY))


def junction_cavity():
    return CavityParams(8.07, 12.02, 1.73, 2.12)


def phase_slip_cavity():
    return CavityParams(8.07, 12.02, 2.19, 2.67)


@pytest.fixture
def jj_spec():
    return sawtooth_spec()


@pytest.fixture
def qps_spec():
    return phase_slip_spec()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
