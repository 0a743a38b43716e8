import pytest

from modematch import wavepacket as wp

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    """Remember a pass/fail line for the end-of-run acceptance summary."""
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def gaussian():
    return wp.build_preset(wp.reference_presets()["gaussian"])


@pytest.fixture(scope="session")
def lorentzian():
    return wp.build_preset(wp.reference_presets()["lorentzian"])


@pytest.fixture(scope="session")
def dsl():
    return wp.build_preset(wp.reference_presets()["dsl"])
