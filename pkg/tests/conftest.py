import pytest

from rmflab.primes import build_prime_table

# filled by test_acceptance; printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def small_table():
    return build_prime_table(10_000)


@pytest.fixture(scope="session")
def table():
    return build_prime_table(1_000_000)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
