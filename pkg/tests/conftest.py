import pytest

from vvplab.shatter import ShatterParams, build_instance

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def small_inst():
    """d1=d2=16, B=J=4, eps=0.5: k=32, m=20, n=16."""
    return build_instance(ShatterParams(d1=16, d2=16, B=4, J=4, eps=0.5), seed=0)


@pytest.fixture(scope="session")
def tiny_inst():
    """n = 8 examples, small enough for literal per-labeling loops."""
    return build_instance(ShatterParams(d1=8, d2=16, B=4, J=2, eps=0.5), seed=3)


@pytest.fixture(scope="session")
def signed_inst():
    """Both vector sets random sign vectors (count > dimension)."""
    return build_instance(ShatterParams(d1=12, d2=12, B=4, J=4, eps=0.5), seed=5, max_restarts=500)


@pytest.fixture
def acceptance():
    def record(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
