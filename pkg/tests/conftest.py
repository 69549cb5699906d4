import pytest

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def record(num: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[num] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[num]
        terminalreporter.write_line(
            f"[{'PASS' if passed else 'FAIL'}] criterion {num:2d} {title}: {detail}")


@pytest.fixture
def tmp_out(tmp_path):
    return str(tmp_path / "out")
