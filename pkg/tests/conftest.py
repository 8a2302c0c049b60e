import contextlib

import pytest

# criterion number -> (description, passed)
_ACCEPTANCE: dict[int, tuple[str, bool]] = {}


@pytest.fixture
def criterion():
    """Context manager recording PASS/FAIL for one acceptance criterion."""

    @contextlib.contextmanager
    def record(number: int, description: str):
        _ACCEPTANCE[number] = (description, False)
        yield
        _ACCEPTANCE[number] = (description, True)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        description, passed = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {description}")
