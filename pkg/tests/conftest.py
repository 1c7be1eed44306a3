"""Suite-wide plumbing: session timing and the acceptance summary banner."""

import time

_SESSION_T0 = time.perf_counter()
_ACCEPTANCE_LINES: list[str] = []


def session_elapsed() -> float:
    return time.perf_counter() - _SESSION_T0


def record_acceptance(line: str):
    _ACCEPTANCE_LINES.append(line)


def pytest_collection_modifyitems(config, items):
    # acceptance runs last so its suite-runtime check covers everything else
    items.sort(key=lambda item: item.fspath.basename == "test_acceptance.py")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.line(line)
