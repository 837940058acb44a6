"""Shared pytest hooks.

The acceptance tests append one human-readable line per criterion to
``ACCEPTANCE_LINES``; the terminal-summary hook echoes them after the run
so they are visible regardless of output capturing.
"""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
