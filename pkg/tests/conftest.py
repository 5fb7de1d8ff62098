"""Shared pytest plumbing for the test suite.

The acceptance tests register one human-readable PASS/FAIL line per
criterion; the hook below replays those lines in the terminal summary so
the verdicts stay visible in a plain ``pytest`` run, where passing tests'
stdout is otherwise swallowed by capture.
"""

from __future__ import annotations

_acceptance_lines: list[str] = []


def record_acceptance(line: str) -> None:
    """Queue one criterion verdict for the end-of-run summary."""
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter) -> None:
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in _acceptance_lines:
        terminalreporter.write_line(line)
