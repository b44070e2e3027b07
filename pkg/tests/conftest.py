"""Shared pytest wiring: surfaces the acceptance gate summary lines."""

gate_lines: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if gate_lines:
        terminalreporter.section("acceptance gate")
        for line in gate_lines:
            terminalreporter.line(line)
