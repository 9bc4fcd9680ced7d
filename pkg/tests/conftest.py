import pytest

_LINES = "_acceptance_lines"


@pytest.fixture(scope="session")
def acceptance_log(request):
    """List of one-line criterion verdicts, echoed in the terminal summary."""
    lines = getattr(request.config, _LINES, None)
    if lines is None:
        lines = []
        setattr(request.config, _LINES, lines)
    return lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, _LINES, None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
