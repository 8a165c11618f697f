import sys
from pathlib import Path

# Make the sibling oracles module importable from every test file.
sys.path.insert(0, str(Path(__file__).parent))

# Verdict lines appended by the acceptance tests; echoed in the terminal
# summary so they are visible regardless of output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.line(line)
