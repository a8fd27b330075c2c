import sys
from pathlib import Path

# oracles.py and helpers live next to the tests
sys.path.insert(0, str(Path(__file__).resolve().parent))


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.VERDICTS:
        terminalreporter.section("acceptance gate")
        for line in test_acceptance.VERDICTS:
            terminalreporter.write_line(line)
