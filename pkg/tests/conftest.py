import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# (label, passed, detail) lines filled in by the acceptance tests
ACCEPTANCE = []


def record(label, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} {label}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1][1:])):
            terminalreporter.write_line(line)
