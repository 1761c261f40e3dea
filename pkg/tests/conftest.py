import re
import sys


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion that ran."""
    module = sys.modules.get("test_acceptance")
    verdicts = dict(getattr(module, "VERDICTS", {}))
    for report in terminalreporter.stats.get("failed", []):
        match = re.search(r"test_acceptance\.py::test_(\d\d)_", report.nodeid)
        if match and int(match.group(1)) not in verdicts:
            n = int(match.group(1))
            verdicts[n] = f"CRITERION {n:>2} FAIL  error before a verdict: {report.longrepr.reprcrash.message}"
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for n in sorted(verdicts):
            terminalreporter.write_line(verdicts[n])
