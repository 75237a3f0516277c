"""Terminal summary for the acceptance suite: one PASS/FAIL line per
acceptance criterion, derived from the test outcomes."""

CRITERIA = {
    "test_criterion_1": "1 losslessness across posQ and models",
    "test_criterion_2": "2 bit-exact CDF conformance",
    "test_criterion_3": "3 rANS round-trip, rate bound, decode fuzz",
    "test_criterion_4": "4 deep-codec size formula and round-trip",
    "test_criterion_5": "5 split-depth rule",
    "test_criterion_6": "6 fitted-model shallow rate improvement",
    "test_criterion_7": "7 streaming simulator vs oracle",
    "test_criterion_8": "8 wire-format identity, fuzz, golden frame",
    "test_criterion_9": "9 cross-process model sharing and tamper detection",
}

_results: dict = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.skipped):
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    for prefix in CRITERIA:
        if name.startswith(prefix):
            outcome = "SKIP" if report.skipped else report.outcome.upper()
            # FAILED beats PASSED beats SKIP (a skipped gated extension
            # does not mask a passing core check)
            rank = {"FAILED": 3, "PASSED": 2, "SKIP": 1}
            prev = _results.get(prefix, "")
            if rank.get(outcome, 0) > rank.get(prev, 0):
                _results[prefix] = outcome
            break


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for prefix, label in CRITERIA.items():
        outcome = _results.get(prefix)
        if outcome is None:
            continue
        status = {"PASSED": "PASS", "FAILED": "FAIL", "SKIP": "SKIP"}.get(
            outcome, outcome
        )
        terminalreporter.write_line(f"criterion {label}: {status}")
