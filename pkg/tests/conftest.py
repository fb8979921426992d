ACCEPTANCE_PREFIX = "tests/test_acceptance.py"


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and ACCEPTANCE_PREFIX in report.nodeid:
        status = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\n[{status}] {name}", flush=True)
