import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("ab")), k)):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{status}  {key:>3}  {detail}")
