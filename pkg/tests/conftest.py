from hypothesis import HealthCheck, settings

# the first call of each compiled kernel is slow; per-example deadlines would flake
settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
