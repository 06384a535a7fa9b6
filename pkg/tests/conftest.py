acceptance_results = []


def record_acceptance(name: str, passed: bool, detail: str = ""):
    acceptance_results.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in acceptance_results:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{status}  {name}: {detail}")
