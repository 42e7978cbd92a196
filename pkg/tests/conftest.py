import os

# keep the suite deterministic and single-process unless the caller asks otherwise
os.environ.setdefault("WSBM_THREADS", "1")

CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[k])
