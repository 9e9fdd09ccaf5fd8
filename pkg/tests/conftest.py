import re
from collections import OrderedDict

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion the test belongs to")
    config._criteria = OrderedDict()


def pytest_collection_modifyitems(config, items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            n, title = mark.args
            config._criteria.setdefault(n, {"title": title, "passed": [], "failed": []})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    entry = item.config._criteria[mark.args[0]]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        name = re.sub(r"^test_", "", item.name)
        (entry["passed"] if rep.passed else entry["failed"]).append(name)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    criteria = getattr(config, "_criteria", {})
    if not criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(criteria):
        entry = criteria[n]
        if not entry["passed"] and not entry["failed"]:
            continue
        status = "FAIL" if entry["failed"] else "PASS"
        detail = f" (failed: {', '.join(entry['failed'])})" if entry["failed"] else ""
        tr.write_line(f"criterion {n:>2} {status}: {entry['title']}{detail}")
