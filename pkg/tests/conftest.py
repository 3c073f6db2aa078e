from collections import defaultdict

CRITERIA = {
    "1": "Fig 2(a) analytic threshold crossing",
    "2": "Fig 2(b) analytic threshold crossings",
    "3": "asymptotic threshold identity",
    "4": "Fig 3 asymptotic agreement and optimal Gamma ordering",
    "5": "Fig 4 full model vs analytic",
    "6": "Fig 5 full-model evolution",
    "7": "omega_z invariance",
    "8": "property suite",
}

_outcomes = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes[crit].append((report.nodeid.split("::")[-1], report.outcome,
                                dict(report.user_properties).get("detail", "")))


def pytest_runtest_setup(item):
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        item.user_properties.append(("criterion", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit, title in CRITERIA.items():
        results = _outcomes.get(crit)
        if not results:
            tr.write_line(f"criterion {crit}: NOT RUN  {title}")
            continue
        ok = all(outcome == "passed" for _, outcome, _ in results)
        tr.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {title}")
        for name, outcome, detail in results:
            if detail or outcome != "passed":
                tr.write_line(f"    {name} [{outcome}] {detail}")
