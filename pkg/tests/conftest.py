import pytest

_criteria: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.failed or (rep.when == "call" and rep.passed) or rep.skipped:
        verdict = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        detail = getattr(item, "criterion_detail", "")
        # a failure in any phase wins over an earlier pass
        if _criteria.get(number, ("", "", ""))[1] != "FAIL":
            _criteria[number] = (title, verdict, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, verdict, detail = _criteria[number]
        line = f"criterion {number} [{verdict}] {title}"
        terminalreporter.write_line(line + (f" :: {detail}" if detail else ""))


@pytest.fixture
def detail(request):
    """Attach a one-line measurement to the criterion summary."""
    def record(text):
        request.node.criterion_detail = text
    return record


@pytest.fixture(scope="session")
def desk(tmp_path_factory):
    from ocnna.fixture import build_desk_fixture
    fx = build_desk_fixture()
    paths = fx.save(tmp_path_factory.mktemp("desk"))
    return fx, paths
