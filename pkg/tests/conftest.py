import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> [title, passed so far, detail lines]
_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.fixture
def criterion_detail(request):
    """Attach a measured value to the criterion line printed at the end of the run."""
    marker = request.node.get_closest_marker("criterion")

    def note(text):
        _CRITERIA.setdefault(marker.args[0], [marker.args[1], True, []])[2].append(text)

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    entry = _CRITERIA.setdefault(marker.args[0], [marker.args[1], True, []])
    entry[1] = entry[1] and rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, details = _CRITERIA[number]
        extra = f" [{'; '.join(details)}]" if details else ""
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {title}{extra}")
