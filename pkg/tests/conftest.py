import pytest

from helpers import make_graph

ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def chain3():
    return make_graph([(1, 2), (2, 3)], crown_jewels=[3], initial=[1])


@pytest.fixture
def record_acceptance(request):
    """Store a one-line verdict for the acceptance summary."""

    def record(label: str, ok: bool, detail: str = ""):
        ACCEPTANCE_RESULTS[label] = (ok, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split(".")[0])):
        ok, detail = ACCEPTANCE_RESULTS[label]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else ""))
