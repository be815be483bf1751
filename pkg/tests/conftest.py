import pytest

_VERDICTS = {}


@pytest.fixture
def verdict():
    """Record a criterion outcome; the terminal summary lists every recorded line."""

    def record(key: str, title: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {key}: {title}"
        if detail:
            line += f" [{detail}]"
        _VERDICTS[key] = line
        print(line)
        return ok

    return record


def _order(key: str):
    num = "".join(ch for ch in key if ch.isdigit())
    return int(num or 0), key


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_VERDICTS, key=_order):
        terminalreporter.write_line(_VERDICTS[key])
