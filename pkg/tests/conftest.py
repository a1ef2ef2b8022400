import os

import numpy as np
import pytest

_CRITERIA: dict[str, str] = {}


def pytest_collection_modifyitems(config, items):
    if os.environ.get("CCDC_STRETCH") == "1":
        return
    skip = pytest.mark.skip(reason="stretch rows are opt-in: set CCDC_STRETCH=1")
    for item in items:
        if "stretch" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        terminalreporter.write_line(_CRITERIA[key])


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then return the verdict."""
    def record(key: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _CRITERIA[key] = line
        print(line)
        return ok
    return record


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
