from importlib import resources
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def sample_dir() -> Path:
    return Path(str(resources.files("sadindex").joinpath("data/sample")))


@pytest.fixture(scope="session")
def lexicon():
    from sadindex.sentiment import load_lexicon

    return load_lexicon()


TOOLS = Path(__file__).parents[1] / "tools"


@pytest.fixture(scope="session")
def golden_tools():
    """The golden-file generator in tools/, imported as a module."""
    import importlib.util

    spec = importlib.util.spec_from_file_location("update_golden", TOOLS / "update_golden.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


# Acceptance results, filled in by tests/test_acceptance.py and echoed at the end of the run.
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
