import warnings

import pytest

from sitrec.synthetic import generate_synthetic_dataset

# torch warns when wrapping read-only numpy arrays; the tensors are never written
warnings.filterwarnings("ignore", message="The given NumPy array is not writable")

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, name: str, passed: bool, detail: str = "") -> None:
    line = f"criterion {number} [{name}]: {'PASS' if passed else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_data(tmp_path_factory):
    """A small planted dataset with videos, shared by the fast tests."""
    return generate_synthetic_dataset(tmp_path_factory.mktemp("small"), seed=3, frames_per_verb=30, n_videos=10)
