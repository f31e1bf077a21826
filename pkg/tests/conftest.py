import pytest
import yaml

TINY = {
    "seed": 0,
    "data": {"n_clips": 10, "base_seed": 1},
    "scene": {"T": 3},
    "visual": {"widths": [4, 8, 8], "channels": 8},
    "audio": {"widths": [4, 4, 8, 8, 8]},
    "train": {"epochs": 1, "batch_size": 4, "homographies": "ground_truth"},
}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY))
    return path


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
