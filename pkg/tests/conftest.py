import pytest

from noisy_target.harness.config import load_config

TINY_INI = """\
[corpus]
duration_s = 0.25
train_count = 4
val_count = 2
test_count = 3
noise_clips = 8
noise_duration_s = 0.5

[train]
epochs = 1
batch_size = 2
learning_rate = 1e-3
hidden_sizes = 8
context_frames = 1

[experiment]
seed = 5
sweep_snrs = 0, inf
sweep_families = pink, band
"""


@pytest.fixture
def tiny_ini(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY_INI)
    return path


@pytest.fixture
def tiny_cfg(tiny_ini):
    return load_config(tiny_ini)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
