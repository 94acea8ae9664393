import numpy as np
import pytest

from uwdepth import uwsim
from uwdepth.cli import cmd_synth

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_report():
    def record(number: int, title: str, ok: bool, detail: str = ""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}"
        if detail:
            line += f" ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_sequence(tmp_path_factory):
    """A 6-frame 96x72 rendered sequence written to disk with its manifest."""
    scene = uwsim.sequence_scene_dict(width=96, height=72, n_frames=6)
    return cmd_synth(scene, tmp_path_factory.mktemp("small_seq"))
