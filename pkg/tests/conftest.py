from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stereoplan.planner import assemble_scene  # noqa: E402
from stereoplan.scenegen import preset, preset_scenes, render_stereo  # noqa: E402

PRESETS = [s.name for s in preset_scenes()]

_renders: dict = {}
_scenes: dict = {}


def rendered(name: str):
    """(left, right, truth) for a preset, rendered once per session."""
    if name not in _renders:
        _renders[name] = render_stereo(preset(name))
    return _renders[name]


def assembled(name: str):
    """PlanningScene for a preset with default settings, built once per session."""
    if name not in _scenes:
        left, right, _ = rendered(name)
        _scenes[name] = assemble_scene(left, right)
    return _scenes[name]


@pytest.fixture
def render():
    return rendered


@pytest.fixture
def scene_of():
    return assembled


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
