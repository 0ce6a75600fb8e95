from __future__ import annotations

import pytest

from audexp.fixtures import demo_spec, write_demo_stimuli


@pytest.fixture()
def stim_root(tmp_path):
    root = tmp_path / "stim"
    write_demo_stimuli(root)
    return root


@pytest.fixture()
def demo(stim_root):
    return demo_spec(), stim_root
