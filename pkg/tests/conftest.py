import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config import reset_settings  # noqa: E402


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Every test starts from default settings, without a stray hb.yaml."""
    monkeypatch.setenv("HB_CONFIG", os.path.join(os.path.dirname(__file__), "missing.yaml"))
    reset_settings()
    yield
    monkeypatch.undo()
    reset_settings()
