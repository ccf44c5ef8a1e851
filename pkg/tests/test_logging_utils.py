"""
Logging setup tests
File: tests/test_logging_utils.py
"""
import io
import sys

import pytest

from utils.logging_utils import configure_logging, get_logger


@pytest.fixture
def restore_logging():
    yield
    configure_logging("ERROR")


def test_logs_follow_current_stderr(monkeypatch, restore_logging):
    configured_with = io.StringIO()
    monkeypatch.setattr(sys, "stderr", configured_with)
    configure_logging("WARNING")
    logger = get_logger("bus", vasp="v1")
    configured_with.close()

    current = io.StringIO()
    monkeypatch.setattr(sys, "stderr", current)
    logger.warning("message dropped", reason="loss")
    assert "message dropped" in current.getvalue()
    assert "reason=loss" in current.getvalue()


def test_level_filter_and_json(monkeypatch, restore_logging):
    stream = io.StringIO()
    monkeypatch.setattr(sys, "stderr", stream)
    configure_logging("ERROR", json_output=True)
    get_logger("ca").warning("hidden")
    get_logger("ca").error("shown", serial=7)
    lines = stream.getvalue().splitlines()
    assert len(lines) == 1
    assert '"component": "ca"' in lines[0] and '"serial": 7' in lines[0]
