"""Settings, logging and worker resolution."""
from __future__ import annotations
import json
import logging
from pathlib import Path

import pytest

from depcam.cli import resolve_workers
from depcam.config import Settings, settings
from depcam.errors import UsageError
from depcam.utils import FILE_ONLY, logger, set_debug


def test_env_prefix(monkeypatch, tmp_path: Path) -> None:
    monkeypatch.setenv("DEPCAM_CV_WORKERS", "4")
    monkeypatch.setenv("DEPCAM_LOGS_DIR", str(tmp_path / "logs"))
    s = Settings()
    assert s.cv_workers == 4
    assert s.logs_dir == tmp_path / "logs"


def test_config_file_is_merged(tmp_path: Path) -> None:
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"cv_workers": 3, "debug": True, "no_such_key": 1}))
    s = Settings(config_file=path, home_dir=tmp_path, logs_dir=tmp_path / "logs")
    s._load_from_config_file()
    assert s.cv_workers == 3
    assert s.debug is True
    assert not hasattr(s, "no_such_key")


def test_malformed_config_file_is_ignored(tmp_path: Path) -> None:
    path = tmp_path / "config.json"
    path.write_text("{not json")
    s = Settings(config_file=path, home_dir=tmp_path, logs_dir=tmp_path / "logs")
    s._load_from_config_file()
    assert s.cv_workers == 1


def test_ensure_directories(tmp_path: Path) -> None:
    s = Settings(home_dir=tmp_path / "home", logs_dir=tmp_path / "home" / "logs")
    assert s.ensure_directories()
    assert (tmp_path / "home" / "logs").is_dir()

    blocker = tmp_path / "file"
    blocker.write_text("")
    assert not Settings(home_dir=blocker / "x", logs_dir=blocker / "y").ensure_directories()


def test_set_debug_toggles_level() -> None:
    try:
        set_debug(True)
        assert logger.level == logging.DEBUG
        assert settings.debug
    finally:
        set_debug(False)
    assert logger.level == logging.INFO


def test_console_handler_skips_file_only_records() -> None:
    console = [h for h in logger.handlers if type(h) is logging.StreamHandler]
    assert console
    plain = logging.LogRecord("depcam", logging.ERROR, __file__, 1, "boom", None, None)
    quiet = logging.LogRecord("depcam", logging.ERROR, __file__, 1, "boom", None, None)
    quiet.__dict__.update(FILE_ONLY)
    for h in console:
        assert h.filter(plain)
        assert not h.filter(quiet)


# ── workers ────────────────────────────────────────────────────────────

def test_resolve_workers(monkeypatch) -> None:
    monkeypatch.setattr(settings, "cv_workers", 2)
    assert resolve_workers(None) == 2
    assert resolve_workers(3) == 3
    assert resolve_workers(0) >= 1
    with pytest.raises(UsageError):
        resolve_workers(-1)
