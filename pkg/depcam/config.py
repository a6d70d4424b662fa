import json
from pathlib import Path
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Ambient runtime knobs. Model hyperparameters live in FitConfig, never here."""

    model_config = SettingsConfigDict(env_prefix="DEPCAM_", case_sensitive=False)

    app_name: str = "depcam"

    home_dir: Path = Field(default_factory=lambda: Path.home() / ".depcam")
    config_file: Path = Field(default_factory=lambda: Path.home() / ".depcam" / "config.json")
    logs_dir: Path = Field(default_factory=lambda: Path.home() / ".depcam" / "logs")

    debug: bool = False

    # cross-validation fan-out; 0 means one worker per physical core
    cv_workers: int = 1

    # ── Persistence helpers ────────────────────────────────────────────
    def ensure_directories(self) -> bool:
        try:
            self.home_dir.mkdir(parents=True, exist_ok=True)
            self.logs_dir.mkdir(parents=True, exist_ok=True)
        except OSError:
            return False
        return True

    def _load_from_config_file(self) -> None:
        """Merge ~/.depcam/config.json on top of defaults/env."""
        try:
            if not self.config_file.exists():
                return
            data = json.loads(self.config_file.read_text() or "{}")
        except Exception:
            return
        for k, v in data.items():
            if hasattr(self, k):
                try:
                    setattr(self, k, v)
                except Exception:
                    pass


settings = Settings()
settings.ensure_directories()
settings._load_from_config_file()
