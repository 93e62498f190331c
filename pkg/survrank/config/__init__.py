"""Configuration management for Survrank."""

from survrank.config.settings import RunConfig, Settings, get_settings, load_run_config

__all__ = ["RunConfig", "Settings", "get_settings", "load_run_config"]
