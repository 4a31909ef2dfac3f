"""Configuration module for the Ripa MM-DG solver."""

from .settings import Settings, get_settings, get_config

__all__ = ["Settings", "get_settings", "get_config"]
