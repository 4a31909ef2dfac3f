"""CLI adapters package."""

from .commands import create_cli_app

__all__ = ["create_cli_app"]
