"""Shipped example documents (Tractor Implement Management baling)."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def path(name: str = "tim") -> Path:
    """Directory holding the named fixture set."""
    return Path(str(resources.files(__name__).joinpath(name)))
