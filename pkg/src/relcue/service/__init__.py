"""HTTP facade over the package: one endpoint per pipeline stage."""

from .app import app, create_app

__all__ = ["app", "create_app"]
