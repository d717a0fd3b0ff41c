"""HTTP compute service exposing the simulation pipelines."""

from .app import app, create_app

__all__ = ["app", "create_app"]
