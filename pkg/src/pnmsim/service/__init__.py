"""HTTP service wrapper: pydantic schemas, operations, FastAPI app."""

from .app import app, create_app

__all__ = ["app", "create_app"]
