from .config import ServiceConfig
from .app import create_app

__all__ = ["ServiceConfig", "create_app"]
