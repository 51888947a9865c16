from .logging_config import RunScopeFilter, setup_logging

__all__ = ["RunScopeFilter", "setup_logging"]
