"""
Configuration Management

Configuration and settings for the transition learning toolkit.
"""

from .config import Config, get_config, set_config

__all__ = ["Config", "get_config", "set_config"]
