#!/usr/bin/env python3
"""
Configuration Management

Handles configuration settings for planning, sampling and experiments.
"""

import json
import logging
import os
from pathlib import Path
from typing import Dict, Any, List

from dotenv import load_dotenv


def _env_flag(name: str) -> bool:
    return os.getenv(name, "false").lower() in ("1", "true", "yes")


class Config:
    """Configuration manager for the transition learning toolkit"""

    def __init__(self, config_dir: str = None):
        """
        Initialize configuration

        Args:
            config_dir: Optional custom config directory
        """
        self.logger = logging.getLogger("BayesITL.Config")

        if config_dir:
            self.config_dir = Path(config_dir)
        else:
            self.config_dir = Path(__file__).parent

        self.config_file = self.config_dir / "config.json"

        # Environment overrides live next to the config file
        env_file = self.config_dir / ".env"
        if env_file.exists():
            load_dotenv(env_file)

        self.defaults = {
            "planning": {
                "tol": 1e-10,
                "max_iters": 100000,
                "exact_eval_every": 10
            },
            "env": {
                "n_decision_states": 15,
                "n_actions": 6,
                "discount": 0.95,
                "skew_mix": 0.5,
                "skew_concentration": 0.3,
                "flat_concentration": 20.0,
                "reward_low": 0.0,
                "reward_high": 15.0,
                "reward_mode": "state_action",
                "seed": 0,
                "reference_targets": {"0": 0, "3": 3, "4": 6},
                "reference_seed": 38,
                "reference_fingerprint": "a529453d4557d07bc609921c4d12cbba",
                "max_tries": 100000
            },
            "data": {
                "horizon": 20
            },
            "posterior": {
                "prior_concentration": 1.0
            },
            "sampler": {
                "anchor_mode": "mle",
                "ball_source": "q_star",
                "equality_mode": "pin",
                "max_row_draws": 50000,
                "max_outer_rounds": 20,
                "gap_factor": 1.25,
                "window_factor": 0.8,
                "delta_floor": 1e-6,
                "draw_block": 256,
                "margin_tol": 1e-9
            },
            "experiment": {
                "epsilons": [0.0, 3.0, 4.0],
                "episode_counts": [15, 300],
                "n_datasets": 1000,
                "n_posterior_samples": 1000,
                "methods": ["mle", "posterior", "constrained"],
                "max_flag_fraction": 0.01,
                "progress": False
            },
            "cache": {
                "enabled": True,
                "directory": os.getenv("BAYES_ITL_CACHE_DIR", str(Path.home() / ".cache" / "bayes_itl"))
            },
            "logging": {
                "level": os.getenv("BAYES_ITL_LOG_LEVEL", "INFO"),
                "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
                "file": str(self.config_dir / "bayes_itl.log"),
                "max_size_mb": 10,
                "backup_count": 5
            },
            "api": {
                "host": "127.0.0.1",
                "port": 8000,
                "results_root": "results"
            }
        }

        self.config = self._load_config()
        self._setup_logging()

        self.logger.debug("Configuration loaded")

    def _load_config(self) -> Dict[str, Any]:
        """Load configuration from file or fall back to defaults"""
        try:
            if self.config_file.exists():
                with open(self.config_file, 'r') as f:
                    user_config = json.load(f)

                config = self._deep_merge(self.defaults, user_config)
                self.logger.debug(f"Configuration loaded from {self.config_file}")
                return config

            self.logger.debug(f"No configuration at {self.config_file}, using defaults")
            return self._deep_merge(self.defaults, {})

        except Exception as e:
            self.logger.warning(f"Error loading config, using defaults: {e}")
            return self._deep_merge(self.defaults, {})

    def _deep_merge(self, base: Dict, override: Dict) -> Dict:
        """Deep merge two dictionaries without mutating either"""
        result = {}
        for key, value in base.items():
            result[key] = self._deep_merge(value, {}) if isinstance(value, dict) else value

        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._deep_merge(result[key], value)
            else:
                result[key] = value

        return result

    def _setup_logging(self):
        """Setup logging based on configuration"""
        log_config = self.config.get("logging", {})

        logger = logging.getLogger("BayesITL")
        logger.setLevel(getattr(logging, str(log_config.get("level", "INFO")).upper(), logging.INFO))

        # Only attach handlers when explicitly enabled so importing applications keep control
        if not _env_flag("BAYES_ITL_ENABLE_LOGGING"):
            return

        for handler in logger.handlers[:]:
            logger.removeHandler(handler)

        formatter = logging.Formatter(log_config.get("format", "%(asctime)s - %(name)s - %(levelname)s - %(message)s"))

        from logging.handlers import RotatingFileHandler
        log_file = Path(log_config.get("file", "bayes_itl.log"))
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=log_config.get("max_size_mb", 10) * 1024 * 1024,
            backupCount=log_config.get("backup_count", 5)
        )
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

    def get(self, key_path: str, default: Any = None) -> Any:
        """
        Get configuration value using dot notation

        Args:
            key_path: Dot-separated path to config value (e.g., 'sampler.gap_factor')
            default: Default value if key not found

        Returns:
            Configuration value
        """
        try:
            value = self.config
            for key in key_path.split('.'):
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key_path: str, value: Any) -> bool:
        """
        Set configuration value using dot notation

        Args:
            key_path: Dot-separated path to config value
            value: Value to set

        Returns:
            True if successful
        """
        try:
            keys = key_path.split('.')
            target = self.config

            for key in keys[:-1]:
                if key not in target:
                    target[key] = {}
                target = target[key]

            target[keys[-1]] = value
            return True

        except Exception as e:
            self.logger.error(f"Error setting config value {key_path}: {e}")
            return False

    def get_cache_dir(self) -> Path:
        """Get cache directory path"""
        cache_dir = Path(self.get("cache.directory"))
        cache_dir.mkdir(parents=True, exist_ok=True)
        return cache_dir

    def validate(self) -> List[str]:
        """
        Validate configuration

        Returns:
            List of validation errors (empty if valid)
        """
        errors = []

        if self.get("planning.tol", 0) <= 0:
            errors.append("planning.tol must be positive")
        if self.get("planning.max_iters", 0) < 1:
            errors.append("planning.max_iters must be at least 1")

        if self.get("sampler.anchor_mode") not in ("mle", "sample"):
            errors.append("sampler.anchor_mode must be 'mle' or 'sample'")
        if self.get("sampler.ball_source") not in ("q_star", "q_expert"):
            errors.append("sampler.ball_source must be 'q_star' or 'q_expert'")
        if self.get("sampler.equality_mode") not in ("pin", "tolerance"):
            errors.append("sampler.equality_mode must be 'pin' or 'tolerance'")
        for key in ("max_row_draws", "max_outer_rounds", "draw_block"):
            if self.get(f"sampler.{key}", 0) < 1:
                errors.append(f"sampler.{key} must be positive")
        if not self.get("sampler.gap_factor", 0) >= 1:
            errors.append("sampler.gap_factor must be at least 1")
        if not 0 < self.get("sampler.window_factor", 0) <= 1:
            errors.append("sampler.window_factor must lie in (0, 1]")
        if not self.get("sampler.delta_floor", 0) > 0:
            errors.append("sampler.delta_floor must be positive")
        if self.get("sampler.margin_tol", 0) < 0:
            errors.append("sampler.margin_tol must be non-negative")

        seed = self.get("env.reference_seed")
        if seed is not None and not (isinstance(seed, int) and seed >= 0):
            errors.append("env.reference_seed must be a non-negative integer")

        if not self.get("experiment.methods"):
            errors.append("experiment.methods must not be empty")

        return errors


# Global configuration instance
_config_instance = None


def get_config() -> Config:
    """Get global configuration instance"""
    global _config_instance
    if _config_instance is None:
        _config_instance = Config()
    return _config_instance


def set_config(config: Config):
    """Set global configuration instance"""
    global _config_instance
    _config_instance = config
