"""
Configuration management for jet-particle registration runs
Single Responsibility: Loads, merges and validates run configuration
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

from .reg_types import InvalidArgumentError, JetRegError, Rectangle

logger = logging.getLogger(__name__)

LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
CONVERGENCE_PAIRINGS = ('zero', 'translated')


class ConfigurationError(JetRegError):
    """Raised when configuration is invalid"""
    pass


@dataclass(frozen=True)
class RegistrationConfig:
    """Configuration container for every command; precedence is flags > file > environment > defaults"""
    jet_order: int = 2
    match_order: int = 2
    grid: int = 4
    sigma: float = 0.25
    sigma_match: float = 0.1
    steps: int = 100
    smooth: float = 1.5
    maxiter: int = 200
    tol: float = 1e-6
    check_tol: float = 1e-4
    seed: int = 0
    threads: int = 1
    out_dir: str = "out"
    fixed: Optional[str] = None
    moving: Optional[str] = None
    preset: str = "none"
    kind: str = "trig"
    region: Optional[str] = None
    resolution: int = 64
    pairing: str = "zero"
    quad_res: int = 512
    log_level: str = "INFO"
    save_trajectory: bool = False
    state: Optional[str] = None

    @classmethod
    def defaults(cls) -> 'RegistrationConfig':
        return cls()

    @classmethod
    def from_environment(cls, base: Optional['RegistrationConfig'] = None) -> 'RegistrationConfig':
        """Apply JETREG_THREADS and JETREG_LOG_LEVEL on top of `base`"""
        base = base or cls.defaults()
        overrides: Dict[str, Any] = {}
        threads = os.getenv("JETREG_THREADS")
        if threads:
            try:
                overrides["threads"] = int(threads)
            except ValueError:
                raise ConfigurationError(f"JETREG_THREADS must be an integer, got '{threads}'")
        log_level = os.getenv("JETREG_LOG_LEVEL")
        if log_level:
            overrides["log_level"] = log_level.upper()
        return base.merged(overrides)

    @classmethod
    def from_json_file(cls, path, base: Optional['RegistrationConfig'] = None) -> 'RegistrationConfig':
        """Overlay the keys of a JSON config file on `base`"""
        base = base or cls.defaults()
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Cannot read config file {path}: {str(e)}")
        if not isinstance(data, dict):
            raise ConfigurationError(f"Config file {path} must contain a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown config keys in {path}: {', '.join(unknown)}")
        logger.debug(f"Loaded {len(data)} config keys from {path}")
        return base.merged(data)

    def merged(self, overrides: Dict[str, Any]) -> 'RegistrationConfig':
        """New config with every non-None override applied, then validated"""
        changes = {key: value for key, value in overrides.items() if value is not None}
        config = replace(self, **changes)
        config._validate()
        return config

    def region_rectangle(self) -> Optional[Rectangle]:
        return Rectangle.parse(self.region) if self.region else None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def _validate(self):
        """Validate configuration values"""
        if self.jet_order not in (0, 1, 2):
            raise ConfigurationError(f"jet order must be 0, 1 or 2, got {self.jet_order}")

        if self.match_order not in (0, 1, 2):
            raise ConfigurationError(f"match order must be 0, 1 or 2, got {self.match_order}")

        if self.match_order > self.jet_order:
            raise ConfigurationError("match order exceeds jet order")

        if self.grid < 1:
            raise ConfigurationError("grid must be at least 1 particle per axis")

        if not self.sigma > 0:
            raise ConfigurationError("sigma must be positive")

        if not self.sigma_match > 0:
            raise ConfigurationError("sigma_match must be positive")

        if self.steps < 1:
            raise ConfigurationError("steps must be at least 1")

        if self.smooth < 0:
            raise ConfigurationError("smooth must be non-negative")

        if self.maxiter < 0:
            raise ConfigurationError("maxiter must be non-negative")

        if not self.tol > 0:
            raise ConfigurationError("tol must be positive")

        if not self.check_tol > 0:
            raise ConfigurationError("check_tol must be positive")

        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1")

        if self.pairing not in CONVERGENCE_PAIRINGS:
            raise ConfigurationError(f"pairing must be one of: {', '.join(CONVERGENCE_PAIRINGS)}")

        if self.log_level not in LOG_LEVELS:
            raise ConfigurationError(f"log level must be one of: {', '.join(LOG_LEVELS)}")

        if self.region:
            try:
                Rectangle.parse(self.region)
            except InvalidArgumentError as e:
                raise ConfigurationError(str(e))
