"""Configuration management for parabolic-cf runs."""
import json
import logging
import os
from dataclasses import dataclass, fields
from typing import Any, Dict, List, Optional, Tuple

from src.errors import CertificationDomainError, DomainError, UsageError
from src.models.cdf_engine import SANDWICH_ALPHA

logger = logging.getLogger(__name__)

# Default configuration values
DEFAULT_CONFIG = {
    "alpha": 0.3,
    "alpha_range": None,
    "depth": 20,
    "max_depth": 26,
    "start_depth": 10,
    "depth_step": 2,
    "margin": 1e-9,
    "alpha_lo": 0.17,
    "alpha_hi": 0.45,
    "decimals": 4,
    "steps": 10000,
    "trials": 200,
    "grid": 4096,
    "tol": None,  # None means the operation's own default
    "max_iter": 2000,
    "samples": 100000,
    "bins": 200,
    "seed": 20240601,
    "threads": None,  # None means os.cpu_count()
    "format": "csv",
    "out": None,
}

OUTPUT_FORMATS = ("csv", "json")
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbosity: int = 0) -> None:
    """Set up stderr logging: WARNING by default, INFO with -v, DEBUG with -vv."""
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger().setLevel(level)


class ConfigManager:
    """Loads run defaults from an optional JSON file layered over DEFAULT_CONFIG."""

    def __init__(self, config_file: Optional[str] = None):
        """Initialize configuration manager.

        Args:
            config_file: Path to a JSON configuration file. If None, only the
                built-in defaults are used.
        """
        self.config_file = config_file
        self.config = self._load_config()

    def _load_config(self) -> Dict[str, Any]:
        """Load configuration from file, merged over the defaults.

        Returns:
            Dictionary containing configuration values
        """
        if self.config_file is None:
            return DEFAULT_CONFIG.copy()
        try:
            with open(self.config_file, "r") as f:
                config = json.load(f)
        except FileNotFoundError:
            raise UsageError(f"config file not found: {self.config_file}")
        except json.JSONDecodeError:
            logger.warning("Config file %s is corrupted. Using defaults.", self.config_file)
            return DEFAULT_CONFIG.copy()
        if not isinstance(config, dict):
            logger.warning("Config file %s does not hold an object. Using defaults.", self.config_file)
            return DEFAULT_CONFIG.copy()
        unknown = sorted(set(config) - set(DEFAULT_CONFIG))
        if unknown:
            logger.warning("Ignoring unknown config keys: %s", ", ".join(unknown))
        return {**DEFAULT_CONFIG, **{k: v for k, v in config.items() if k in DEFAULT_CONFIG}}

    def save_config(self, path: str, config: Optional[Dict[str, Any]] = None) -> None:
        """Save configuration to file.

        Args:
            path: Destination of the JSON file
            config: Configuration dictionary to save; the current settings if None
        """
        config = self.config if config is None else config
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w") as f:
            json.dump(config, f, indent=4)
        logger.info("wrote configuration to %s", path)

    def get(self, key: str) -> Any:
        """Get configuration value, or None if the key doesn't exist."""
        return self.config.get(key)

    def update(self, updates: Dict[str, Any]) -> None:
        """Override settings, skipping None values (flags that were not given).

        Args:
            updates: Dictionary of configuration updates
        """
        self.config.update({k: v for k, v in updates.items() if v is not None})

    @property
    def all_settings(self) -> Dict[str, Any]:
        """Get all current configuration settings."""
        return self.config.copy()


def parse_alpha_range(text: str) -> List[float]:
    """Parse ``lo:hi:step`` into the inclusive grid lo, lo+step, ..., hi.

    Raises:
        UsageError: malformed text, lo > hi or step <= 0
    """
    try:
        lo, hi, step = (float(part) for part in text.split(":"))
    except ValueError:
        raise UsageError(f"alpha range must look like lo:hi:step, got {text!r}")
    if step <= 0 or lo > hi:
        raise UsageError(f"invalid alpha range {text!r}: need lo <= hi and step > 0")
    count = int(round((hi - lo) / step)) + 1
    # Rounded so that 0.17 + 3 * 0.01 prints as 0.2 in CSV output.
    values = [round(lo + i * step, 12) for i in range(count)]
    return [v for v in values if v <= hi + 1e-12]


def parse_int_list(text: str) -> List[int]:
    """Parse ``1,2,4`` or ``1..16`` into a list of integers."""
    try:
        if ".." in text:
            first, last = text.split("..")
            return list(range(int(first), int(last) + 1))
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"expected a comma list or a..b range of integers, got {text!r}")


@dataclass
class RunConfig:
    """Validated parameters of one subcommand run."""

    subcommand: str
    alpha: float = DEFAULT_CONFIG["alpha"]
    alphas: Tuple[float, ...] = ()
    depth: int = DEFAULT_CONFIG["depth"]
    max_depth: int = DEFAULT_CONFIG["max_depth"]
    start_depth: int = DEFAULT_CONFIG["start_depth"]
    depth_step: int = DEFAULT_CONFIG["depth_step"]
    margin: float = DEFAULT_CONFIG["margin"]
    alpha_lo: float = DEFAULT_CONFIG["alpha_lo"]
    alpha_hi: float = DEFAULT_CONFIG["alpha_hi"]
    decimals: int = DEFAULT_CONFIG["decimals"]
    steps: int = DEFAULT_CONFIG["steps"]
    trials: int = DEFAULT_CONFIG["trials"]
    grid: int = DEFAULT_CONFIG["grid"]
    tol: Optional[float] = None
    max_iter: int = DEFAULT_CONFIG["max_iter"]
    samples: int = DEFAULT_CONFIG["samples"]
    bins: int = DEFAULT_CONFIG["bins"]
    seed: int = DEFAULT_CONFIG["seed"]
    threads: int = 1
    format: str = DEFAULT_CONFIG["format"]
    out: Optional[str] = None
    depths: Tuple[int, ...] = ()
    r_list: Tuple[int, ...] = ()
    eps: Optional[float] = None
    full_tensor: bool = False
    offspring: Optional[str] = None

    @classmethod
    def from_settings(cls, subcommand: str, settings: Dict[str, Any]) -> "RunConfig":
        """Build a RunConfig from merged settings, ignoring keys it does not know."""
        names = {f.name for f in fields(cls)} - {"subcommand"}
        values = {k: v for k, v in settings.items() if k in names and v is not None}
        if settings.get("threads") is None:
            values["threads"] = os.cpu_count() or 1
        if settings.get("alpha_range"):
            values["alphas"] = tuple(parse_alpha_range(settings["alpha_range"]))
        config = cls(subcommand=subcommand, **values)
        if not config.alphas:
            config.alphas = (float(config.alpha),)
        config.validate()
        return config

    def validate(self) -> None:
        """Check every numeric parameter against the preconditions of its subcommand.

        Raises:
            UsageError: malformed or out-of-range parameters
            DomainError: alpha values outside the domain of the operation
        """
        if self.format not in OUTPUT_FORMATS:
            raise UsageError(f"format must be one of {OUTPUT_FORMATS}, got {self.format!r}")
        for name in ("depth", "max_depth", "start_depth", "depth_step", "steps", "trials",
                     "grid", "max_iter", "samples", "bins", "threads", "decimals"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise UsageError(f"{name} must be a positive integer, got {value!r}")
        if not self.margin > 0:
            raise UsageError(f"margin must be positive, got {self.margin!r}")
        if self.tol is not None and not self.tol > 0:
            raise UsageError(f"tol must be positive, got {self.tol!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise UsageError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if any(not a > 0 for a in self.alphas):
            raise DomainError(f"alpha values must be positive, got {list(self.alphas)}")
        if self.subcommand == "alphac":
            if not self.alpha_lo < self.alpha_hi:
                raise UsageError(f"need alpha_lo < alpha_hi, got {self.alpha_lo} >= {self.alpha_hi}")
            if not SANDWICH_ALPHA < self.alpha_lo or not self.alpha_hi < 0.5:
                raise CertificationDomainError(
                    f"alpha_c search interval [{self.alpha_lo}, {self.alpha_hi}] must lie within (1/6, 1/2)"
                )
        if self.subcommand == "lp" and any(r < 1 for r in self.r_list):
            raise UsageError(f"tensor orders must be at least 1, got {list(self.r_list)}")
        if self.subcommand == "cdf" and any(d < 0 for d in self.depths):
            raise UsageError(f"depths must be non-negative, got {list(self.depths)}")
        if self.eps is not None and not 0.0 <= self.eps <= 1.0:
            raise DomainError(f"eps must lie in [0, 1], got {self.eps}")

    def parameters(self) -> Dict[str, Any]:
        """Parameters echoed into result metadata, in a fixed order."""
        return {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if f.name not in ("out", "threads")
        }
