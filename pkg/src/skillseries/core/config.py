"""Run configuration loaded from TOML with baked-in defaults."""

import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ImportError:
    import tomli as tomllib

import tomli_w

from skillseries.core.errors import ConfigError
from skillseries.utils.files import atomic_write_bytes

logger = logging.getLogger(__name__)

FAMILY_NAMES: tuple[str, ...] = ("SMT", "DCT", "DFT", "ApEn")

DEFAULT_COMBINATIONS: tuple[tuple[str, ...], ...] = (
    ("SMT",),
    ("DCT",),
    ("DFT",),
    ("ApEn",),
    ("SMT", "DCT"),
    ("SMT", "DFT"),
    ("SMT", "ApEn"),
    ("SMT", "DCT", "DFT"),
    ("DCT", "DFT"),
    ("DCT", "DFT", "ApEn"),
    ("SMT", "DCT", "DFT", "ApEn"),
)

THREADS_ENV = "SKILLSERIES_THREADS"


@dataclass
class FamilySettings:
    """Model and extraction knobs for one feature family."""

    k_classify: int
    k_predict: int
    C: float
    epsilon: float = 0.1

    # Extraction; which keys apply depends on the family
    q: int = 50
    m: int = 1
    tau: int = 1
    radii: list[float] = field(default_factory=lambda: [0.1, 0.13, 0.16, 0.19, 0.22, 0.25])
    radius_mode: str = "StdScaled"
    n_windows: int = 10
    gray_levels: int = 8

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def default_family_settings() -> dict[str, FamilySettings]:
    """Per-family defaults: PCA components for classification/prediction and SVR C."""
    return {
        "SMT": FamilySettings(k_classify=50, k_predict=10, C=1e2),
        "DCT": FamilySettings(k_classify=150, k_predict=1000, C=1e-6),
        "DFT": FamilySettings(k_classify=150, k_predict=250, C=1e-6),
        "ApEn": FamilySettings(k_classify=40, k_predict=40, C=1e4),
    }


@dataclass
class RunConfig:
    """Everything a run needs, with every default filled in."""

    # Run
    dataset_root: Optional[str] = None
    task: str = "Suturing"
    scheme: str = "LOSO"
    families: list[str] = field(default_factory=lambda: list(FAMILY_NAMES))
    combinations: list[list[str]] = field(
        default_factory=lambda: [list(c) for c in DEFAULT_COMBINATIONS]
    )
    repeats: int = 20
    seed: int = 0
    rho_mode: str = "pooled"
    p_mode: str = "t"
    threads: int = 4
    out_dir: str = "results"
    svr_tol: float = 1e-8
    svr_max_iter: int = 500

    # Families
    family_settings: dict[str, FamilySettings] = field(default_factory=default_family_settings)

    # Highlights
    window_length: int = 100
    stride: int = 25
    criterion: str = "GRS"

    # Logging
    log_level: str = "INFO"
    log_file: Optional[str] = None

    def family(self, name: str) -> FamilySettings:
        try:
            return self.family_settings[name]
        except KeyError as e:
            raise ConfigError(f"No settings for feature family {name!r}", key="families") from e

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Copy with the given non-None values replaced (CLI flags)."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def validate(self) -> None:
        """Reject out-of-range values, naming the offending key."""
        if self.scheme.upper() not in ("LOSO", "LOUO"):
            raise ConfigError(f"Unknown scheme {self.scheme!r}", key="run.scheme")
        if self.rho_mode not in ("pooled", "per_fold"):
            raise ConfigError(f"Unknown rho_mode {self.rho_mode!r}", key="run.rho_mode")
        if self.p_mode not in ("t", "permutation"):
            raise ConfigError(f"Unknown p_mode {self.p_mode!r}", key="run.p_mode")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1", key="run.repeats")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1", key="run.threads")
        if self.svr_tol <= 0 or self.svr_max_iter < 1:
            raise ConfigError("SVR tolerance and iteration cap must be positive", key="run.svr")
        if self.window_length < 1 or self.stride < 1:
            raise ConfigError("window and stride must be >= 1", key="highlights")

        for name in self.families:
            if name not in FAMILY_NAMES:
                raise ConfigError(f"Unknown feature family {name!r}", key="run.families")
        for combination in self.combinations:
            if not combination or any(name not in FAMILY_NAMES for name in combination):
                raise ConfigError(
                    f"Bad feature combination {combination!r}", key="run.combinations"
                )

        for name, settings in self.family_settings.items():
            key = f"families.{name}"
            if settings.k_classify < 1 or settings.k_predict < 1:
                raise ConfigError("PCA component counts must be >= 1", key=key)
            if settings.C <= 0:
                raise ConfigError("C must be > 0", key=f"{key}.C")
            if settings.epsilon < 0:
                raise ConfigError("epsilon must be >= 0", key=f"{key}.epsilon")
            if settings.q < 1:
                raise ConfigError("q must be >= 1", key=f"{key}.q")
            if settings.radius_mode not in ("StdScaled", "Absolute"):
                raise ConfigError(
                    f"Unknown radius_mode {settings.radius_mode!r}", key=f"{key}.radius_mode"
                )

    def effective_threads(self) -> int:
        """Configured thread count, capped by SKILLSERIES_THREADS when set."""
        cap = os.environ.get(THREADS_ENV)
        if not cap:
            return self.threads
        try:
            return max(1, min(self.threads, int(cap)))
        except ValueError as e:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {cap!r}") from e

    def to_dict(self) -> dict[str, Any]:
        """TOML-ready document (None values omitted)."""
        run = {
            "task": self.task,
            "scheme": self.scheme,
            "families": list(self.families),
            "combinations": [list(c) for c in self.combinations],
            "repeats": self.repeats,
            "seed": self.seed,
            "rho_mode": self.rho_mode,
            "p_mode": self.p_mode,
            "threads": self.threads,
            "out_dir": self.out_dir,
            "svr_tol": self.svr_tol,
            "svr_max_iter": self.svr_max_iter,
        }
        if self.dataset_root is not None:
            run["dataset_root"] = self.dataset_root
        logging_section: dict[str, Any] = {"level": self.log_level}
        if self.log_file is not None:
            logging_section["file"] = self.log_file
        return {
            "run": run,
            "families": {name: s.to_dict() for name, s in self.family_settings.items()},
            "highlights": {
                "window_length": self.window_length,
                "stride": self.stride,
                "criterion": self.criterion,
            },
            "logging": logging_section,
        }


class ConfigManager:
    """Load a RunConfig from a TOML file, or write the default one."""

    def __init__(self, config_path: Optional[str] = None) -> None:
        self.config_path = Path(config_path).expanduser() if config_path else None
        self.config = RunConfig()

    def load(self) -> RunConfig:
        """Load configuration from file (defaults only when no path is set)."""
        if self.config_path is None:
            return self.config
        if not self.config_path.exists():
            raise ConfigError(f"Config file not found: {self.config_path}")

        try:
            with open(self.config_path, "rb") as f:
                data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Failed to parse config: {e}", path=str(self.config_path)) from e

        self._update_config(data)
        logger.debug(f"Loaded config from {self.config_path}")
        return self.config

    def _update_config(self, data: dict[str, Any]) -> None:
        """Apply section values over the defaults."""
        run = data.get("run", {})
        for key in (
            "dataset_root",
            "task",
            "scheme",
            "families",
            "combinations",
            "repeats",
            "seed",
            "rho_mode",
            "p_mode",
            "threads",
            "out_dir",
            "svr_tol",
            "svr_max_iter",
        ):
            if key in run:
                setattr(self.config, key, run[key])

        # Families section
        known = {f.name for f in fields(FamilySettings)}
        for name, section in data.get("families", {}).items():
            if name not in FAMILY_NAMES:
                raise ConfigError(f"Unknown feature family {name!r}", key=f"families.{name}")
            unknown = set(section) - known
            if unknown:
                raise ConfigError(
                    f"Unknown keys {sorted(unknown)}", key=f"families.{name}"
                )
            current = self.config.family_settings[name]
            self.config.family_settings[name] = replace(current, **section)

        # Highlights section
        highlights = data.get("highlights", {})
        self.config.window_length = highlights.get("window_length", self.config.window_length)
        self.config.stride = highlights.get("stride", self.config.stride)
        self.config.criterion = highlights.get("criterion", self.config.criterion)

        # Logging section
        logging_section = data.get("logging", {})
        self.config.log_level = logging_section.get("level", self.config.log_level)
        self.config.log_file = logging_section.get("file", self.config.log_file)

    def create_default_config(self, path: Path) -> Path:
        """Write the default configuration file."""
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            tomli_w.dump(RunConfig().to_dict(), f)
        return path


def dump_config(config: RunConfig, path: Path) -> None:
    """Write a resolved configuration next to run outputs."""
    atomic_write_bytes(path, tomli_w.dumps(config.to_dict()).encode("utf-8"))
