import configparser
import os
import re
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, Optional, Tuple

from classes.errors import ConfigError
from pde_solver import SolverConfig
from verifier import VerificationConfig

DEFAULT_SECTION = "run"
_HEADER = re.compile(r"^\s*\[", re.MULTILINE)

# CLI spellings of the two bound methods
METHOD_NAMES: Dict[str, Tuple[str, ...]] = {
    "worst": ("worst_case",),
    "eig": ("eigenvalue",),
    "both": ("worst_case", "eigenvalue"),
}


def parse_convergence(text: str) -> Tuple[int, ...]:
    """'8,16,32' -> (8, 16, 32)"""
    try:
        ns = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as e:
        raise ConfigError(f"Invalid convergence list '{text}': {e}") from e
    if not ns or min(ns) < 1:
        raise ConfigError(f"Invalid convergence list '{text}'")
    return ns


def _method(text: str) -> str:
    if text not in METHOD_NAMES:
        raise ConfigError(f"Invalid method '{text}', expected one of {sorted(METHOD_NAMES)}")
    return text


@dataclass(frozen=True)
class RunSettings:
    """
    Everything a single CLI run needs. Built-in defaults are the field defaults;
    a config file overrides them and command-line flags override both.
    """

    ic: Optional[str] = None
    modes: int = 128
    dt: float = 1e-6
    t_end: float = 0.05
    method: str = "eig"
    eig_n: Optional[int] = None
    threshold: float = 0.5
    horizon: Optional[float] = None
    reopt_every: int = 1000
    record_every: Optional[int] = None
    out: str = "results"
    workers: int = 1
    residual_safety: float = 1.0
    residual_samples: int = 3
    verbosity: int = 1
    convergence: Optional[Tuple[int, ...]] = None
    log_every: int = 1000

    @property
    def methods(self) -> Tuple[str, ...]:
        return METHOD_NAMES[self.method]

    def solver_config(self) -> SolverConfig:
        return SolverConfig(n_modes=self.modes, dt=self.dt, t_end=self.t_end)

    def verification_config(self, method: str) -> VerificationConfig:
        return VerificationConfig(
            solver=self.solver_config(),
            method=method,
            smallness_threshold=self.threshold,
            time_horizon=self.horizon,
            eig_n=self.eig_n,
            reoptimize_every=self.reopt_every,
            residual_samples=self.residual_samples,
            residual_safety=self.residual_safety,
            workers=self.workers,
            log_every=self.log_every,
        )


_CONVERTERS: Dict[str, Callable[[str], Any]] = {
    "ic": str,
    "modes": int,
    "dt": float,
    "t_end": float,
    "method": _method,
    "eig_n": int,
    "threshold": float,
    "horizon": float,
    "reopt_every": int,
    "record_every": int,
    "out": str,
    "workers": int,
    "residual_safety": float,
    "residual_samples": int,
    "verbosity": int,
    "convergence": parse_convergence,
    "log_every": int,
}


def load_config_file(filepath: str) -> Dict[str, Any]:
    """
    Reads a key=value run file. A section header is optional; keys outside a
    header belong to [run], which is the only section read.
    """
    if not os.path.isfile(filepath):
        raise ConfigError(f"Config file not found: '{filepath}'")
    with open(filepath, "r", encoding="utf-8") as f:
        text = f.read()
    if not _HEADER.search(text):
        text = f"[{DEFAULT_SECTION}]\n{text}"

    config = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        config.read_string(text, source=filepath)
    except configparser.Error as e:
        raise ConfigError(f"Malformed config file '{filepath}': {e}") from e
    if not config.has_section(DEFAULT_SECTION):
        raise ConfigError(f"Config file '{filepath}' has no [{DEFAULT_SECTION}] section")

    values: Dict[str, Any] = {}
    for key, raw in config.items(DEFAULT_SECTION):
        values[key] = _convert(key, raw, filepath)
    return values


def _convert(key: str, raw: str, source: str) -> Any:
    if key not in _CONVERTERS:
        raise ConfigError(f"Unknown key '{key}' in '{source}'")
    try:
        return _CONVERTERS[key](raw.strip())
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"Invalid value for '{key}' in '{source}': '{raw}'") from e


def resolve(file_values: Optional[Dict[str, Any]] = None,
            flag_values: Optional[Dict[str, Any]] = None) -> RunSettings:
    """defaults < config file < flags; flags left at None do not override."""
    settings = RunSettings()
    if file_values:
        settings = replace(settings, **file_values)
    if flag_values:
        unknown = set(flag_values) - set(_CONVERTERS)
        if unknown:
            raise ConfigError(f"Unknown settings: {sorted(unknown)}")
        settings = replace(settings, **{k: v for k, v in flag_values.items() if v is not None})
    return settings
