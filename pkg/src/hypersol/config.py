"""Run configuration files and reproducibility manifests.

Configuration lives in INI files with a fixed section list.  Values are
kept as strings internally so that ``load -> save`` is an identity on the
semantic content; typed accessors build the dataclasses used by the rest
of the package.  Every command that writes artifacts also drops a
``manifest.json`` next to them recording the configuration hash, package
version, seed registry, and host metadata, so a result directory is
self-describing.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field

from . import __version__
from .bench import MIN_REPETITIONS
from .hpo import SearchBudget
from .hybrid import CaseConfig
from .surrogate import TrainConfig
from .uq import SPEED_SPREAD, UPSTREAM_SPEED_NOMINAL

SECTIONS = (
    "atmosphere",
    "mesh",
    "bc",
    "solver",
    "surrogate",
    "search",
    "bench",
    "uq",
)

ENV_THREADS = "HYPERSOL_THREADS"
ENV_SEED = "HYPERSOL_SEED"

_DEFAULTS: dict[str, dict[str, str]] = {
    "atmosphere": {
        "preset": "toy",
        "element_fractions": "0.8 0.2",
    },
    "mesh": {
        "n_radial": "30",
        "n_angular": "100",
        "r_body": "0.01",
        "r_outer": "0.045",
        "stretch": "1.05",
    },
    "bc": {
        "pressure": "35737.40",
        "temperature": "216.57",
        "speed": "4930.83",
    },
    "solver": {
        "cfl": "0.45",
        "tol_steady": "1e-8",
        "max_iter": "40000",
        "shock_sensor": "2.0",
    },
    "surrogate": {
        "n_train": "20000",
        "n_test": "2000",
        "n_layers": "5",
        "n_units": "20",
        "activation": "tanh",
        "optimizer": "adam",
        "learning_rate": "3e-3",
        "lr_decay": "0.999",
        "epochs": "6000",
        "batch_size": "500",
        "loss": "l2",
        "n_seeds": "1",
        "seed": "0",
    },
    "search": {
        "n_trials": "100",
        "n_train": "4000",
        "n_test": "1000",
        "epochs": "20",
        "steps_cap": "20000",
        "seeds_cap": "3",
        "percentile": "0.10",
        "top_k": "5",
        "seed": "0",
    },
    "bench": {
        "repetitions": str(MIN_REPETITIONS),
        "equilibrium_max_n": "100000",
        "threads": "1",
        "seed": "0",
    },
    "uq": {
        "n_nodes": "20",
        "speed": str(UPSTREAM_SPEED_NOMINAL),
        "spread": str(SPEED_SPREAD),
        "strategy": "nn-warm",
        "low_n_radial": "15",
        "low_n_angular": "50",
        "observable": "pressure",
    },
}


class ConfigError(ValueError):
    """A configuration file is malformed or holds an invalid value."""


def default_config() -> dict[str, dict[str, str]]:
    """Fresh copy of the built-in defaults (strings, as stored on disk)."""
    return {section: dict(values) for section, values in _DEFAULTS.items()}


def load_config(path: str | os.PathLike[str]) -> dict[str, dict[str, str]]:
    """Read an INI file, overlaying it on the defaults.

    Unknown sections or keys raise :class:`ConfigError` naming the
    offending entry, so typos fail loudly instead of silently running
    with defaults.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep keys case-sensitive
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    cfg = default_config()
    for section in parser.sections():
        if section not in cfg:
            raise ConfigError(
                f"unknown section [{section}]; expected one of {', '.join(SECTIONS)}"
            )
        for key, value in parser.items(section):
            if key not in cfg[section]:
                known = ", ".join(sorted(cfg[section]))
                raise ConfigError(
                    f"unknown key '{key}' in [{section}]; known keys: {known}"
                )
            cfg[section][key] = value.strip()
    return cfg


def save_config(cfg: dict[str, dict[str, str]], path: str | os.PathLike[str]) -> None:
    """Write a configuration dict back to INI form.

    ``load_config(save_config(cfg))`` returns an equal dict: values are
    stored verbatim as strings.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section in SECTIONS:
        parser.add_section(section)
        for key, value in cfg.get(section, {}).items():
            parser.set(section, key, str(value))
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def config_hash(cfg: dict[str, dict[str, str]]) -> str:
    """Stable SHA-256 over the canonical JSON form of a configuration."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _get(cfg: dict[str, dict[str, str]], section: str, key: str) -> str:
    try:
        return cfg[section][key]
    except KeyError as exc:
        raise ConfigError(f"missing [{section}] {key}") from exc


def _get_float(cfg, section, key) -> float:
    raw = _get(cfg, section, key)
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from exc


def _get_int(cfg, section, key) -> int:
    raw = _get(cfg, section, key)
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not an integer") from exc


def element_fractions_from(cfg: dict[str, dict[str, str]]) -> tuple[float, ...]:
    raw = _get(cfg, "atmosphere", "element_fractions")
    try:
        parts = tuple(float(tok) for tok in raw.split())
    except ValueError as exc:
        raise ConfigError(
            f"[atmosphere] element_fractions = {raw!r}: expected whitespace-"
            "separated numbers"
        ) from exc
    if not parts:
        raise ConfigError("[atmosphere] element_fractions is empty")
    return parts


def case_from_config(
    cfg: dict[str, dict[str, str]],
    n_radial: int | None = None,
    n_angular: int | None = None,
) -> CaseConfig:
    """Build the flow-case dataclass; optional mesh override for UQ pairs."""
    preset = _get(cfg, "atmosphere", "preset")
    return CaseConfig(
        atmosphere=preset,
        element_fractions=element_fractions_from(cfg),
        n_radial=n_radial if n_radial is not None else _get_int(cfg, "mesh", "n_radial"),
        n_angular=(
            n_angular if n_angular is not None else _get_int(cfg, "mesh", "n_angular")
        ),
        r_body=_get_float(cfg, "mesh", "r_body"),
        r_outer=_get_float(cfg, "mesh", "r_outer"),
        stretch=_get_float(cfg, "mesh", "stretch"),
        p_inf=_get_float(cfg, "bc", "pressure"),
        T_inf=_get_float(cfg, "bc", "temperature"),
        speed=_get_float(cfg, "bc", "speed"),
        cfl=_get_float(cfg, "solver", "cfl"),
        tol_steady=_get_float(cfg, "solver", "tol_steady"),
        max_iter=_get_int(cfg, "solver", "max_iter"),
        shock_sensor=_get_float(cfg, "solver", "shock_sensor"),
    )


def train_config_from(cfg: dict[str, dict[str, str]]) -> TrainConfig:
    tc = TrainConfig(
        n_layers=_get_int(cfg, "surrogate", "n_layers"),
        n_units=_get_int(cfg, "surrogate", "n_units"),
        activation=_get(cfg, "surrogate", "activation"),
        learning_rate=_get_float(cfg, "surrogate", "learning_rate"),
        lr_decay=_get_float(cfg, "surrogate", "lr_decay"),
        epochs=_get_int(cfg, "surrogate", "epochs"),
        batch_size=_get_int(cfg, "surrogate", "batch_size"),
        loss=_get(cfg, "surrogate", "loss"),
        optimizer=_get(cfg, "surrogate", "optimizer"),
        n_seeds=_get_int(cfg, "surrogate", "n_seeds"),
        seed=resolve_seed(_get_int(cfg, "surrogate", "seed")),
    )
    tc.validate()
    return tc


def budget_from_config(cfg: dict[str, dict[str, str]]) -> SearchBudget:
    return SearchBudget(
        n_train=_get_int(cfg, "search", "n_train"),
        n_test=_get_int(cfg, "search", "n_test"),
        epochs=_get_int(cfg, "search", "epochs"),
        steps_cap=_get_int(cfg, "search", "steps_cap"),
        seeds_cap=_get_int(cfg, "search", "seeds_cap"),
    )


def resolve_seed(default: int) -> int:
    """Root seed: the environment variable wins over the configuration."""
    raw = os.environ.get(ENV_SEED)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{ENV_SEED}={raw!r} is not an integer") from exc


def resolve_threads(default: int = 1) -> int:
    """Thread budget for kernels/BLAS: environment variable wins."""
    raw = os.environ.get(ENV_THREADS)
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{ENV_THREADS}={raw!r} is not an integer") from exc
    if value < 1:
        raise ConfigError(f"{ENV_THREADS} must be >= 1, got {value}")
    return value


@dataclass
class RunManifest:
    """What produced the artifacts sitting next to this manifest.

    One manifest per output directory.  Re-running the same command with
    the same configuration and seeds must reproduce every non-timing
    artifact byte for byte; the manifest records enough to check that.
    """

    command: str
    config_hash: str
    seeds: dict[str, int] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    package_version: str = __version__
    python_version: str = field(default_factory=lambda: sys.version.split()[0])
    platform: str = field(default_factory=platform.platform)
    threads: int = 1
    clock: str = "time.perf_counter"
    created: str = field(
        default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
    )

    def write(self, out_dir: str | os.PathLike[str]) -> str:
        path = os.path.join(os.fspath(out_dir), "manifest.json")
        payload = dataclasses.asdict(self)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def read_manifest(out_dir: str | os.PathLike[str]) -> dict:
    path = os.path.join(os.fspath(out_dir), "manifest.json")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
