"""Flat key=value experiment configuration.

Keys carry a section prefix naming the module they feed (``pde.n``,
``track.s_in``, ``out.dir``); values stay strings until a typed getter
pulls them.  No nesting, no interpolation, so a file diffs cleanly and
can be hashed whole for the provenance stamp.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .errors import ConfigError


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` comments and blanks skipped."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key or not value:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        if key in out:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _stamp(text: str) -> dict:
    return {
        "code_version": __version__,
        "config_sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
    }


@dataclass
class ExperimentConfig:
    """Validated settings plus the provenance stamp attached to artifacts."""

    values: dict
    out_dir: Path
    stamp: dict = field(default_factory=dict)

    def get_str(self, key: str, default: str | None = None) -> str:
        if key in self.values:
            return self.values[key]
        if default is None:
            raise ConfigError(f"missing required config key {key!r}")
        return default

    def get_float(self, key: str, default: float | None = None) -> float:
        if key not in self.values:
            if default is None:
                raise ConfigError(f"missing required config key {key!r}")
            return default
        try:
            return float(self.values[key])
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {self.values[key]!r} is not a number") from exc

    def get_int(self, key: str, default: int | None = None) -> int:
        if key not in self.values:
            if default is None:
                raise ConfigError(f"missing required config key {key!r}")
            return default
        try:
            return int(self.values[key])
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {self.values[key]!r} is not an integer") from exc

    def get_floats(self, key: str, default: tuple = ()) -> tuple:
        """Comma-separated float list."""
        if key not in self.values:
            return tuple(default)
        try:
            return tuple(float(tok) for tok in self.values[key].split(",") if tok.strip())
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: expected comma-separated numbers") from exc

    def section(self, prefix: str) -> dict:
        dot = prefix + "."
        return {k[len(dot):]: v for k, v in self.values.items() if k.startswith(dot)}


def _validate(values: dict) -> None:
    for key, raw in values.items():
        leaf = key.rsplit(".", 1)[-1]
        if leaf in ("k",):
            try:
                k = int(raw)
            except ValueError as exc:
                raise ConfigError(f"config key {key!r} must be an integer") from exc
            if k < 2:
                raise ConfigError(f"config key {key!r} must be >= 2, got {k}")
        if leaf in ("tol", "tolerance", "bisection_tol"):
            try:
                tol = float(raw)
            except ValueError as exc:
                raise ConfigError(f"config key {key!r} must be a number") from exc
            if tol <= 0.0:
                raise ConfigError(f"config key {key!r} must be positive, got {tol}")


def load_experiment_config(path: str | None, out_dir: str | Path) -> ExperimentConfig:
    """Read an optional config file and prepare a writable output directory."""
    text = ""
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} does not exist")
        text = p.read_text(encoding="utf-8")
    values = parse_config_text(text)
    _validate(values)

    out = Path(values.get("out.dir", str(out_dir)))
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".writable"
        probe.touch()
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc

    return ExperimentConfig(values=values, out_dir=out, stamp=_stamp(text))
