"""Run configuration: baked-in paper defaults, optional TOML file, flag
overrides (flags win).

With only a dataset path, extract + train + evaluate reproduce the pipeline
at the documented defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from ..errors import ConfigError, InvalidFractions

try:  # Python >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    _toml = None


@dataclass
class RunConfig:
    dataset: str | None = None
    features: str = "mfcc"  # mfcc | melspec
    out: str = "."
    model: str = "gbdt"  # mfcc-cnn | melspec-cnn | gbdt
    seed: int = 42

    # feature extraction
    sr: int = 22050
    n_mfcc: int = 13
    n_fft: int = 2048
    hop: int = 512
    segments: int = 10
    n_mels: int = 128

    # splitting
    fractions: tuple[float, float, float] = (0.80, 0.16, 0.04)
    group_by_track: bool = False

    # gbdt hyperparameters
    rounds: int = 1000
    depth: int = 6
    lr: float | None = None  # resolved per model: 0.3 gbdt, 1e-3 CNNs

    # cnn hyperparameters
    epochs: int = 200
    batch: int = 32
    patience: int = 10

    def validate(self) -> "RunConfig":
        if self.features not in ("mfcc", "melspec"):
            raise ConfigError(f"unknown features kind {self.features!r}")
        if self.model not in ("mfcc-cnn", "melspec-cnn", "gbdt"):
            raise ConfigError(f"unknown model {self.model!r}")
        if len(self.fractions) != 3 or any(f <= 0 for f in self.fractions):
            raise InvalidFractions(f"need three positive fractions, got {self.fractions}")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise InvalidFractions(f"fractions sum to {sum(self.fractions)}")
        for name in ("sr", "n_mfcc", "n_fft", "hop", "segments", "n_mels",
                     "rounds", "depth", "epochs", "batch"):
            if getattr(self, name) < 0 or (name != "rounds" and getattr(self, name) == 0):
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lr is not None and self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.patience < 0:
            raise ConfigError(f"patience must be >= 0, got {self.patience}")
        return self

    @property
    def resolved_lr(self) -> float:
        if self.lr is not None:
            return self.lr
        return 0.3 if self.model == "gbdt" else 1e-3


_TRUE_FALSE = {"true": True, "false": False}


def _parse_scalar(token: str):
    token = token.strip()
    if not token:
        raise ConfigError("empty TOML value")
    if token[0] in "\"'":
        if len(token) < 2 or token[-1] != token[0]:
            raise ConfigError(f"unterminated string: {token}")
        return token[1:-1]
    if token in _TRUE_FALSE:
        return _TRUE_FALSE[token]
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        raise ConfigError(f"cannot parse TOML value: {token}") from None


def _parse_value(token: str):
    token = token.strip()
    if token.startswith("["):
        if not token.endswith("]"):
            raise ConfigError(f"unterminated array: {token}")
        inner = token[1:-1].strip()
        if not inner:
            return []
        return [_parse_scalar(part) for part in inner.split(",")]
    return _parse_scalar(token)


def _parse_toml_subset(text: str) -> dict:
    """Flat-table TOML subset: sections, scalars, one-line arrays, comments.

    Covers the documented RunConfig schema; installs with stdlib tomllib on
    Python 3.11+ where the full grammar is available.
    """
    root: dict = {}
    table = root
    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"bad TOML section header: {line}")
            table = root
            for part in line[1:-1].strip().split("."):
                table = table.setdefault(part.strip(), {})
            continue
        if "=" not in line:
            raise ConfigError(f"bad TOML line: {line}")
        key, _, value = line.partition("=")
        comment = value.find(" #")
        if comment >= 0 and '"' not in value[:comment] and "'" not in value[:comment]:
            value = value[:comment]
        table[key.strip().strip('"')] = _parse_value(value)
    return root


def load_toml(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if _toml is not None:
        try:
            with open(path, "rb") as fh:
                return _toml.load(fh)
        except _toml.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return _parse_toml_subset(path.read_text())


def build_config(toml_path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults < TOML file < explicit overrides (CLI flags)."""
    values: dict = {}
    if toml_path is not None:
        doc = load_toml(toml_path)
        known = {f.name for f in fields(RunConfig)}
        for key, value in doc.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = value
    if overrides:
        for key, value in overrides.items():
            if value is not None:
                values[key] = value
    if "fractions" in values:
        values["fractions"] = tuple(float(f) for f in values["fractions"])
    return RunConfig(**values).validate()
