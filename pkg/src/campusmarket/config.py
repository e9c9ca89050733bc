"""Service configuration: a TOML or JSON file plus one environment override.

Keys are validated strictly; a misspelled key fails the load instead of being
silently ignored. All paths in the file resolve relative to the file itself,
so a config can live next to its fixtures. MARKET_DATA_DIR overrides the
data directory without touching the file, which is what the test harness and
one-off CLI runs use.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .reputation import DEFAULT_MAGNITUDES, ModifierKind, ReputationConfig

ENV_DATA_DIR = "MARKET_DATA_DIR"

_TOP_KEYS = {
    "data_dir",
    "bind_address",
    "allowed_email_domains",
    "session_secret",
    "otp_ttl_seconds",
    "session_ttl_seconds",
    "initial_points",
    "boost_alpha",
    "boost_cap",
    "modifiers",
    "blacklist_path",
    "classifier",
    "price_source",
    "cors_allow_origin",
}
_CLASSIFIER_KEYS = {"mode", "endpoint", "fixture_path"}
_PRICE_KEYS = {"mode", "fixture_path"}


class ConfigError(Exception):
    """The config file is missing, unparseable, or invalid."""


@dataclass(frozen=True)
class AppConfig:
    data_dir: Path | None = None
    bind_host: str = "127.0.0.1"
    bind_port: int = 8000
    allowed_email_domains: tuple[str, ...] = ()
    session_secret: str | None = None
    otp_ttl_seconds: int = 600
    session_ttl_seconds: int = 86400
    initial_points: int = 100
    boost_alpha: float = 0.25
    boost_cap: int = 500
    magnitudes: dict[ModifierKind, int] = field(default_factory=lambda: dict(DEFAULT_MAGNITUDES))
    blacklist_path: Path | None = None
    classifier_mode: str = "mock"
    classifier_fixture_path: Path | None = None
    price_mode: str = "mock"
    price_fixture_path: Path | None = None
    cors_allow_origin: str | None = None

    def reputation(self) -> ReputationConfig:
        cfg = ReputationConfig(
            initial_points=self.initial_points,
            boost_alpha=self.boost_alpha,
            boost_cap=self.boost_cap,
            magnitudes=dict(self.magnitudes),
        )
        cfg.validate()
        return cfg

    def require_data_dir(self) -> Path:
        if self.data_dir is None:
            raise ConfigError("data_dir is required for this command")
        return self.data_dir


def _expect(value, kind, name: str):
    # bool is an int subclass; an explicit check keeps `true` out of int slots
    if kind is int and isinstance(value, bool):
        raise ConfigError(f"{name}: expected integer, got boolean")
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, kind):
        raise ConfigError(f"{name}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _parse_bind(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"bind_address: expected host:port, got {value!r}")
    try:
        port_num = int(port)
    except ValueError:
        raise ConfigError(f"bind_address: bad port {port!r}") from None
    if not 0 < port_num < 65536:
        raise ConfigError(f"bind_address: port out of range: {port_num}")
    return host, port_num


def _parse_magnitudes(section: dict) -> dict[ModifierKind, int]:
    magnitudes = dict(DEFAULT_MAGNITUDES)
    for key, value in section.items():
        try:
            kind = ModifierKind(key)
        except ValueError:
            raise ConfigError(f"modifiers: unknown modifier {key!r}") from None
        magnitudes[kind] = _expect(value, int, f"modifiers.{key}")
    return magnitudes


def load_config(path: str | os.PathLike) -> AppConfig:
    """Parse, validate, and resolve a config file into an AppConfig."""
    file = Path(path)
    try:
        raw_bytes = file.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {file}: {exc}") from None
    try:
        if file.suffix == ".json":
            raw = json.loads(raw_bytes.decode("utf-8"))
        else:
            raw = tomllib.loads(raw_bytes.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {file}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a table/object")
    _check_keys(raw, _TOP_KEYS, "config")

    base = file.resolve().parent

    def resolve(name: str, value) -> Path:
        return (base / _expect(value, str, name)).resolve()

    kwargs: dict = {}
    if "data_dir" in raw:
        kwargs["data_dir"] = resolve("data_dir", raw["data_dir"])
    if "bind_address" in raw:
        host, port = _parse_bind(_expect(raw["bind_address"], str, "bind_address"))
        kwargs["bind_host"], kwargs["bind_port"] = host, port
    if "allowed_email_domains" in raw:
        domains = _expect(raw["allowed_email_domains"], list, "allowed_email_domains")
        for d in domains:
            _expect(d, str, "allowed_email_domains[]")
        kwargs["allowed_email_domains"] = tuple(d.lower() for d in domains)
    if "session_secret" in raw:
        secret = _expect(raw["session_secret"], str, "session_secret")
        if not secret:
            raise ConfigError("session_secret must be non-empty when given")
        kwargs["session_secret"] = secret
    for name in ("otp_ttl_seconds", "session_ttl_seconds", "initial_points", "boost_cap"):
        if name in raw:
            value = _expect(raw[name], int, name)
            if name != "initial_points" and value <= 0:
                raise ConfigError(f"{name} must be positive")
            if name == "initial_points" and value < 0:
                raise ConfigError("initial_points must be non-negative")
            kwargs[name] = value
    if "boost_alpha" in raw:
        alpha = _expect(raw["boost_alpha"], float, "boost_alpha")
        if alpha < 0:
            raise ConfigError("boost_alpha must be non-negative")
        kwargs["boost_alpha"] = alpha
    if "modifiers" in raw:
        kwargs["magnitudes"] = _parse_magnitudes(_expect(raw["modifiers"], dict, "modifiers"))
    if "blacklist_path" in raw:
        kwargs["blacklist_path"] = resolve("blacklist_path", raw["blacklist_path"])
    if "cors_allow_origin" in raw:
        kwargs["cors_allow_origin"] = _expect(raw["cors_allow_origin"], str, "cors_allow_origin")

    if "classifier" in raw:
        section = _expect(raw["classifier"], dict, "classifier")
        _check_keys(section, _CLASSIFIER_KEYS, "classifier")
        mode = _expect(section.get("mode", "mock"), str, "classifier.mode")
        if mode != "mock":
            raise ConfigError(f"classifier.mode: only \"mock\" is supported, got {mode!r}")
        kwargs["classifier_mode"] = mode
        if "fixture_path" in section:
            kwargs["classifier_fixture_path"] = resolve(
                "classifier.fixture_path", section["fixture_path"]
            )
    if "price_source" in raw:
        section = _expect(raw["price_source"], dict, "price_source")
        _check_keys(section, _PRICE_KEYS, "price_source")
        mode = _expect(section.get("mode", "mock"), str, "price_source.mode")
        if mode != "mock":
            raise ConfigError(f"price_source.mode: only \"mock\" is supported, got {mode!r}")
        kwargs["price_mode"] = mode
        if "fixture_path" in section:
            kwargs["price_fixture_path"] = resolve(
                "price_source.fixture_path", section["fixture_path"]
            )

    env_dir = os.environ.get(ENV_DATA_DIR)
    if env_dir:
        kwargs["data_dir"] = Path(env_dir).resolve()

    config = AppConfig(**kwargs)
    try:
        config.reputation()  # surfaces bad magnitude signs and boost parameters
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return config
