"""``key = value`` scenario files with ``[section]`` headers."""

from __future__ import annotations

import configparser
from pathlib import Path


class ConfigError(ValueError):
    pass


_MISSING = object()


class Config:
    def __init__(self, parser: configparser.ConfigParser, base: Path):
        self._p = parser
        self.base = base

    @classmethod
    def load(cls, path) -> "Config":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
        return cls.parse(text, path.parent)

    @classmethod
    def parse(cls, text: str, base=".") -> "Config":
        p = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        p.optionxform = str  # keep bit-string keys and case as written
        try:
            p.read_string(text)
        except configparser.Error as e:
            raise ConfigError(f"malformed config: {e.message.splitlines()[0]}") from None
        return cls(p, Path(base))

    def has(self, section: str, key: str | None = None) -> bool:
        if key is None:
            return self._p.has_section(section)
        return self._p.has_option(section, key)

    def items(self, section: str) -> list[tuple[str, str]]:
        if not self._p.has_section(section):
            return []
        return list(self._p.items(section))

    def raw(self, section: str, key: str, default=_MISSING) -> str:
        if self._p.has_option(section, key):
            return self._p.get(section, key).strip()
        if default is _MISSING:
            raise ConfigError(f"missing [{section}] {key}")
        return default

    def str(self, section, key, default=_MISSING, choices=None):
        v = self.raw(section, key, default)
        if choices is not None and v not in choices:
            raise ConfigError(f"[{section}] {key} must be one of {', '.join(choices)}; got {v!r}")
        return v

    def float(self, section, key, default=_MISSING) -> float:
        v = self.raw(section, key, default)
        if v is default:
            return v
        try:
            return float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"[{section}] {key} is not a number: {v!r}") from None

    def int(self, section, key, default=_MISSING) -> int:
        v = self.raw(section, key, default)
        if v is default:
            return v
        try:
            return int(v)
        except (TypeError, ValueError):
            raise ConfigError(f"[{section}] {key} is not an integer: {v!r}") from None

    def floats(self, section, key, default=_MISSING, sep=",") -> list[float]:
        v = self.raw(section, key, default)
        if v is default:
            return v
        try:
            return [float(t) for t in v.split(sep) if t.strip()]
        except ValueError:
            raise ConfigError(f"[{section}] {key} is not a list of numbers: {v!r}") from None

    def path(self, section, key, default=_MISSING) -> Path | None:
        v = self.raw(section, key, default)
        if v is default:
            return v
        return (self.base / v).resolve()

    def read(self, section, key) -> str:
        p = self.path(section, key)
        try:
            return p.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"[{section}] {key}: cannot read {p}: {e.strerror}") from None
