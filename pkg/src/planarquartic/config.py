"""Run configuration: flat key = value files merged with CLI flags.

A config file is plain text, one `key = value` per line, `#` comments,
and a mandatory `schema = 1` line.  CLI flags override file values,
file values override defaults.  Every diagnostic carries the file name
and line number (or the flag name) of the offending entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields as dc_fields

__all__ = ["COMMANDS", "SCHEMA_VERSION", "ConfigError", "RunConfig",
           "read_config_file", "build_config", "config_lines"]

SCHEMA_VERSION = 1

COMMANDS = ("solve", "twopoint", "npoint", "b2", "lambda-eff", "oracle",
            "sweep", "verify")

#: File/flag spellings that differ from the dataclass field name.
_ALIASES = {
    "lambda": "coupling",
    "cutoff": "lambda_cut",
    "bs": "b_cycle",
    "cs": "c_cycle",
    "e-values": "e_values",
    "lambda-min": "lambda_min",
    "lambda-max": "lambda_max",
}


class ConfigError(ValueError):
    """Invalid configuration; formats as `file:line: message`."""

    def __init__(self, message: str, *, path: str | None = None,
                 line: int | None = None):
        self.path = path
        self.line = line
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved parameters of one CLI invocation."""

    command: str
    coupling: float = 1.0e-3
    lambda_cut: float = 1.0e6
    nodes: int = 256
    output: str = "out"
    seed: int = 0
    # twopoint: first indices of the tabulated correlator slice
    rows: tuple = (0.0, 0.5, 1.0, 2.0, 5.0)
    # npoint: full cyclic index tuple
    indices: tuple = ()
    # b2: the two boundary cycles
    b_cycle: tuple = ()
    c_cycle: tuple = ()
    # verify
    suite: str = "identities"
    # oracle (finite-size Monte Carlo)
    size: int = 2
    e_values: tuple = (0.3, 1.1)
    lambda4: float = 0.2
    volume: float = 1.0
    samples: int = 200_000
    # sweep
    lambda_min: float = 1.0e-3
    lambda_max: float = 1.0 / math.pi
    points: int = 9
    workers: int = 0


def _parse_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ValueError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise ValueError(f"not finite: {text!r}")
    return v


def _parse_int(text: str) -> int:
    try:
        return int(text, 10)
    except ValueError:
        raise ValueError(f"not an integer: {text!r}") from None


def _parse_floats(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(_parse_float(part) for part in text.split(","))


_PARSERS = {
    "command": str,
    "coupling": _parse_float,
    "lambda_cut": _parse_float,
    "nodes": _parse_int,
    "output": str,
    "seed": _parse_int,
    "rows": _parse_floats,
    "indices": _parse_floats,
    "b_cycle": _parse_floats,
    "c_cycle": _parse_floats,
    "suite": str,
    "size": _parse_int,
    "e_values": _parse_floats,
    "lambda4": _parse_float,
    "volume": _parse_float,
    "samples": _parse_int,
    "lambda_min": _parse_float,
    "lambda_max": _parse_float,
    "points": _parse_int,
    "workers": _parse_int,
}


def read_config_file(path: str) -> dict:
    """Parse a config file into {field: (raw value, line number)}.

    Checks the schema version and key validity here; value syntax and
    cross-field constraints are checked by build_config.
    """
    entries: dict = {}
    schema_seen = False
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError("expected `key = value`",
                                  path=path, line=lineno)
            key, value = (part.strip() for part in text.split("=", 1))
            key = _ALIASES.get(key, key)
            if key == "schema":
                if value != str(SCHEMA_VERSION):
                    raise ConfigError(
                        f"unsupported schema version {value!r} "
                        f"(expected {SCHEMA_VERSION})",
                        path=path, line=lineno)
                schema_seen = True
                continue
            if key not in _PARSERS:
                raise ConfigError(f"unknown key {key!r}",
                                  path=path, line=lineno)
            if key in entries:
                raise ConfigError(f"duplicate key {key!r}",
                                  path=path, line=lineno)
            entries[key] = (value, lineno)
    if not schema_seen:
        raise ConfigError(f"missing `schema = {SCHEMA_VERSION}` line",
                          path=path, line=1)
    return entries


def build_config(command: str | None, file_entries: dict | None,
                 flag_values: dict | None, *,
                 path: str | None = None) -> RunConfig:
    """Merge defaults, file entries, and flag strings into a RunConfig.

    `flag_values` maps field names to raw strings (None = not given);
    flags win over file entries.  Raises ConfigError with provenance on
    the first invalid entry, then cross-validates the merged result.
    """
    resolved: dict = {}
    origin: dict = {}
    for key, (raw, lineno) in (file_entries or {}).items():
        try:
            resolved[key] = _PARSERS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: {exc}",
                              path=path, line=lineno) from None
        origin[key] = (path, lineno)
    for key, raw in (flag_values or {}).items():
        if raw is None:
            continue
        try:
            resolved[key] = _PARSERS[key](raw) if isinstance(raw, str) \
                else raw
        except ValueError as exc:
            raise ConfigError(f"flag --{key.replace('_', '-')}: {exc}") \
                from None
        origin[key] = None
    if command is not None:
        resolved["command"] = command
        origin["command"] = None
    if "command" not in resolved:
        raise ConfigError("no command given (positional argument or "
                          "`command = ...` in the config file)")
    cfg = RunConfig(**resolved)
    _validate(cfg, origin, path)
    return cfg


def _fail(key: str, message: str, origin: dict, path: str | None):
    where = origin.get(key)
    if where is not None:
        raise ConfigError(f"key {key!r}: {message}",
                          path=where[0], line=where[1])
    raise ConfigError(f"{key.replace('_', '-')}: {message}")


def _validate(cfg: RunConfig, origin: dict, path: str | None) -> None:
    if cfg.command not in COMMANDS:
        _fail("command", f"unknown command {cfg.command!r} "
              f"(expected one of {', '.join(COMMANDS)})", origin, path)
    if cfg.coupling < 0.0:
        _fail("coupling", "must be >= 0", origin, path)
    if cfg.lambda_cut <= 0.0:
        _fail("lambda_cut", "must be positive", origin, path)
    if cfg.nodes < 16 or cfg.nodes % 8:
        _fail("nodes", "must be a multiple of 8, at least 16",
              origin, path)
    if cfg.command == "npoint":
        if len(cfg.indices) < 4 or len(cfg.indices) % 2:
            _fail("indices", "need an even number of indices, at "
                  "least 4", origin, path)
        if any(b < 0.0 for b in cfg.indices):
            _fail("indices", "indices must be nonnegative", origin, path)
    if cfg.command == "b2":
        if not cfg.b_cycle:
            _fail("b_cycle", "need at least one index", origin, path)
        for key in ("b_cycle", "c_cycle"):
            if any(b < 0.0 for b in getattr(cfg, key)):
                _fail(key, "indices must be nonnegative", origin, path)
    if cfg.command == "verify" and cfg.suite != "identities":
        _fail("suite", f"unknown suite {cfg.suite!r} "
              "(available: identities)", origin, path)
    if cfg.command == "oracle":
        if cfg.size not in (1, 2, 3):
            _fail("size", "matrix size must be 1, 2, or 3", origin, path)
        if len(cfg.e_values) != cfg.size:
            _fail("e_values", f"need exactly {cfg.size} values",
                  origin, path)
        if any(e <= 0.0 for e in cfg.e_values):
            _fail("e_values", "must be positive", origin, path)
        if any(y <= x for x, y in zip(cfg.e_values, cfg.e_values[1:])):
            _fail("e_values", "must be strictly increasing", origin, path)
        if cfg.lambda4 < 0.0:
            _fail("lambda4", "must be >= 0", origin, path)
        if cfg.volume <= 0.0:
            _fail("volume", "must be positive", origin, path)
        if cfg.samples < 16:
            _fail("samples", "need at least 16 samples", origin, path)
    if cfg.command == "sweep":
        if not (0.0 < cfg.lambda_min < cfg.lambda_max):
            _fail("lambda_min", "need 0 < lambda-min < lambda-max",
                  origin, path)
        if cfg.points < 2:
            _fail("points", "need at least two sweep points",
                  origin, path)
        if cfg.workers < 0:
            _fail("workers", "must be >= 0 (0 = auto)", origin, path)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, tuple):
        return ",".join(format(v, ".17g") for v in value)
    return str(value)


def config_lines(cfg: RunConfig) -> list:
    """Canonical flat key = value echo of a config, schema line first.

    The echo is itself a valid config file; identical configs produce
    identical lines, making run directories diffable.
    """
    lines = [f"schema = {SCHEMA_VERSION}"]
    for f in dc_fields(cfg):
        lines.append(f"{f.name} = {_format_value(getattr(cfg, f.name))}")
    return lines
