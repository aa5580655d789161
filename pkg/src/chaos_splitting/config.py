"""Experiment configuration: an INI-style file with fixed sections.

Example::

    [grid]
    N = 40
    a = constant:1
    b = constant:1

    [field]
    kernel = gaussian
    length_scale = 1
    variance = 1
    mean = 0
    forcing = 1

    [chaos]
    m = 10
    K = 3

    [time]
    schemes = modified-lie, trapezoidal, crank-nicolson
    h = 2^-10
    h_list = 2^-4, 2^-5, 2^-6
    T = 1
    tol = 1e-8

    [study]
    p_values = 0..7
    m_values = 5, 10, 15
    m_max = 120
    N_values = 4, 8, 16
    repeats = 5
    kle_max_N = 32

    [output]
    directory = results
    seed = 20240611
    mc_samples = 0

Every key is optional; missing keys take the defaults of
:class:`ExperimentConfig`. Step sizes accept powers of two written ``2^-k``.
Integer lists accept ``a..b`` ranges.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

from .integrators import Scheme
from .spatial import Coefficient

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config"]

KERNELS = ("gaussian", "exponential", "constant")


class ConfigError(ValueError):
    """Invalid configuration value, with its location."""

    def __init__(self, message: str, section: str | None = None, key: str | None = None, line: int | None = None):
        self.section, self.key, self.line = section, key, line
        where = ""
        if section is not None:
            where = f"[{section}] {key}" if key else f"[{section}]"
            if line is not None:
                where = f"line {line}: {where}"
            where += ": "
        super().__init__(where + message)


@dataclass(frozen=True)
class ExperimentConfig:
    """All parameters of one experiment. The domain is always ``[-1, 1]^2``."""

    N: int = 40
    a: str = "constant:1.0"
    b: str = "constant:1.0"
    kernel: str = "gaussian"
    length_scale: float = 1.0
    variance: float = 1.0
    mean: float = 0.0
    forcing: float = 1.0
    m: int = 10
    K: int = 3
    schemes: tuple[str, ...] = ("modified-lie", "trapezoidal", "crank-nicolson")
    h: float = 2.0**-10
    h_list: tuple[float, ...] = tuple(2.0**-k for k in range(4, 14))
    T: float = 1.0
    tol: float = 1e-8
    p_values: tuple[int, ...] = tuple(range(8))
    m_values: tuple[int, ...] = tuple(range(5, 65, 5))
    m_max: int = 120
    N_values: tuple[int, ...] = (4, 8, 16, 32, 64, 128)
    repeats: int = 5
    kle_max_N: int = 32
    directory: str = "results"
    seed: int = 20240611
    mc_samples: int = 0

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    @property
    def coefficient_a(self) -> Coefficient:
        return Coefficient.parse(self.a)

    @property
    def coefficient_b(self) -> Coefficient:
        return Coefficient.parse(self.b)

    @property
    def scheme_list(self) -> list[Scheme]:
        return [Scheme.parse(s) for s in self.schemes]

    def to_text(self) -> str:
        """Serialize to the INI format; :func:`parse_config` inverts this exactly."""
        lines = []
        for section, keys in SECTIONS.items():
            lines.append(f"[{section}]")
            for key in keys:
                lines.append(f"{key} = {_format(getattr(self, _FIELD[key]))}")
            lines.append("")
        return "\n".join(lines)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


SECTIONS: dict[str, tuple[str, ...]] = {
    "grid": ("N", "a", "b"),
    "field": ("kernel", "length_scale", "variance", "mean", "forcing"),
    "chaos": ("m", "K"),
    "time": ("schemes", "h", "h_list", "T", "tol"),
    "study": ("p_values", "m_values", "m_max", "N_values", "repeats", "kle_max_N"),
    "output": ("directory", "seed", "mc_samples"),
}
# configparser lower-cases keys; map back to field names
_FIELD = {k: k for keys in SECTIONS.values() for k in keys}
_LOWER = {k.lower(): k for k in _FIELD}


def _format(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


_POW2 = re.compile(r"^\s*2\s*\^\s*([+-]?\d+)\s*$")


def _float(text: str) -> float:
    match = _POW2.match(text)
    if match:
        return 2.0 ** int(match.group(1))
    return float(text)


def _int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


def _int_list(text: str) -> tuple[int, ...]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(_int(lo), _int(hi) + 1))
        else:
            out.append(_int(part))
    return tuple(out)


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(_float(p) for p in text.split(",") if p.strip())


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
_PARSERS = {
    "int": _int,
    "float": _float,
    "str": str.strip,
    "tuple[str, ...]": _str_list,
    "tuple[float, ...]": _float_list,
    "tuple[int, ...]": _int_list,
}


def _line_numbers(text: str) -> dict[tuple[str, str], int]:
    """Line of each ``key = value`` entry, keyed by ``(section, lower-case key)``."""
    where, section = {}, None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            where[(section, "")] = number
        elif section and line and line[0] not in "#;":
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            where[(section, key)] = number
    return where


def parse_config(text: str, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Parse configuration text, then apply ``section.key -> value`` overrides.

    Raises
    ------
    ConfigError
        On unknown sections or keys, unparsable values or violated
        constraints; the message names the section, key and line.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}", line=getattr(exc, "lineno", None)) from None
    lines = _line_numbers(text)

    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if not key:
            raise ConfigError(f"override {dotted!r} must have the form section.key")
        if not parser.has_section(section):
            if section not in SECTIONS:
                raise ConfigError("unknown section", section)
            parser.add_section(section)
        parser.set(section, key, str(value))
        lines.pop((section, key.lower()), None)

    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section; expected one of {', '.join(SECTIONS)}", section,
                              line=lines.get((section, "")))
        allowed = {k.lower() for k in SECTIONS[section]}
        for key, raw in parser.items(section):
            line = lines.get((section, key))
            if key not in allowed:
                raise ConfigError(f"unknown key; expected one of {', '.join(SECTIONS[section])}", section, key, line)
            name = _LOWER[key]
            try:
                values[name] = _PARSERS[_TYPES[name]](raw)
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(f"cannot parse {raw!r}: {exc}", section, name, line) from None
    cfg = ExperimentConfig(**values)
    _validate(cfg, lines)
    return cfg


def _section_of(name: str) -> str:
    return next(s for s, keys in SECTIONS.items() if name in keys)


def _validate(cfg: ExperimentConfig, lines) -> None:
    def fail(name, message):
        section = _section_of(name)
        raise ConfigError(message, section, name, lines.get((section, name.lower())))

    for name in ("N", "m", "K", "m_max", "repeats"):
        if getattr(cfg, name) < 1:
            fail(name, f"must be a positive integer, got {getattr(cfg, name)}")
    if cfg.N < 2:
        fail("N", "need at least 2 interior nodes per direction")
    for name in ("h", "T", "tol", "length_scale"):
        if not getattr(cfg, name) > 0:
            fail(name, f"must be positive, got {getattr(cfg, name)!r}")
    if cfg.variance < 0:
        fail("variance", "must be non-negative")
    if cfg.kle_max_N < 0 or cfg.mc_samples < 0:
        fail("kle_max_N" if cfg.kle_max_N < 0 else "mc_samples", "must be non-negative")
    if cfg.seed < 0:
        fail("seed", "must be non-negative")
    if cfg.kernel not in KERNELS:
        fail("kernel", f"unknown kernel {cfg.kernel!r}; expected one of {', '.join(KERNELS)}")
    if not cfg.schemes:
        fail("schemes", "need at least one scheme")
    for s in cfg.schemes:
        try:
            Scheme.parse(s)
        except ValueError as exc:
            fail("schemes", str(exc))
    for name in ("a", "b"):
        try:
            Coefficient.parse(getattr(cfg, name))
        except ValueError as exc:
            fail(name, str(exc))
    if not cfg.h_list or any(not h > 0 for h in cfg.h_list):
        fail("h_list", "step sizes must be positive")
    if len(set(cfg.h_list)) != len(cfg.h_list):
        fail("h_list", "step sizes must be distinct")
    if any(p < 0 for p in cfg.p_values):
        fail("p_values", "indices must be non-negative")
    if not cfg.m_values or any(m < 1 for m in cfg.m_values):
        fail("m_values", "truncation levels must be positive")
    if any(n < 2 for n in cfg.N_values):
        fail("N_values", "grid sizes must be at least 2")


def load_config(path, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration file {path}: {exc.strerror}") from None
    return parse_config(text, overrides)
