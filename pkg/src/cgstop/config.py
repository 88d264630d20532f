"""Sectioned ``key = value`` configuration files.

Recognised sections and keys (all optional, defaults in brackets)::

    [problem]  kind [diagonal] | gravity, signal [rough], D [10000], p [0.5],
               scale [1.0], depth [0.25], rel_floor [1e-14], cache
    [noise]    model [gaussian] | deterministic, delta [0.01]
    [stop]     kappa_rule [delta2D] | delta2D+sqrtD | explicit | dn, kappa, c [2.0],
               extra_iterations [15], emergency_threshold [1e-8], max_index,
               reorthogonalize [true]
    [mc]       runs [200], seed [0], exclude_emergency [false]
    [rates]    m_min [0], m_max [10], R [1000], mu [0.25], p [0.5], runs [200], max_dim [1048576]
    [diagnose] run_index [0], points_per_interval [20]

Errors name the offending line. :func:`format_config` writes the effective
configuration back in the same format.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, replace

from .exceptions import ConfigError
from .experiments import ExperimentConfig, KappaRule, ProblemSpec


@dataclass(frozen=True)
class RatesConfig:
    m_min: int = 0
    m_max: int = 10
    R: float = 1000.0
    mu: float = 0.25
    p: float = 0.5
    runs: int = 200
    max_dim: int = 1 << 20


@dataclass(frozen=True)
class DiagnoseConfig:
    run_index: int = 0
    points_per_interval: int = 20


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    rates: RatesConfig = field(default_factory=RatesConfig)
    diagnose: DiagnoseConfig = field(default_factory=DiagnoseConfig)


def _bool(s):
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_int(s):
    return None if s.strip().lower() in ("", "none") else int(s)


def _opt_float(s):
    return None if s.strip().lower() in ("", "none") else float(s)


def _opt_str(s):
    return None if s.strip().lower() in ("", "none") else s.strip()


# (section, key) -> (target, attribute, converter)
_KEYS = {
    ("problem", "kind"): ("problem", "kind", str),
    ("problem", "signal"): ("problem", "signal", str),
    ("problem", "d"): ("problem", "D", int),
    ("problem", "p"): ("problem", "p", float),
    ("problem", "scale"): ("problem", "scale", float),
    ("problem", "depth"): ("problem", "depth", float),
    ("problem", "rel_floor"): ("problem", "rel_floor", float),
    ("problem", "cache"): ("problem", "cache", _opt_str),
    ("noise", "model"): ("experiment", "noise_model", str),
    ("noise", "delta"): ("experiment", "delta", float),
    ("stop", "kappa_rule"): ("experiment", "kappa_rule", KappaRule),
    ("stop", "kappa"): ("experiment", "kappa", _opt_float),
    ("stop", "c"): ("experiment", "dn_c", float),
    ("stop", "extra_iterations"): ("experiment", "extra_iterations", int),
    ("stop", "emergency_threshold"): ("experiment", "emergency_threshold", float),
    ("stop", "max_index"): ("experiment", "max_index", _opt_int),
    ("stop", "reorthogonalize"): ("experiment", "reorthogonalize", _bool),
    ("mc", "runs"): ("experiment", "n_runs", int),
    ("mc", "seed"): ("experiment", "master_seed", int),
    ("mc", "exclude_emergency"): ("experiment", "exclude_emergency", _bool),
    ("rates", "m_min"): ("rates", "m_min", int),
    ("rates", "m_max"): ("rates", "m_max", int),
    ("rates", "r"): ("rates", "R", float),
    ("rates", "mu"): ("rates", "mu", float),
    ("rates", "p"): ("rates", "p", float),
    ("rates", "runs"): ("rates", "runs", int),
    ("rates", "max_dim"): ("rates", "max_dim", int),
    ("diagnose", "run_index"): ("diagnose", "run_index", int),
    ("diagnose", "points_per_interval"): ("diagnose", "points_per_interval", int),
}

_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")
_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")


def _line_index(text):
    """Map ``(section, key)`` to the 1-based line it is defined on."""
    where, section = {}, None
    for n, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip().lower()
            where.setdefault((section, None), n)
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), n)
    return where


def parse_config(text, path=None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path or "<config>"))
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", exc.lineno, path) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", line, path) from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(str(exc.message if hasattr(exc, "message") else exc).splitlines()[0], exc.lineno, path) from exc

    lines = _line_index(text)
    values = {"problem": {}, "experiment": {}, "rates": {}, "diagnose": {}}
    for section in parser.sections():
        sec = section.lower()
        for key, raw in parser.items(section):
            where = lines.get((sec, key), lines.get((sec, None)))
            target = _KEYS.get((sec, key))
            if target is None:
                raise ConfigError(f"unknown key [{section}] {key}", where, path)
            dest, attr, conv = target
            try:
                values[dest][attr] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for [{section}] {key}: {raw!r} ({exc})", where, path) from exc

    def build(factory, kwargs, section):
        try:
            return factory(**kwargs)
        except (ConfigError, ValueError) as exc:
            msg = exc.args[0] if isinstance(exc, ConfigError) else str(exc)
            raise ConfigError(msg, lines.get((section, None)), path) from exc

    problem = build(ProblemSpec, values["problem"], "problem")
    experiment = build(lambda **kw: ExperimentConfig(problem=problem, **kw), values["experiment"], "stop")
    rates = RatesConfig(**values["rates"])
    if rates.m_min > rates.m_max or rates.runs < 1:
        raise ConfigError("rates needs m_min <= m_max and runs >= 1", lines.get(("rates", None)), path)
    diagnose = DiagnoseConfig(**values["diagnose"])
    if diagnose.points_per_interval < 1:
        raise ConfigError("points_per_interval must be >= 1", lines.get(("diagnose", None)), path)
    return RunConfig(experiment, rates, diagnose)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, path) from exc
    return parse_config(text, path)


def with_seed(cfg: RunConfig, seed) -> RunConfig:
    return replace(cfg, experiment=replace(cfg.experiment, master_seed=int(seed)))


def _text(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "value"):
        return str(v.value)
    return str(v)


def format_config(cfg: RunConfig) -> str:
    """Effective configuration with all defaults resolved, re-readable by :func:`parse_config`."""
    sources = {"problem": cfg.experiment.problem, "experiment": cfg.experiment,
               "rates": cfg.rates, "diagnose": cfg.diagnose}
    out, current = [], None
    for (section, key), (dest, attr, _) in _KEYS.items():
        if section != current:
            if current is not None:
                out.append("")
            out.append(f"[{section}]")
            current = section
        out.append(f"{key} = {_text(getattr(sources[dest], attr))}")
    return "\n".join(out) + "\n"
