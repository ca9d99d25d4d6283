"""Experiment configuration stored as a single ``[experiment]`` INI section.

Example::

    [experiment]
    problem = linear2d
    epsilon = 1.0
    scheme = theta1_stab
    observable = second_moment
    h_list = 0.05 0.1 0.2
    T = 10000.0
    M = 10
    seed = 1
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, fields, replace

from .errors import ConfigError
from .model import DEFAULT_SIGMA
from .newton import JacobianRefresh, NewtonConfig
from .schemes import PostKind, SchemeSpec, preset

SECTION = "experiment"


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "ou"
    epsilon: float | None = None
    gamma: float | None = None
    dim: int | None = None
    sigma: float = DEFAULT_SIGMA
    scheme: str = "theta1_stab"
    theta: float | None = None  # explicit coefficients override the preset
    a: float | None = None
    b: float | None = None
    c: float | None = None
    post: str | None = None
    observable: str = "second_moment"
    h_list: tuple = (0.1,)
    T: float = 1e4
    M: int = 10
    seed: int = 0
    burn_in: float = 0.1
    estimator: str = "time"
    explosion_threshold: float = 1e6
    workers: int | None = None
    newton_tolerance: float = 1e-13
    newton_max_iterations: int = 50
    newton_jacobian_refresh: str = "every"
    output: str | None = None

    def problem_params(self) -> dict:
        out = {}
        for key in ("epsilon", "gamma", "dim"):
            v = getattr(self, key)
            if v is not None:
                out[key] = v
        return out

    def scheme_spec(self) -> SchemeSpec:
        spec = preset(self.scheme) if self.scheme else SchemeSpec(0.0)
        updates = {k: getattr(self, k) for k in ("theta", "a", "b", "c") if getattr(self, k) is not None}
        if self.post is not None:
            updates["post_kind"] = PostKind(self.post)
        if updates:
            spec = replace(spec, label=spec.label + "*", **updates)
        return spec

    def newton(self) -> NewtonConfig:
        return NewtonConfig(self.newton_tolerance, self.newton_max_iterations,
                            JacobianRefresh(self.newton_jacobian_refresh))


# key in the file -> field name
_KEYS = {f.name.replace("newton_", "newton."): f.name for f in fields(ExperimentConfig)}
_INT_FIELDS = {"dim", "M", "seed", "workers", "newton_max_iterations"}
_FLOAT_FIELDS = {"epsilon", "gamma", "sigma", "theta", "a", "b", "c", "T", "burn_in",
                 "explosion_threshold", "newton_tolerance"}


def _parse_value(name, text):
    text = text.strip()
    if text == "" or text.lower() == "none":
        return None
    try:
        if name == "h_list":
            return tuple(float(v) for v in text.replace(",", " ").split())
        if name in _INT_FIELDS:
            return int(text)
        if name in _FLOAT_FIELDS:
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None
    return text


def _format_value(name, v):
    if v is None:
        return "none"
    if name == "h_list":
        return " ".join(repr(float(h)) for h in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def loads(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    extra = [s for s in parser.sections() if s != SECTION]
    if extra or not parser.has_section(SECTION):
        raise ConfigError(f"expected a single [{SECTION}] section")
    values = {}
    for key, text in parser.items(SECTION):
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}")
        name = _KEYS[key]
        values[name] = _parse_value(name, text)
    cfg = ExperimentConfig(**values)
    validate(cfg)
    return cfg


def dumps(cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    buf.write(f"[{SECTION}]\n")
    for key, name in _KEYS.items():
        buf.write(f"{key} = {_format_value(name, getattr(cfg, name))}\n")
    return buf.getvalue()


def load(path) -> ExperimentConfig:
    with open(path) as fh:
        return loads(fh.read())


def validate(cfg: ExperimentConfig):
    if cfg.estimator not in ("time", "ensemble"):
        raise ConfigError("estimator must be 'time' or 'ensemble'")
    if not cfg.h_list or any(not h > 0 for h in cfg.h_list):
        raise ConfigError("h_list must hold positive step sizes")
    try:
        cfg.scheme_spec()
        cfg.newton()
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
