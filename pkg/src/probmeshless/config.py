"""Flat ``key = value`` experiment configuration.

One setting per line, sections expressed by dotted prefixes, ``#`` starts a
comment::

    problem = poisson_1d
    seed = 0
    kernel.family = natural_poisson_1d
    kernel.support_scale = 2.5
    design.m = 10, 20, 40, 80

Values are typed on read: integers, floats, ``true``/``false`` and
comma-separated lists (a trailing comma marks a one-element list); anything
else stays a string.  :func:`dump_config` writes the canonical form, so
``parse(dump(parse(text)))`` equals ``parse(text)``.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

_KEY = re.compile(r"^[a-z][a-z0-9_]*(\.[a-z][a-z0-9_]*)*$")

# key -> (expected type, allowed values or None)
SCHEMA = {
    "problem": (str, ("poisson_1d", "parametric_poisson_1d", "allen_cahn_2d")),
    "seed": (int, None),
    "output.dir": (str, None),
    "kernel.family": (str, ("wendland_c0", "wendland_c2", "squared_exponential", "natural_poisson_1d",
                            "integral")),
    "kernel.base": (str, ("wendland_c0", "wendland_c2")),
    "kernel.support_scale": (float, None),
    "kernel.length_scale": (float, None),
    "kernel.quadrature_order": (int, None),
    "design.source": (str, ("uniform", "file", "optimise")),
    "design.m": ("ints", None),
    "design.file": ("path", None),
    "design.boundary_per_edge": (int, None),
    "design.sweeps": (int, None),
    "design.candidates": (int, None),
    "design.loss": (str, ("a_optimal", "d_optimal")),
    "design.theta": (float, None),
    "forward.theta": (float, None),
    "forward.samples": (int, None),
    "forward.grid": (int, None),
    "observation.locations": ("floats", None),
    "observation.gamma": (float, None),
    "observation.gamma_file": ("path", None),
    "observation.data_file": ("path", None),
    "observation.theta_true": (float, None),
    "observation.grid": (int, None),
    "observation.fine_grid_n": (int, None),
    "inference.method": (str, ("grid", "pcn", "pseudo_marginal")),
    "inference.likelihoods": ("strs", None),
    "inference.iters": (int, None),
    "inference.burn": (int, None),
    "inference.proposal_sd": (float, None),
    "inference.lam": (float, None),
    "inference.lengthscale": (str, ("fixed", "empirical_bayes", "half_cauchy")),
    "inference.lengthscale_scale": (float, None),
    "inference.lengthscale_proposal_sd": (float, None),
    "inference.theta0": (float, None),
    "inference.grid_lo": (float, None),
    "inference.grid_hi": (float, None),
    "inference.grid_n": (int, None),
    "inference.importance": (str, ("isotropic", "laplace", "laplace_mixture")),
    "inference.importance_scale": (float, None),
    "inference.n_importance": (int, None),
    "prior.kind": (str, ("log_gaussian", "gaussian", "uniform", "half_cauchy", "point_mass")),
    "prior.a": (float, None),
    "prior.b": (float, None),
    "allen_cahn.theta": (float, None),
    "allen_cahn.grid_n": (int, None),
    "allen_cahn.bank_size": (int, None),
}


def _parse_scalar(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        out = float(text)
    except ValueError:
        return text
    # nan/inf stay strings so that parsed configs compare equal to themselves
    return out if math.isfinite(out) else text


def parse_value(text: str):
    text = text.strip()
    if "," in text:
        parts = [p.strip() for p in text.split(",")]
        if parts[-1] == "":
            parts = parts[:-1]
        return [_parse_scalar(p) for p in parts]
    return _parse_scalar(text)


def format_value(value) -> str:
    if isinstance(value, (list, tuple)):
        items = [format_value(v) for v in value]
        return ", ".join(items) + ("," if len(items) == 1 else "")
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class ExperimentConfig:
    """Parsed settings plus the line each one came from (for diagnostics)."""

    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)
    source: str = "<string>"

    def __contains__(self, key):
        return key in self.values

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.values == other.values

    def where(self, key: str) -> str:
        line = self.lines.get(key)
        return f"{self.source}:{line}" if line else self.source

    def error(self, key: str, message: str) -> ConfigurationError:
        return ConfigurationError(f"{self.where(key)}: field '{key}': {message}")

    def get(self, key: str, default=None):
        if key not in SCHEMA:
            raise KeyError(key)
        if key not in self.values:
            return default
        return _coerce(self, key, self.values[key])

    def require(self, key: str):
        if key not in self.values:
            raise ConfigurationError(f"{self.source}: missing required field '{key}'")
        return self.get(key)

    def set(self, key: str, value) -> None:
        self.values[key] = value


def _coerce(cfg: ExperimentConfig, key: str, raw):
    kind, allowed = SCHEMA[key]
    try:
        if kind is int:
            if isinstance(raw, bool) or not isinstance(raw, int):
                raise TypeError
            out = raw
        elif kind is float:
            if isinstance(raw, bool) or not isinstance(raw, (int, float)):
                raise TypeError
            out = float(raw)
        elif kind is str or kind == "path":
            if not isinstance(raw, str):
                raise TypeError
            out = raw
        elif kind == "ints":
            vals = raw if isinstance(raw, list) else [raw]
            if any(isinstance(v, bool) or not isinstance(v, int) for v in vals):
                raise TypeError
            out = list(vals)
        elif kind == "floats":
            vals = raw if isinstance(raw, list) else [raw]
            if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in vals):
                raise TypeError
            out = [float(v) for v in vals]
        else:  # "strs"
            vals = raw if isinstance(raw, list) else [raw]
            if any(not isinstance(v, str) for v in vals):
                raise TypeError
            out = list(vals)
    except TypeError:
        expected = {int: "an integer", float: "a number", str: "a string"}.get(kind, f"a value of kind {kind}")
        raise cfg.error(key, f"expected {expected}, got {format_value(raw)!r}") from None
    if allowed is not None and out not in allowed:
        raise cfg.error(key, f"{out!r} is not one of {', '.join(allowed)}")
    return out


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parse config text, checking keys against :data:`SCHEMA` and value types."""
    cfg = ExperimentConfig(source=source)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not _KEY.match(key):
            raise ConfigurationError(f"{source}:{lineno}: malformed key {key!r}")
        if key not in SCHEMA:
            raise ConfigurationError(f"{source}:{lineno}: unknown field '{key}'")
        if key in cfg.values:
            raise ConfigurationError(f"{source}:{lineno}: field '{key}' set twice "
                                     f"(first on line {cfg.lines[key]})")
        if value == "":
            raise ConfigurationError(f"{source}:{lineno}: field '{key}' has no value")
        cfg.values[key] = parse_value(value)
        cfg.lines[key] = lineno
        cfg.get(key)  # type check now, so the diagnostic carries the line
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    cfg = parse_config(text, str(path))
    base = path.parent
    for key, (kind, _) in SCHEMA.items():
        if kind == "path" and key in cfg.values:
            p = Path(cfg.values[key])
            if not p.is_absolute():
                p = base / p
            if not p.exists():
                raise cfg.error(key, f"file {p} does not exist")
            cfg.values[key] = str(p)
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    """Canonical text: keys sorted, one per line."""
    return "".join(f"{k} = {format_value(cfg.values[k])}\n" for k in sorted(cfg.values))
