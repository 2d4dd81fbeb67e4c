"""Run configuration: flat ``dotted.key = value`` files or JSON, defaults,
validation and resolution of ``auto`` fields.

Grammar of the flat format, one entry per line::

    # comment
    key = value        # trailing comment

Lists are comma separated.  JSON files (``.json`` suffix, or text starting
with ``{``) may be nested; nested objects are flattened into dotted keys.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["ConfigError", "KEYS", "MODES", "load_config", "parse_flat", "flatten", "validate", "fresh_seed"]

MODES = ("sa", "qast", "compare", "oracle-check")
AUTO = "auto"


class ConfigError(ValueError):
    """Raised with one line per offending field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class Key:
    kind: str  # str | int | float | bool | choice | ints | floats
    default: object = None
    auto: bool = False
    choices: tuple = ()
    help: str = ""


KEYS = {
    "data.path": Key("str", help="CSV file with one point per row"),
    "data.format": Key("choice", "csv", choices=("csv",)),
    "model.type": Key("choice", "mog_niw", choices=("mog_niw", "sq_loss")),
    "model.kappa0": Key("float", 0.1, help="NIW mean pseudo-count"),
    "model.nu0": Key("float", AUTO, auto=True, help="NIW degrees of freedom (auto: d + 2)"),
    "model.alpha": Key("float", 1.0, help="Dirichlet concentration on cluster weights"),
    "model.mu0": Key("floats", AUTO, auto=True, help="NIW mean (auto: data mean)"),
    "model.lambda0": Key(
        "floats", AUTO, auto=True, help="NIW scale, d diagonal entries or d*d row-major (auto: diag of data variance)"
    ),
    "k": Key("int", help="number of clusters"),
    "mode": Key("choice", "qast", choices=MODES),
    "m": Key("int", 8, help="number of replicas"),
    "seed": Key("int", help="root seed (absent: drawn from system entropy and recorded)"),
    "seeds": Key("ints", AUTO, auto=True, help="compare seeds (auto: seed .. seed + compare.n_seeds - 1)"),
    "compare.n_seeds": Key("int", 20),
    "schedule.beta0": Key("float", AUTO, auto=True, help="auto: 0.2 m for qast, 0.2 for sa"),
    "schedule.sa_beta0": Key("float", AUTO, auto=True, help="SA beta0 in compare mode (auto: 0.2)"),
    "schedule.r_beta": Key("float", 1.02),
    "schedule.gamma0": Key("float", AUTO, auto=True, help="auto: coupling held below 1e-3 until the hold target"),
    "schedule.r_gamma": Key("float", AUTO, auto=True, help="auto: 1.05 r_beta"),
    "schedule.beta_hold_target": Key("float", AUTO, auto=True, help="auto: m"),
    "max_iters": Key("int", 1000),
    "convergence.tol": Key("float", 1e-9),
    "convergence.window": Key("int", 50),
    "sampler.block_order": Key("bool", False, help="update even replicas, then odd ones"),
    "oracle.draws": Key("int", 100, help="random instances for oracle-check"),
    "output.dir": Key("str", "out"),
}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def parse_flat(text, source="<config>"):
    """Parse the flat ``key = value`` format into a dict of raw strings."""
    out = {}
    problems = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            problems.append(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        if key in out:
            problems.append(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    if problems:
        raise ConfigError(problems)
    return out


def flatten(obj, prefix=""):
    """Flatten nested dicts into dotted keys; lists and scalars are leaves."""
    out = {}
    for key, value in obj.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(flatten(value, name + "."))
        else:
            out[name] = value
    return out


def load_config(path):
    """Read a config file into a flat dict of raw (unvalidated) values."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: invalid JSON: {exc}"]) from exc
        if not isinstance(obj, dict):
            raise ConfigError([f"{path}: top level must be an object"])
        return flatten(obj)
    return parse_flat(text, str(path))


def _convert(key, spec, value):
    if isinstance(value, str):
        value = value.strip()
        if spec.auto and value.lower() == AUTO:
            return AUTO
    elif spec.auto and value is None:
        return AUTO
    kind = spec.kind
    if kind == "str":
        if not isinstance(value, str) or not value:
            raise ValueError("expected a non-empty string")
        return value
    if kind == "choice":
        if value not in spec.choices:
            raise ValueError(f"expected one of {', '.join(spec.choices)}, got {value!r}")
        return value
    if kind == "bool":
        if isinstance(value, bool):
            return value
        low = str(value).lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {value!r}")
    if kind == "int":
        return _to_int(value)
    if kind == "float":
        return _to_float(value)
    if isinstance(value, str):
        items = [v for v in value.split(",") if v.strip()]
    elif isinstance(value, (list, tuple)):
        items = list(np.ravel(np.asarray(value, dtype=object)))
    else:
        items = [value]
    if not items:
        raise ValueError("expected a non-empty list")
    return [_to_int(v) for v in items] if kind == "ints" else [_to_float(v) for v in items]


def _to_int(value):
    if isinstance(value, bool):
        raise ValueError(f"expected an integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    try:
        return int(str(value).strip())
    except ValueError:
        raise ValueError(f"expected an integer, got {value!r}") from None


def _to_float(value):
    if isinstance(value, bool):
        raise ValueError(f"expected a number, got {value!r}")
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"expected a number, got {value!r}") from None
    if not np.isfinite(out):
        raise ValueError(f"expected a finite number, got {value!r}")
    return out


def validate(raw, mode=None):
    """Typed, defaulted config from raw values.

    ``mode`` (when given) overrides the ``mode`` key.  Every problem found is
    collected and raised together in one :class:`ConfigError`.
    """
    problems = []
    cfg = {}
    for key in raw:
        if key not in KEYS:
            problems.append(f"{key}: unknown key")
    for key, spec in KEYS.items():
        if key in raw and raw[key] is not None:
            try:
                cfg[key] = _convert(key, spec, raw[key])
            except ValueError as exc:
                problems.append(f"{key}: {exc}")
        else:
            cfg[key] = spec.default
    if mode is not None:
        cfg["mode"] = mode
    mode = cfg["mode"]

    def need(key, ok, why):
        value = cfg.get(key)
        if value is not None and value != AUTO and not ok(value):
            problems.append(f"{key}: {why}, got {value!r}")

    need("model.kappa0", lambda v: v > 0, "must be > 0")
    need("model.alpha", lambda v: v > 0, "must be > 0")
    need("model.nu0", lambda v: v > 0, "must be > 0")
    need("k", lambda v: v >= 1, "must be >= 1")
    need("m", lambda v: v >= 1, "must be >= 1")
    need("compare.n_seeds", lambda v: v >= 2, "must be >= 2")
    need("seeds", lambda v: len(v) >= 2 and len(set(v)) == len(v), "needs at least two distinct seeds")
    need("schedule.beta0", lambda v: v > 0, "must be > 0")
    need("schedule.sa_beta0", lambda v: v > 0, "must be > 0")
    need("schedule.r_beta", lambda v: v > 1, "must be > 1")
    need("schedule.gamma0", lambda v: v > 0, "must be > 0")
    need("schedule.r_gamma", lambda v: v > 1, "must be > 1")
    need("schedule.beta_hold_target", lambda v: v > 0, "must be > 0")
    need("max_iters", lambda v: v >= 1, "must be >= 1")
    need("convergence.tol", lambda v: v >= 0, "must be >= 0")
    need("convergence.window", lambda v: v >= 1, "must be >= 1")
    need("oracle.draws", lambda v: v >= 1, "must be >= 1")
    for key in ("seed", "seeds"):
        need(key, lambda v: min(np.atleast_1d(v)) >= 0, "seeds must be non-negative")
    if mode != "oracle-check":
        for key in ("data.path", "k"):
            if cfg.get(key) is None:
                problems.append(f"{key}: required for mode {mode}")
    if cfg.get("sampler.block_order") and isinstance(cfg.get("m"), int) and cfg["m"] % 2:
        problems.append(f"sampler.block_order: needs an even m, got m={cfg['m']}")
    if problems:
        raise ConfigError(problems)
    return cfg


def fresh_seed():
    """A non-negative seed from system entropy (used only when none is given)."""
    return int(np.random.SeedSequence().entropy % (1 << 63))
