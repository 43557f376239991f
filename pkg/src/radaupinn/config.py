"""Run configuration: flat ``key = value`` files with dotted sections.

Precedence is command-line flags > config file > defaults. A JSON run
manifest written by the CLI is also accepted as a config file, so any run
can be repeated from its manifest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ConfigError
from .network import AdamConfig
from .pinn import TrainConfig
from .solver import NewtonConfig
from .tableau import MAX_STAGES

MODES = ("tableau", "solve", "train", "study")


def _bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return float(text)


def _opt_str(text):
    if text is None or str(text).strip().lower() in ("", "none", "auto"):
        return None
    return str(text).strip()


def _int_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def _positive(x):
    return x > 0


def _nonneg(x):
    return x >= 0


# key -> (parser, check, description of valid range, default)
SCHEMA = {
    "mode": (str, lambda x: x in MODES, f"one of {MODES}", "solve"),
    "problem": (str, lambda x: x in ("hessenberg", "pendulum"),
                "hessenberg or pendulum", "hessenberg"),
    "problem.m": (float, lambda x: x != 0, "non-zero", 1.0),
    "problem.lambda": (float, lambda x: True, "any real", 1.0),
    "stages": (int, lambda x: 1 <= x <= MAX_STAGES, f"1..{MAX_STAGES}", 3),
    "h": (float, _positive, "> 0", 0.05),
    "t0": (float, lambda x: True, "any real", 0.0),
    "tend": (float, lambda x: True, "any real", 1.0),
    "newton.tol": (float, _positive, "> 0", 1e-12),
    "newton.max_iters": (int, _positive, ">= 1", 50),
    "net.depth": (int, _positive, ">= 1", 5),
    "net.width": (int, _positive, ">= 1", 100),
    "net.activation": (_opt_str, lambda x: x in (None, "sigmoid", "sin", "tanh"),
                       "sigmoid, sin, tanh or auto", None),
    "net.eta": (float, _positive, "> 0", 5.0),
    "opt.lr": (float, _positive, "> 0", 1e-3),
    "opt.beta1": (float, lambda x: 0 <= x < 1, "[0, 1)", 0.9),
    "opt.beta2": (float, lambda x: 0 <= x < 1, "[0, 1)", 0.999),
    "opt.eps": (float, _positive, "> 0", 1e-8),
    "opt.decay_rate": (float, lambda x: 0 < x <= 1, "(0, 1]", 1.0),
    "opt.decay_every": (int, _positive, ">= 1", 20000),
    "train.iterations": (int, _nonneg, ">= 0", 100000),
    "train.history_stride": (int, _positive, ">= 1", 100),
    "train.early_stop": (_opt_float, lambda x: x is None or x >= 0, ">= 0 or none", None),
    "train.warm_start": (_bool, lambda x: True, "true/false", False),
    "loss.w_f": (float, _nonneg, ">= 0", 1.0),
    "loss.w_g": (float, _nonneg, ">= 0", 1.0),
    "loss.w_s": (float, _nonneg, ">= 0", 1.0),
    "seed": (int, _nonneg, ">= 0", 0),
    "study.seeds": (_int_list, lambda x: len(x) >= 1, "comma-separated integers", (0,)),
    "study.orders": (_int_list, lambda x: len(x) >= 1 and all(1 <= v <= MAX_STAGES for v in x),
                     f"comma-separated stage counts in 1..{MAX_STAGES}", (2, 3, 5, 7)),
    "out": (_opt_str, lambda x: True, "directory path", None),
    "format": (str, lambda x: x in ("csv", "json"), "csv or json", "csv"),
}


def defaults() -> dict:
    return {key: entry[3] for key, entry in SCHEMA.items()}


def coerce(key, raw):
    """Parse and range-check one value; raises :class:`ConfigError` naming the key."""
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    parser, check, valid, _ = SCHEMA[key]
    if parser is int and isinstance(raw, float) and raw != int(raw):
        raise ConfigError(f"bad value for {key!r}: {raw!r} is not an integer")
    try:
        value = parser(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None
    try:
        ok = check(value)
    except TypeError:
        ok = False
    if not ok:
        raise ConfigError(f"value {raw!r} for {key!r} out of range (expected {valid})")
    return value


def read_config_file(path) -> dict:
    """Raw key/value pairs from a flat config file or a JSON manifest."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        blob = json.loads(text)
        raw = blob.get("config", blob)
        return {k: v for k, v in raw.items()}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def mode(self):
        return self.values["mode"]

    @property
    def problem_params(self):
        return {"m": self.values["problem.m"], "lambda": self.values["problem.lambda"]}

    def newton(self) -> NewtonConfig:
        return NewtonConfig(tol=self["newton.tol"], max_iters=self["newton.max_iters"])

    def train_config(self, seed=None) -> TrainConfig:
        return TrainConfig(
            iterations=self["train.iterations"],
            width=self["net.width"],
            depth=self["net.depth"],
            activation=self["net.activation"],
            eta=self["net.eta"],
            adam=AdamConfig(
                lr=self["opt.lr"], beta1=self["opt.beta1"], beta2=self["opt.beta2"],
                eps=self["opt.eps"], decay_rate=self["opt.decay_rate"],
                decay_every=self["opt.decay_every"],
            ),
            w_f=self["loss.w_f"], w_g=self["loss.w_g"], w_s=self["loss.w_s"],
            seed=self["seed"] if seed is None else seed,
            early_stop=self["train.early_stop"],
            history_stride=self["train.history_stride"],
            warm_start=self["train.warm_start"],
        )

    def to_json(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.values.items()}


def parse_config(path=None, overrides=None) -> RunConfig:
    """Merge defaults, an optional config file and flag overrides."""
    values = defaults()
    if path is not None:
        for key, raw in read_config_file(path).items():
            values[key] = coerce(key, raw)
    for key, raw in (overrides or {}).items():
        values[key] = coerce(key, raw)
    if values["tend"] < values["t0"]:
        raise ConfigError(f"'tend' ({values['tend']}) precedes 't0' ({values['t0']})")
    return RunConfig(values)
