"""Experiment presets and the INI-style config file.

A config file has up to six sections; every key is optional and unknown
sections or keys are rejected::

    [experiment]
    preset = heat-ir-1        ; start from a named preset
    problem = heat            ; burgers | heat
    method = two-phase        ; adam | two-phase
    roles = f-u               ; f-u: L1=MSE_f, L2=MSE_u ; u-f: swapped
    budget = 3000             ; internal iterations
    seed = 0                  ; network initialisation
    out_dir = runs/heat

    [network]
    hidden_layers = 4
    width = 20
    normalize_inputs = false

    [points]
    n_collocation = 1000
    n_data = 100
    point_seed = 0

    [adam]
    learning_rate = 0.0005

    [two_phase]
    r = 0.99
    theta0 = 0.8
    it_max = 100
    alpha = 4
    beta = 1
    decrement_variant = paper
    theta_min = 1e-8
    reset_adam_per_phase = false
    accept_null_step = false

    [output]
    checkpoint_every = 0
    plots = false
"""

from __future__ import annotations

import configparser
from dataclasses import fields, replace

from .harness import ExperimentConfig, ExperimentError

SECTIONS = {
    "experiment": ("problem", "method", "roles", "budget", "seed", "out_dir"),
    "network": ("hidden_layers", "width", "normalize_inputs"),
    "points": ("n_collocation", "n_data", "point_seed"),
    "adam": ("learning_rate",),
    "two_phase": (
        "r", "theta0", "it_max", "alpha", "beta", "decrement_variant", "theta_min",
        "reset_adam_per_phase", "accept_null_step",
    ),
    "output": ("checkpoint_every", "plots"),
}

_PAPER_BURGERS = dict(
    problem="burgers", hidden_layers=9, width=20, n_collocation=10_000, n_data=100, budget=20_000
)
_PAPER_HEAT = dict(
    problem="heat", hidden_layers=4, width=50, n_collocation=10_000, n_data=100, budget=3000
)
_IR = dict(method="two-phase", r=0.99, theta0=0.8)

PRESETS: dict[str, dict] = {
    # full-scale runs as described for each benchmark
    "burgers-adam": dict(_PAPER_BURGERS, method="adam"),
    "burgers-ir-1": dict(_PAPER_BURGERS, **_IR, roles="f-u", it_max=150, alpha=0.5, beta=4.0),
    "burgers-ir-2": dict(_PAPER_BURGERS, **_IR, roles="u-f", it_max=250, alpha=2.0, beta=1.5),
    "heat-adam": dict(_PAPER_HEAT, method="adam"),
    "heat-ir-1": dict(_PAPER_HEAT, **_IR, roles="f-u", it_max=100, alpha=4.0, beta=1.0),
    "heat-ir-2": dict(_PAPER_HEAT, **_IR, roles="u-f", it_max=150, alpha=1.5, beta=1.0),
    # desk-scale runs used by the acceptance suite
    "heat-desk-adam": dict(problem="heat", method="adam", hidden_layers=4, width=20,
                           n_collocation=1000, n_data=100, budget=3000),
    "heat-desk-ir": dict(problem="heat", hidden_layers=4, width=20, n_collocation=1000,
                         n_data=100, budget=3000, **_IR, roles="f-u", it_max=100,
                         alpha=4.0, beta=1.0),
    "burgers-desk-ir": dict(problem="burgers", hidden_layers=4, width=20, n_collocation=2000,
                            n_data=100, budget=8000, **_IR, roles="f-u", it_max=150,
                            alpha=0.5, beta=4.0),
}

_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(key: str, raw: str):
    kind = _TYPES[key]
    text = raw.strip()
    if "bool" in kind:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ExperimentError(f"{key}: expected a boolean, got {raw!r}")
    if kind.startswith("int"):
        try:
            return int(text)
        except ValueError:
            raise ExperimentError(f"{key}: expected an integer, got {raw!r}") from None
    if kind.startswith("float"):
        if "None" in kind and text.lower() in ("", "none"):
            return None
        try:
            return float(text)
        except ValueError:
            raise ExperimentError(f"{key}: expected a number, got {raw!r}") from None
    if "None" in kind and text.lower() in ("", "none"):
        return None
    return text


def preset(name: str) -> ExperimentConfig:
    try:
        values = PRESETS[name]
    except KeyError:
        raise ExperimentError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}") from None
    return replace(ExperimentConfig(), **values)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ExperimentError(f"{source}: {exc}") from None
    base = ExperimentConfig()
    if parser.has_option("experiment", "preset"):
        base = preset(parser.get("experiment", "preset").strip())
    overrides = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ExperimentError(f"{source}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if section == "experiment" and key == "preset":
                continue
            if key not in SECTIONS[section]:
                raise ExperimentError(f"{source}: unknown key {key!r} in [{section}]")
            overrides[key] = _coerce(key, raw)
    return replace(base, **overrides)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ExperimentError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))


def apply_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Replace fields whose override is not ``None``."""
    given = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(given) - set(_TYPES)
    if unknown:
        raise ExperimentError(f"unknown settings: {sorted(unknown)}")
    return replace(cfg, **given)
