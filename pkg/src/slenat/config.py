"""Experiment configuration: strict JSON parsing and validation.

A config is one JSON object.  ``kind`` and ``kappa`` are required; every
other key has the default listed in :data:`DEFAULTS`.  Unknown keys are
rejected (with a suggestion when one is close), and relative paths are
resolved against the directory of the config file.
"""
from __future__ import annotations

import difflib
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

KINDS = ("simulate", "phi", "theta", "minkowski", "dvariation", "moments", "acceptance")
REQUIRED = ("kind", "kappa")
PATH_KEYS = ("out", "phi_table")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field '{field_name}': {message}")
        self.field = field_name


@dataclass
class ExperimentConfig:
    kind: str
    kappa: float
    dt: float = 1e-3
    horizon: float = 1.0
    base_seed: int = 0
    n_seeds: int = 10
    domain: list = field(default_factory=lambda: [-1.0, 1.0, 0.5, 1.5])
    points: list = field(default_factory=lambda: [[0.0, 1.0], [1.0, 1.0]])
    times: list = field(default_factory=lambda: [0.5, 1.0])
    levels: list = field(default_factory=lambda: [3, 4, 5])
    grid: list = field(default_factory=lambda: [16, 16])
    n_samples: int = 400
    phi_table: str | None = None
    eps: list | None = None
    meshes: list = field(default_factory=lambda: [10, 100, 1000])
    r: float = 1.0
    s_values: list = field(default_factory=list)
    stride: int = 1
    scale: float = 1.0
    criteria: list | None = None
    out: str = "out"

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULTS = {f.name: (f.default_factory() if callable(f.default_factory) else f.default)
            for f in fields(ExperimentConfig) if f.name not in REQUIRED}

HELP = {
    "kind": "experiment kind: " + ", ".join(KINDS),
    "kappa": "SLE parameter, 0 < kappa < 8",
    "dt": "time step of the driving function",
    "horizon": "final time of each chain (a multiple of dt)",
    "base_seed": "stream i uses seed base_seed + i",
    "n_seeds": "number of chains / seeds",
    "domain": "box [x_min, x_max, y_min, y_max] with 0 < y_min",
    "points": "list of [re, im] points in the upper half-plane",
    "times": "output times (multiples of dt, at most horizon)",
    "levels": "dyadic levels n for theta",
    "grid": "phi table nodes [nx, ny]",
    "n_samples": "hitting samples per phi node (>= 100)",
    "phi_table": "optional CSV of a saved phi table (else one is built)",
    "eps": "decreasing neighborhood radii (default: tied to the slit height)",
    "meshes": "partition sizes for the d-variation; each divides horizon/dt",
    "r": "exponent r of the reverse martingale",
    "s_values": "times s for E I_(s,H) (needs a phi table)",
    "stride": "curve output stride in grid steps",
    "scale": "acceptance sample-count multiplier",
    "criteria": "acceptance criteria to run (default: all)",
    "out": "output directory",
}


def help_text() -> str:
    lines = ["config keys (JSON object):"]
    for k in ("kind", "kappa", *DEFAULTS):
        d = "required" if k in REQUIRED else f"default {json.dumps(DEFAULTS[k])}"
        lines.append(f"  {k:<10} {HELP[k]} ({d})")
    return "\n".join(lines)


def _num(obj: dict, key: str, kind=float):
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    if kind is int:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(key, f"expected an integer, got {v!r}")
        return int(v)
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(key, "must be finite")
    return v


def _list(obj: dict, key: str, kind=float, allow_none=False):
    v = obj[key]
    if v is None and allow_none:
        return None
    if not isinstance(v, list):
        raise ConfigError(key, f"expected a list, got {v!r}")
    return [_num({key: x}, key, kind) for x in v]


def from_dict(obj: dict, base_dir: str | os.PathLike | None = None) -> ExperimentConfig:
    """Strict conversion of a parsed JSON object."""
    if not isinstance(obj, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    for k in obj:
        if k not in known:
            close = difflib.get_close_matches(k, sorted(known), n=1)
            hint = f"; did you mean '{close[0]}'?" if close else ""
            raise ConfigError(k, f"unknown key{hint}")
    for k in REQUIRED:
        if k not in obj:
            raise ConfigError(k, "missing required field")
    o = {**DEFAULTS, **obj}
    kind = o["kind"]
    if kind not in KINDS:
        raise ConfigError("kind", f"unknown experiment kind {kind!r}; expected one of {', '.join(KINDS)}")
    pts = o["points"]
    if not isinstance(pts, list) or not all(isinstance(p, list) and len(p) == 2 for p in pts):
        raise ConfigError("points", "expected a list of [re, im] pairs")
    cfg = ExperimentConfig(
        kind=kind,
        kappa=_num(o, "kappa"),
        dt=_num(o, "dt"),
        horizon=_num(o, "horizon"),
        base_seed=_num(o, "base_seed", int),
        n_seeds=_num(o, "n_seeds", int),
        domain=_list(o, "domain"),
        points=[[_num({"points": a}, "points"), _num({"points": b}, "points")] for a, b in pts],
        times=_list(o, "times"),
        levels=_list(o, "levels", int),
        grid=_list(o, "grid", int),
        n_samples=_num(o, "n_samples", int),
        phi_table=o["phi_table"],
        eps=_list(o, "eps", allow_none=True),
        meshes=_list(o, "meshes", int),
        r=_num(o, "r"),
        s_values=_list(o, "s_values"),
        stride=_num(o, "stride", int),
        scale=_num(o, "scale"),
        criteria=None if o["criteria"] is None else [str(c) for c in o["criteria"]],
        out=o["out"],
    )
    for k in PATH_KEYS:
        v = getattr(cfg, k)
        if v is not None:
            if not isinstance(v, str):
                raise ConfigError(k, f"expected a path string, got {v!r}")
            if base_dir is not None and not os.path.isabs(v):
                setattr(cfg, k, os.path.normpath(os.path.join(base_dir, v)))
    return cfg


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"no such file: {path}")
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    return from_dict(obj, path.resolve().parent)


def serialize(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"


def normalize(obj: dict, base_dir=None) -> str:
    """Canonical text of a raw config: defaults filled, numbers typed, paths resolved."""
    return serialize(from_dict(obj, base_dir))


def validate(cfg: ExperimentConfig) -> None:
    """Check every field against the preconditions of the modules ``cfg.kind`` uses."""
    from .core import make_params, n_steps_for
    from .errors import ParameterError
    from .green import DomainBox

    try:
        make_params(cfg.kappa)
    except ParameterError as exc:
        raise ConfigError("kappa", str(exc)) from None
    if not cfg.dt > 0:
        raise ConfigError("dt", "must be positive")
    try:
        n = n_steps_for(cfg.horizon, cfg.dt)
    except ParameterError as exc:
        raise ConfigError("horizon", str(exc)) from None
    if cfg.n_seeds < 1:
        raise ConfigError("n_seeds", "must be at least 1")
    if cfg.base_seed < 0:
        raise ConfigError("base_seed", "must be nonnegative")
    if len(cfg.domain) != 4:
        raise ConfigError("domain", "expected [x_min, x_max, y_min, y_max]")
    try:
        DomainBox(*cfg.domain)
    except ParameterError as exc:
        raise ConfigError("domain", str(exc)) from None
    if not cfg.points or any(not p[1] > 0 for p in cfg.points):
        raise ConfigError("points", "points must lie in the upper half-plane")
    for t in cfg.times:
        k = round(t / cfg.dt)
        if t < 0 or t > cfg.horizon * (1 + 1e-12) or abs(k * cfg.dt - t) > 1e-9 * max(1.0, t):
            raise ConfigError("times", f"t={t} is not a multiple of dt in [0, horizon]")
    if cfg.times != sorted(cfg.times):
        raise ConfigError("times", "must be nondecreasing")
    if len(cfg.grid) != 2 or min(cfg.grid) < 8:
        raise ConfigError("grid", "expected [nx, ny] with both at least 8")
    if cfg.n_samples < 100:
        raise ConfigError("n_samples", "must be at least 100")
    if cfg.stride < 1 or n % cfg.stride:
        raise ConfigError("stride", "must be a positive divisor of horizon/dt")
    if not cfg.scale > 0:
        raise ConfigError("scale", "must be positive")
    if cfg.kind == "theta":
        m = -math.log2(cfg.dt)
        if abs(m - round(m)) > 1e-12:
            raise ConfigError("dt", "theta needs dt = 2^-m so dyadic times fall on the grid")
        if not cfg.levels or min(cfg.levels) < 0 or max(cfg.levels) > round(m):
            raise ConfigError("levels", f"levels must lie in [0, {round(m)}] for dt={cfg.dt}")
    if cfg.eps is not None:
        e = cfg.eps
        if not e or min(e) <= 0 or any(b >= a for a, b in zip(e, e[1:])):
            raise ConfigError("eps", "must be positive and strictly decreasing")
    if cfg.kind == "dvariation":
        for m_ in cfg.meshes:
            if m_ < 1 or n % m_:
                raise ConfigError("meshes", f"mesh {m_} does not divide the {n} steps")
    if cfg.kind == "moments":
        for s in cfg.s_values:
            if not s > 0 or abs(round(s / cfg.dt) * cfg.dt - s) > 1e-9 * s:
                raise ConfigError("s_values", f"s={s} is not a positive multiple of dt")
    if cfg.criteria is not None:
        bad = [c for c in cfg.criteria if c not in {str(i) for i in range(1, 13)}]
        if bad:
            raise ConfigError("criteria", f"unknown criteria {bad}; expected 1..12")
    if cfg.phi_table is not None and not os.path.isfile(cfg.phi_table):
        raise ConfigError("phi_table", f"no such file: {cfg.phi_table}")
