"""Flat key-value run configuration.

The format is deliberately plain: one ``section.key = value`` per line,
``#`` comments, UTF-8. Unknown keys and out-of-range values fail with the
offending key named, and serialization round-trips exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dc_fields

from .errors import ParseError, ValidationError
from .loads import BUILTIN_LOADS

MODES = ("cell", "homog-run", "fine-run", "validate", "mms")


@dataclass(frozen=True)
class RunConfig:
    # geometry
    r: float = 0.25
    n: int = 16
    ax: float = 0.0
    bx: float = 1.0
    ay: float = 0.0
    by: float = 1.0
    macro_n: int = 40
    epsilon: float = 0.25
    # model
    gamma: float = 0.1
    eta: float = 1e-5
    steps: int = 50
    altmin_tol: float = 1e-6
    altmin_max_iters: int = 100
    cg_tol: float = 1e-10
    kkt_tol: float = 1e-6
    # load
    program: str = "uniaxial"
    amplitude: float = 1.0
    offset: float = 0.5
    # run
    mode: str = ""
    out: str = "out"
    vtk_stride: int = 10
    figures: bool = True
    freeze_v: bool = False
    notch: tuple = ()
    epsilons: tuple = (0.25, 0.125, 0.0625)
    mms_resolutions: tuple = (8, 16, 32)


_SCHEMA = {
    "geometry.r": ("r", float),
    "geometry.n": ("n", int),
    "geometry.ax": ("ax", float),
    "geometry.bx": ("bx", float),
    "geometry.ay": ("ay", float),
    "geometry.by": ("by", float),
    "geometry.macro_n": ("macro_n", int),
    "geometry.epsilon": ("epsilon", float),
    "model.gamma": ("gamma", float),
    "model.eta": ("eta", float),
    "model.steps": ("steps", int),
    "model.altmin_tol": ("altmin_tol", float),
    "model.altmin_max_iters": ("altmin_max_iters", int),
    "model.cg_tol": ("cg_tol", float),
    "model.kkt_tol": ("kkt_tol", float),
    "load.program": ("program", str),
    "load.amplitude": ("amplitude", float),
    "load.offset": ("offset", float),
    "run.mode": ("mode", str),
    "run.out": ("out", str),
    "run.vtk_stride": ("vtk_stride", int),
    "run.figures": ("figures", bool),
    "run.freeze_v": ("freeze_v", bool),
    "run.notch": ("notch", "floats"),
    "run.epsilons": ("epsilons", "floats"),
    "run.mms_resolutions": ("mms_resolutions", "ints"),
}

_FIELD_TO_KEY = {attr: key for key, (attr, _) in _SCHEMA.items()}


def _coerce(kind, raw, key, lineno):
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if kind == "floats":
            return tuple(float(t) for t in raw.split(",") if t.strip()) \
                if raw else ()
        if kind == "ints":
            return tuple(int(t) for t in raw.split(",") if t.strip()) \
                if raw else ()
    except ValueError:
        raise ParseError(f"cannot parse value for {key}",
                         line=lineno, value=raw) from None
    raise ParseError(f"unknown value kind for {key}", line=lineno)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a flat config document."""
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError("expected 'section.key = value'", line=lineno,
                             content=stripped)
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _SCHEMA:
            raise ValidationError(f"unknown configuration key {key!r}",
                                  line=lineno)
        attr, kind = _SCHEMA[key]
        overrides[attr] = _coerce(kind, raw, key, lineno)
    cfg = RunConfig(**overrides)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig):
    def bad(key, why):
        raise ValidationError(f"invalid value for {key}: {why}")

    if not (0.0 <= cfg.r < 0.5):
        bad("geometry.r", "need 0 <= r < 1/2")
    if cfg.n < 4:
        bad("geometry.n", "need n >= 4")
    if not (cfg.bx > cfg.ax and cfg.by > cfg.ay):
        bad("geometry.bx", "domain sides must be positive")
    if cfg.macro_n < 1:
        bad("geometry.macro_n", "need at least one segment")
    if cfg.epsilon <= 0:
        bad("geometry.epsilon", "need epsilon > 0")
    if cfg.gamma <= 0:
        bad("model.gamma", "need gamma > 0")
    if not (0 < cfg.eta < cfg.gamma):
        bad("model.eta", "need 0 < eta < gamma")
    if cfg.steps < 1:
        bad("model.steps", "need at least one step")
    if cfg.altmin_max_iters < 1:
        bad("model.altmin_max_iters", "need at least one iteration")
    if cfg.program not in BUILTIN_LOADS:
        bad("load.program", f"unknown program; choose from {BUILTIN_LOADS}")
    if cfg.mode and cfg.mode not in MODES:
        bad("run.mode", f"choose from {MODES}")
    if cfg.notch and len(cfg.notch) != 4:
        bad("run.notch", "expected 'x0,y0,x1,y1'")
    if not cfg.epsilons:
        bad("run.epsilons", "need at least one epsilon")
    if len(cfg.mms_resolutions) < 2:
        bad("run.mms_resolutions", "need at least two resolutions")


def serialize_config(cfg: RunConfig) -> str:
    """Render the fully resolved config; reparsing yields an equal config."""
    lines = []
    for f in dc_fields(cfg):
        key = _FIELD_TO_KEY[f.name]
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            rendered = ",".join(repr(v) for v in value)
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"
