"""Boundary load programs g(x, s) and their pseudo-time rates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class LoadProgram:
    """Closed-form boundary datum g(x, s) with its rate dg/ds, both defined
    on the closure of the domain for s in [0, 1]."""

    name: str
    g: Callable[[np.ndarray, float], np.ndarray]
    g_rate: Callable[[np.ndarray, float], np.ndarray]
    params: dict = field(default_factory=dict)


def _uniaxial(amplitude):
    return (lambda x, s: amplitude * s * x[:, 0],
            lambda x, s: amplitude * x[:, 0])


def _shear(amplitude):
    return (lambda x, s: amplitude * s * x[:, 0] * x[:, 1],
            lambda x, s: amplitude * x[:, 0] * x[:, 1])


def _surfing(amplitude, offset):
    return (lambda x, s: amplitude * s * np.maximum(0.0, x[:, 0] - offset),
            lambda x, s: amplitude * np.maximum(0.0, x[:, 0] - offset))


def _zero():
    return (lambda x, s: np.zeros(x.shape[0]),
            lambda x, s: np.zeros(x.shape[0]))


BUILTIN_LOADS = ("uniaxial", "shear", "surfing", "zero")


def make_load(name: str, amplitude: float = 1.0,
              offset: float = 0.5) -> LoadProgram:
    """Built-in load library; ``offset`` only matters for ``surfing``."""
    if name == "uniaxial":
        g, gr = _uniaxial(amplitude)
    elif name == "shear":
        g, gr = _shear(amplitude)
    elif name == "surfing":
        g, gr = _surfing(amplitude, offset)
    elif name == "zero":
        g, gr = _zero()
    else:
        raise ValidationError("unknown load program", name=name,
                              known=BUILTIN_LOADS)
    return LoadProgram(name, g, gr,
                       {"amplitude": amplitude, "offset": offset})
