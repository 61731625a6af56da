"""Test functions ``phi`` used by response functionals ``E[Y phi(X)]``."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

_ID = re.compile(r"^(?P<family>[a-z_]+)\((?P<args>[^()]*)\)$")
_ARITY = {"bump": 2, "power": 1}


@dataclass(frozen=True)
class TestFunction:
    """``bump(c, w)``: ``exp(-(x-c)^2 / (2 w^2))``; ``power(k)``: ``x**k``."""

    __test__ = False  # keep pytest from collecting this class

    family: str
    params: tuple

    def __post_init__(self):
        if self.family not in _ARITY:
            raise ValueError(f"unregistered test function family '{self.family}'")
        if len(self.params) != _ARITY[self.family]:
            raise ValueError(f"{self.family} takes {_ARITY[self.family]} parameter(s)")
        if self.family == "bump" and not self.params[1] > 0:
            raise ValueError("bump width must be positive")
        if self.family == "power" and (int(self.params[0]) != self.params[0] or self.params[0] < 0):
            raise ValueError("power exponent must be a non-negative integer")

    @property
    def id(self) -> str:
        if self.family == "power":
            return f"power({int(self.params[0])})"
        return f"{self.family}({','.join(repr(float(p)) for p in self.params)})"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "bump":
            c, w = self.params
            return np.exp(-0.5 * ((x - c) / w) ** 2)
        return x ** int(self.params[0])


def bump(center: float, width: float = 1.0) -> TestFunction:
    return TestFunction("bump", (float(center), float(width)))


def power(k: int) -> TestFunction:
    return TestFunction("power", (int(k),))


def parse_test_function(spec) -> TestFunction:
    """Accepts a :class:`TestFunction` or an id such as ``"bump(-1.0,1.0)"``."""
    if isinstance(spec, TestFunction):
        return spec
    m = _ID.match(str(spec).replace(" ", ""))
    if not m or m["family"] not in _ARITY:
        raise ValueError(f"unregistered test function '{spec}'")
    args = [a for a in m["args"].split(",") if a]
    if m["family"] == "power":
        return power(int(args[0])) if len(args) == 1 else TestFunction("power", tuple(args))
    return TestFunction(m["family"], tuple(float(a) for a in args))
