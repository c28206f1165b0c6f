"""Reaction terms: exponential, shifted power and custom nonlinearities."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ProfileError, SaturationError

__all__ = ["Nonlinearity", "is_superlinear", "SATURATION_BOUND"]

# Values beyond this magnitude are reported as saturation, never clamped.
SATURATION_BOUND = 1e300


def _checked(values, what: str):
    arr = np.asarray(values, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        bad = ~np.isfinite(arr) | (np.abs(arr) > SATURATION_BOUND)
    if np.any(bad):
        raise SaturationError(f"{what} exceeded 1e300; treating as blow-up evidence")
    return arr


@dataclass(frozen=True)
class Nonlinearity:
    """A scalar reaction f(s) with derivative f'(s).

    The power family is the shifted power (1+s)^m so that f(0) = 1 > 0, which
    the parametric problem requires of its reaction term.
    """

    kind: str
    m: Optional[float]
    _value: Callable
    _derivative: Callable

    @classmethod
    def exponential(cls) -> "Nonlinearity":
        return cls("exponential", None, np.exp, np.exp)

    @classmethod
    def power(cls, m: float) -> "Nonlinearity":
        m = float(m)

        def val(s):
            return np.power(1.0 + np.asarray(s, float), m)

        def der(s):
            return m * np.power(1.0 + np.asarray(s, float), m - 1.0)

        return cls("power", m, val, der)

    @classmethod
    def custom(cls, f: Callable, fprime: Callable) -> "Nonlinearity":
        return cls("custom", None, f, fprime)

    def value(self, s):
        with np.errstate(over="ignore", invalid="ignore"):
            arr = _checked(self._value(np.asarray(s, dtype=float)),
                           "reaction value")
        return float(arr) if np.ndim(s) == 0 else arr

    __call__ = value

    def derivative(self, s):
        with np.errstate(over="ignore", invalid="ignore"):
            arr = _checked(self._derivative(np.asarray(s, dtype=float)),
                           "reaction derivative")
        return float(arr) if np.ndim(s) == 0 else arr

    def validate_parametric(self, s_max: float = 100.0) -> None:
        """Check h(0) > 0 and h' >= 0 on a sample of [0, s_max]."""
        if not self.value(0.0) > 0:
            raise ProfileError("parametric reaction requires h(0) > 0")
        ss = np.linspace(0.0, s_max, 257)
        try:
            der = self.derivative(ss)
        except SaturationError:
            return
        if np.any(der < 0):
            raise ProfileError("parametric reaction requires h increasing")


def is_superlinear(nl: Nonlinearity, p: float) -> bool:
    """Whether h(t)/t^(p-1) -> infinity as t grows.

    Exponential: always.  Power (1+s)^m: exactly when m > p-1 (the boundary has
    a finite limit and is classified False).  Custom reactions get a numeric
    probe at t = 1e2, 1e4, 1e6 flagged as heuristic.
    """
    if not p > 1:
        raise ProfileError("p must exceed 1")
    if nl.kind == "exponential":
        return True
    if nl.kind == "power":
        return nl.m > p - 1
    warnings.warn("superlinearity of a custom reaction is probed numerically "
                  "(heuristic)", stacklevel=2)
    ts = np.array([1e2, 1e4, 1e6])
    try:
        ratios = nl.value(ts) / ts ** (p - 1.0)
    except SaturationError:
        # growth beyond the representable range is superlinear for any p
        return True
    return bool(np.all(np.diff(ratios) > 0) and ratios[-1] > 10.0 * ratios[0])
