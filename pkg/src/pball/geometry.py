"""Model geometries: warping profiles, volume weights, curvature, stability potential.

A model geometry is a rotationally symmetric metric ``dr^2 + psi(r)^2 dtheta^2``
on a ball around a pole.  Everything downstream only ever needs the scalar
warping function ``psi`` with two derivatives, so that is what this module
represents.  The three space forms are built in; anything else is supplied as
closed-form callables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, ProfileError, SingularPointError

__all__ = [
    "WarpingProfile",
    "RiemannianModel",
    "psi_eval",
    "volume_weight",
    "sectional_curvature",
    "stability_potential",
    "admissible_delta",
    "DELTA_CAP",
]

# Largest radius ever reported by admissible_delta; keeps delta < 1/2 with margin.
DELTA_CAP = 0.45

_POLE_TOL = 1e-8
_FD_STEP = 1e-5
_POSITIVITY_MARGIN = 0.05

EvalFn = Callable[[np.ndarray], np.ndarray]


def _as_array(r) -> tuple[np.ndarray, bool]:
    arr = np.asarray(r, dtype=float)
    return arr, arr.ndim == 0


@dataclass(frozen=True)
class WarpingProfile:
    """Warping function psi with derivatives and its radius of validity."""

    kind: str
    horizon: float
    psi: EvalFn
    psi_prime: EvalFn
    psi_second: EvalFn

    @classmethod
    def euclidean(cls) -> "WarpingProfile":
        return cls._build("euclidean", math.inf,
                          lambda r: np.asarray(r, float),
                          lambda r: np.ones_like(np.asarray(r, float)),
                          lambda r: np.zeros_like(np.asarray(r, float)))

    @classmethod
    def hyperbolic(cls) -> "WarpingProfile":
        return cls._build("hyperbolic", math.inf, np.sinh, np.cosh, np.sinh)

    @classmethod
    def spherical(cls) -> "WarpingProfile":
        return cls._build("spherical", math.pi, np.sin, np.cos,
                          lambda r: -np.sin(np.asarray(r, float)))

    @classmethod
    def custom(cls, psi: EvalFn, psi_prime: EvalFn,
               psi_second: Optional[EvalFn] = None,
               horizon: float = math.inf, kind: str = "custom") -> "WarpingProfile":
        """Build a profile from closed-form callables.

        ``psi_second`` may be omitted; it is then formed by centered differences
        of ``psi_prime`` with step 1e-5, which costs roughly five digits of
        accuracy relative to an analytic second derivative.
        """
        if psi_second is None:
            psi_second = _fd_second(psi_prime)
        return cls._build(kind, float(horizon), psi, psi_prime, psi_second)

    @classmethod
    def _build(cls, kind, horizon, psi, psi_prime, psi_second) -> "WarpingProfile":
        if not horizon > 0:
            raise ProfileError("profile horizon must be positive")
        prof = cls(kind, horizon, psi, psi_prime, psi_second)
        prof._validate()
        return prof

    @classmethod
    def from_kind(cls, kind: str) -> "WarpingProfile":
        try:
            return {"euclidean": cls.euclidean,
                    "hyperbolic": cls.hyperbolic,
                    "spherical": cls.spherical}[kind]()
        except KeyError:
            raise ProfileError(f"unknown built-in geometry kind {kind!r}") from None

    # -- evaluation ---------------------------------------------------------

    def eval(self, r):
        """Return (psi, psi', psi'') at radii r in [0, horizon)."""
        arr, scalar = _as_array(r)
        if np.any(arr < 0) or np.any(arr >= self.horizon):
            raise DomainError(
                f"radius outside [0, {self.horizon}) for kind {self.kind!r}")
        p, dp, ddp = (np.asarray(self.psi(arr), float),
                      np.asarray(self.psi_prime(arr), float),
                      np.asarray(self.psi_second(arr), float))
        p, dp, ddp = (np.broadcast_to(p, arr.shape).astype(float),
                      np.broadcast_to(dp, arr.shape).astype(float),
                      np.broadcast_to(ddp, arr.shape).astype(float))
        if scalar:
            return float(p), float(dp), float(ddp)
        return p, dp, ddp

    # -- invariants ---------------------------------------------------------

    def _validate(self) -> None:
        t = 1e-5
        p1, d1, s1 = self.eval(t)
        p2, d2, s2 = self.eval(2 * t)
        # linear extrapolation to r = 0 of each component
        if abs(2 * p1 - p2) > _POLE_TOL:
            raise ProfileError(f"psi(0) = {2 * p1 - p2:.3e} != 0 at the pole")
        if abs(2 * d1 - d2 - 1.0) > _POLE_TOL:
            raise ProfileError(f"psi'(0) = {2 * d1 - d2:.10f} != 1 at the pole")
        if abs(2 * s1 - s2) > _POLE_TOL:
            raise ProfileError(f"psi''(0) = {2 * s1 - s2:.3e} != 0 at the pole")
        hi = min(self.horizon * (1 - 1e-12), 1.0 + _POSITIVITY_MARGIN)
        rr = np.linspace(0.0, hi, 2049)[1:]
        psi = np.asarray(self.psi(rr), float)
        if np.any(psi <= 0):
            bad = rr[np.argmax(psi <= 0)]
            raise ProfileError(f"psi must be positive on (0, {hi:.3g}); "
                               f"psi({bad:.6g}) <= 0")


def _fd_second(psi_prime: EvalFn, step: float = _FD_STEP) -> EvalFn:
    def second(r):
        arr = np.asarray(r, dtype=float)
        lo = np.maximum(arr - step, 0.0)
        hi = arr + step
        return (np.asarray(psi_prime(hi), float)
                - np.asarray(psi_prime(lo), float)) / (hi - lo)
    return second


@dataclass(frozen=True)
class RiemannianModel:
    """Dimension N >= 2 together with a warping profile valid past radius 1."""

    N: int
    profile: WarpingProfile

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 2:
            raise ProfileError("N must be >= 2")
        if not self.profile.horizon > 1.0:
            raise ProfileError("profile horizon must exceed 1 (problem lives on "
                               "the unit ball)")

    def weight(self, r):
        """Radial volume density psi(r)^(N-1); valid on [0, horizon)."""
        arr, scalar = _as_array(r)
        p = self.profile.eval(arr)[0]
        w = p ** (self.N - 1)
        return float(w) if scalar else w


# -- operations ---------------------------------------------------------------

def psi_eval(profile: WarpingProfile, r):
    """Triple (psi, psi', psi'') at r; domain error outside [0, horizon)."""
    return profile.eval(r)


def volume_weight(model: RiemannianModel, r):
    """psi(r)^(N-1) for 0 < r < horizon."""
    arr, _ = _as_array(r)
    if np.any(arr <= 0):
        raise DomainError("volume weight is defined for 0 < r < horizon")
    return model.weight(r)


def sectional_curvature(profile: WarpingProfile, r):
    """Radial sectional curvature -psi''/psi."""
    arr, scalar = _as_array(r)
    psi, _, dd = profile.eval(arr)
    psi_arr = np.asarray(psi, float)
    if np.any(psi_arr == 0):
        raise SingularPointError("psi vanishes; curvature undefined at the pole")
    k = -np.asarray(dd, float) / psi_arr
    return float(k) if scalar else k


def stability_potential(model: RiemannianModel, r):
    """d/dr[(N-1) psi'/psi] = (N-1)(psi'' psi - psi'^2)/psi^2 on 0 < r < min(horizon, 1)."""
    arr, scalar = _as_array(r)
    hi = min(model.profile.horizon, 1.0)
    if np.any(arr <= 0) or np.any(arr >= hi):
        raise DomainError(f"stability potential needs 0 < r < {hi}")
    psi, dp, dd = model.profile.eval(arr)
    psi_arr = np.asarray(psi, float)
    if np.any(psi_arr == 0):
        raise SingularPointError("psi vanishes inside (0, 1)")
    v = (model.N - 1) * (np.asarray(dd, float) * psi_arr
                         - np.asarray(dp, float) ** 2) / psi_arr ** 2
    return float(v) if scalar else v


def admissible_delta(model: RiemannianModel, samples: int = 4097) -> float:
    """Largest delta <= 0.45 with psi' > 0 on [0, delta].

    psi'(0) = 1 guarantees existence.  The slope is sampled on a fine grid; the
    first sign change, if any, is then bisected and the result is backed off
    below the root until psi' is strictly positive there.
    """
    rs = np.linspace(0.0, DELTA_CAP, samples)
    _, dpsi, _ = model.profile.eval(rs)
    nonpos = np.flatnonzero(np.asarray(dpsi) <= 0)
    if nonpos.size == 0:
        return DELTA_CAP
    k = int(nonpos[0])
    if k == 0:
        raise ProfileError("psi'(0) <= 0 contradicts the pole normalization")
    lo, hi = rs[k - 1], rs[k]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if model.profile.eval(mid)[1] > 0:
            lo = mid
        else:
            hi = mid
    delta = lo
    for _ in range(100):
        if model.profile.eval(delta)[1] > 0:
            return float(delta)
        delta *= 1.0 - 1e-12
    raise ProfileError("failed to guard admissible delta below the slope root")
