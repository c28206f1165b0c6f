"""Minimal-solution branches in lambda and bracketing of the extremal parameter.

The minimal solution at a given lambda is the limit of the monotone recursion
v_0 = 0, v_{k+1} = solve(lambda * h(v_k)); the comparison structure of the
discrete operator makes the iterates nodewise nondecreasing.  The extremal
parameter is bracketed by doubling from the torsion lower bound until the
recursion diverges and then bisecting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import BranchError, MinimalityError, PballError, SaturationError, \
    UnboundedLambdaStarError
from .geometry import RiemannianModel
from .nonlinearity import Nonlinearity, is_superlinear
from .operators import (DiscreteWeights, OperatorConfig, RadialGrid,
                        SolutionProfile, _direct_solution, _newton_polish,
                        build_weights, linf_norm, weighted_integral)

__all__ = [
    "SolverSettings", "Divergence", "LambdaBracket", "BranchPoint", "Branch",
    "lambda_lower_bound", "monotone_minimal_solution", "estimate_lambda_star",
    "default_lambda_samples", "continue_branch", "extremal_approximation",
]

_MONO_TOL = 1e-10
_BRANCH_ORDER_TOL = 1e-9
_CERT_SEED = 543210981


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances and sampling rules for the branch machinery."""

    tol_fix: float = 1e-9
    max_recursion: int = 500
    blowup_cutoff: float = 1e6
    bisect_tol: float = 1e-3
    max_doublings: int = 60
    # default lambda sampling: geometric sweep plus a cluster in the last 5%
    n_geom: int = 16
    n_tail: int = 4
    sample_floor: float = 0.05
    sample_cap: float = 0.99
    tail_lo: float = 0.955
    tail_hi: float = 0.995
    # cold-restart certification of warm-started branch points
    cert_count: int = 3
    cert_tol: float = 1e-7
    # budget escalation when the recursion cap hits while still contracting
    escalation: int = 4
    max_escalations: int = 3

    def __post_init__(self):
        for name in ("tol_fix", "max_recursion", "blowup_cutoff", "bisect_tol"):
            if not getattr(self, name) > 0:
                raise BranchError(f"{name} must be positive")


@dataclass(frozen=True)
class Divergence:
    """Evidence that the recursion has no bounded fixed point at this lambda."""

    reason: str            # "blowup" | "saturation" | "stalled" | "budget"
    iterations: int
    u_max: float
    cauchy_decreasing: bool = False
    last_iterate: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(frozen=True)
class LambdaBracket:
    """Certified bracket: converged at lambda_lo, diverged at lambda_hi."""

    lambda_lo: float
    lambda_hi: float
    profile_lo: SolutionProfile
    lambda0: float
    solves: int

    def __iter__(self):
        yield self.lambda_lo
        yield self.lambda_hi

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lambda_lo + self.lambda_hi)


@dataclass(frozen=True)
class BranchPoint:
    lam: float
    profile: SolutionProfile
    u_max: float
    mu1: Optional[float]
    iters: int
    uniform_bounds: tuple[float, float]  # (||u^(p-1)||_L1, ||h(u)||_L1)

    def __post_init__(self):
        if not self.lam > 0:
            raise BranchError("branch points need lambda > 0")
        if abs(self.u_max - linf_norm(self.profile)) > 1e-12 * (1 + self.u_max):
            raise BranchError("u_max must equal the profile sup norm")
        if not self.profile.decreasing:
            raise BranchError("branch profiles must be flagged decreasing")


@dataclass(frozen=True)
class Branch:
    points: tuple[BranchPoint, ...]
    lambda_star_bracket: tuple[float, float]
    bracket: LambdaBracket

    def __post_init__(self):
        lo, hi = self.lambda_star_bracket
        if not lo < hi:
            raise BranchError("bracket must satisfy lambda_lo < lambda_hi")
        lams = [pt.lam for pt in self.points]
        if any(lam > lo for lam in lams):
            raise BranchError("all branch points must have lambda <= lambda_lo")
        if sorted(lams) != lams:
            raise BranchError("branch points must be sorted by lambda")
        for a, b in zip(self.points, self.points[1:]):
            if np.max(a.profile.u - b.profile.u) > _BRANCH_ORDER_TOL:
                raise BranchError("branch violates nodewise monotonicity in lambda")


# -- operations -----------------------------------------------------------------

def lambda_lower_bound(model: RiemannianModel, cfg: OperatorConfig,
                       h: Nonlinearity, grid: RadialGrid, *,
                       weights: Optional[DiscreteWeights] = None) -> float:
    """1 / h(max torsion); every lambda below it admits a solution."""
    from .operators import torsion_function
    h.validate_parametric()
    w = torsion_function(model, cfg, grid, weights=weights)
    return 1.0 / h.value(float(np.max(w.u)))


def monotone_minimal_solution(model: RiemannianModel, cfg: OperatorConfig,
                              h: Nonlinearity, lam: float, grid: RadialGrid,
                              settings: Optional[SolverSettings] = None, *,
                              start: Optional[np.ndarray] = None,
                              weights: Optional[DiscreteWeights] = None,
                              max_recursion: Optional[int] = None,
                              ) -> Union[SolutionProfile, Divergence]:
    """Run the monotone recursion at one lambda.

    Returns the fixed point (polished by one Newton pass on the full nonlinear
    system so its residual meets the operator tolerance) or a Divergence value.
    A warm start must be a subsolution, e.g. a converged profile at a smaller
    lambda; iterates then still increase toward the minimal solution above it.
    """
    if not lam > 0:
        raise BranchError("lambda must be positive")
    settings = settings or SolverSettings()
    budget = max_recursion if max_recursion is not None else settings.max_recursion
    w = weights if weights is not None else build_weights(model, grid)
    v = np.zeros_like(w.r) if start is None else np.asarray(start, float).copy()
    diffs: list[float] = []
    for k in range(1, budget + 1):
        try:
            rhs = lam * h.value(v)
        except SaturationError:
            return Divergence("saturation", k, float(np.max(v)))
        v_new = _direct_solution(w, cfg, rhs, 0.0)
        if not np.all(np.isfinite(v_new)):
            # the exact inverse left the double range: unambiguous blow-up
            return Divergence("blowup", k, float(np.max(v)))
        if np.min(v_new - v) < -_MONO_TOL:
            raise PballError("monotone certificate violated; the discrete "
                             "comparison principle is broken")
        diff = float(np.max(np.abs(v_new - v)))
        diffs.append(diff)
        v = v_new
        u_max = float(np.max(v))
        if u_max > settings.blowup_cutoff:
            return Divergence("blowup", k, u_max)
        if diff < settings.tol_fix:
            return _polish(model, cfg, h, lam, grid, w, v, k)
    window = min(11, len(diffs))
    decreasing = diffs[-1] < diffs[-window]
    return Divergence("stalled" if not decreasing else "budget",
                      budget, float(np.max(v)), decreasing, v)


def _polish(model, cfg, h, lam, grid, w, v, iters) -> SolutionProfile:
    # one full-Newton pass pins the residual of the nonlinear system itself
    try:
        v_out, _ = _newton_polish(w, cfg, v, lam * h.value(v),
                                  lam * h.derivative(v), 0.0)
        polished = True
    except PballError:
        v_out, polished = v, False
    profile = SolutionProfile.from_values(
        grid, np.maximum(v_out, 0.0), decreasing=True,
        meta={"lambda": lam, "iters": iters, "monotone_certified": True,
              "polished": polished})
    return profile


def _robust_solve(model, cfg, h, lam, grid, settings, w, start):
    """Recursion with budget escalation while the iteration still contracts."""
    budget = settings.max_recursion
    cur = start
    result: Union[SolutionProfile, Divergence] = Divergence("budget", 0, 0.0)
    for _ in range(settings.max_escalations + 1):
        result = monotone_minimal_solution(
            model, cfg, h, lam, grid, settings, start=cur, weights=w,
            max_recursion=budget)
        if isinstance(result, SolutionProfile):
            return result
        if not (result.reason == "budget" and result.cauchy_decreasing):
            return result
        cur = result.last_iterate
        budget *= settings.escalation
    return result


def estimate_lambda_star(model: RiemannianModel, cfg: OperatorConfig,
                         h: Nonlinearity, grid: RadialGrid,
                         settings: Optional[SolverSettings] = None, *,
                         weights: Optional[DiscreteWeights] = None,
                         ) -> LambdaBracket:
    """Bracket the extremal parameter by doubling and bisection.

    Success at lambda_lo is certified by a cold (from zero) converged run.
    """
    settings = settings or SolverSettings()
    w = weights if weights is not None else build_weights(model, grid)
    if not is_superlinear(h, cfg.p):
        warnings.warn("reaction is not superlinear; the extremal parameter "
                      "may not exist", stacklevel=2)
    lam0 = lambda_lower_bound(model, cfg, h, grid, weights=w)
    solves = 1
    res = _robust_solve(model, cfg, h, lam0, grid, settings, w, None)
    if isinstance(res, Divergence):
        raise BranchError(f"recursion diverged at the lower bound {lam0:.6g}; "
                          "discretization is inconsistent")
    lo, lo_profile = lam0, res
    hi = None
    lam = lam0
    for _ in range(settings.max_doublings):
        lam *= 2.0
        solves += 1
        res = _robust_solve(model, cfg, h, lam, grid, settings, w,
                            lo_profile.u)
        if isinstance(res, Divergence):
            hi = lam
            break
        lo, lo_profile = lam, res
    if hi is None:
        raise UnboundedLambdaStarError(
            f"no divergence up to lambda = {lam:.3e} after "
            f"{settings.max_doublings} doublings")
    while hi - lo > settings.bisect_tol * hi:
        mid = 0.5 * (lo + hi)
        solves += 1
        res = _robust_solve(model, cfg, h, mid, grid, settings, w,
                            lo_profile.u)
        if isinstance(res, Divergence):
            hi = mid
        else:
            lo, lo_profile = mid, res
    solves += 1
    cold = _robust_solve(model, cfg, h, lo, grid, settings, w, None)
    if isinstance(cold, Divergence):
        raise MinimalityError(
            f"cold restart failed to certify lambda_lo = {lo:.8g}")
    if float(np.max(np.abs(cold.u - lo_profile.u))) > settings.cert_tol:
        raise MinimalityError("cold restart disagrees with the warm-started "
                              "solution at lambda_lo")
    return LambdaBracket(lo, hi, cold, lam0, solves)


def default_lambda_samples(lambda_lo: float,
                           settings: Optional[SolverSettings] = None) -> np.ndarray:
    """Geometric sweep of (0, lambda_lo) plus a cluster in the last 5%."""
    s = settings or SolverSettings()
    geom = np.geomspace(s.sample_floor * lambda_lo, s.sample_cap * lambda_lo,
                        s.n_geom)
    tail = np.linspace(s.tail_lo, s.tail_hi, s.n_tail) * lambda_lo
    return np.unique(np.concatenate([geom, tail]))


def continue_branch(model: RiemannianModel, cfg: OperatorConfig,
                    h: Nonlinearity, grid: RadialGrid,
                    settings: Optional[SolverSettings] = None,
                    lam_samples: Optional[Sequence[float]] = None, *,
                    bracket: Optional[LambdaBracket] = None,
                    weights: Optional[DiscreteWeights] = None) -> Branch:
    """Warm-started continuation over the sample lambdas (all below lambda_lo).

    Warm starting preserves minimality because each previous profile is a
    subsolution of the next problem; this is certified by cold restarts at
    three deterministic sample indices.
    """
    settings = settings or SolverSettings()
    w = weights if weights is not None else build_weights(model, grid)
    if bracket is None:
        bracket = estimate_lambda_star(model, cfg, h, grid, settings, weights=w)
    if lam_samples is None:
        lams = default_lambda_samples(bracket.lambda_lo, settings)
    else:
        lams = np.sort(np.asarray(list(lam_samples), dtype=float))
    if lams.size and lams[-1] >= bracket.lambda_lo:
        raise BranchError("all lambda samples must lie strictly below lambda_lo")
    if np.any(lams <= 0):
        raise BranchError("lambda samples must be positive")
    points = []
    prev = None
    for lam in lams:
        res = _robust_solve(model, cfg, h, float(lam), grid, settings, w, prev)
        if isinstance(res, Divergence):
            raise BranchError(f"recursion diverged below lambda_lo at "
                              f"lambda = {lam:.8g} ({res.reason})")
        points.append(_branch_point(model, cfg, h, float(lam), res))
        prev = res.u
    if len(points) >= settings.cert_count:
        rng = np.random.default_rng(_CERT_SEED)
        idx = rng.choice(len(points), size=settings.cert_count, replace=False)
        for i in sorted(int(j) for j in idx):
            res = _robust_solve(model, cfg, h, points[i].lam, grid, settings,
                                w, None)
            if isinstance(res, Divergence) or \
                    float(np.max(np.abs(res.u - points[i].profile.u))) > settings.cert_tol:
                raise MinimalityError(
                    f"cold restart at lambda = {points[i].lam:.8g} does not "
                    "reproduce the warm-started minimal solution")
    return Branch(tuple(points), (bracket.lambda_lo, bracket.lambda_hi), bracket)


def _branch_point(model, cfg, h, lam, profile) -> BranchPoint:
    l1_up = weighted_integral(model, profile.grid,
                              np.abs(profile.u) ** (cfg.p - 1.0))
    l1_hu = weighted_integral(model, profile.grid, h.value(profile.u))
    return BranchPoint(lam, profile, linf_norm(profile), None,
                       int(profile.meta.get("iters", 0)), (l1_up, l1_hu))


def extremal_approximation(branch: Branch) -> SolutionProfile:
    """Profile at the largest solved lambda with an extrapolated sup norm.

    Near the fold the sup norm behaves like a smooth function of
    sqrt(lambda* - lambda); a two-point extrapolation in that variable is
    attached to the returned profile's metadata.
    """
    lo, hi = branch.lambda_star_bracket
    near = [pt for pt in branch.points if pt.lam >= 0.95 * lo]
    if len(near) < 3:
        raise BranchError("need at least 3 branch points within 5% of lambda_lo")
    lam_star = 0.5 * (lo + hi)
    p1, p2 = near[-2], near[-1]
    s1 = np.sqrt(max(lam_star - p1.lam, 0.0))
    s2 = np.sqrt(max(lam_star - p2.lam, 0.0))
    if s1 > s2:
        ext = p2.u_max + (p2.u_max - p1.u_max) * s2 / (s1 - s2)
    else:
        ext = p2.u_max
    return p2.profile.with_meta(u_max_extrapolated=float(ext),
                                lambda_star_estimate=float(lam_star))
