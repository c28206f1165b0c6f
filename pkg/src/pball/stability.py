"""Stability forms, principal eigenvalues, weighted gradient bounds, exponents.

The second-variation quadratic form and its reduced Hardy-type version are
evaluated with the same midpoint gradient and nodal mass quadratures that back
the discrete operator, so the Rayleigh quotient of a computed eigenfunction
reproduces its eigenvalue to solver precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .branch import Branch
from .errors import (AlphaRangeError, DomainError, EigenConvergenceError,
                     SupportError)
from .geometry import RiemannianModel, admissible_delta
from .nonlinearity import Nonlinearity
from .operators import (DiscreteWeights, OperatorConfig, RadialGrid,
                        SolutionProfile, build_weights, linf_norm, lq_norm,
                        w1q_norm, weighted_integral)

__all__ = [
    "StabilityReport", "WeightedEstimateReport", "ExponentReport",
    "alpha_max", "stability_form", "principal_eigenvalue", "hardy_form",
    "cutoff_test_function", "hardy_audit", "weighted_gradient_estimate",
    "regularity_threshold", "regularity_exponents", "stability_along_branch",
    "norm_audit",
]

TOL_EIG = 1e-6  # absolute tolerance of the semi-stability verdict
_EIG_MAX_ITER = 10_000
_SUPPORT_TOL = 1e-9

FprimeFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class StabilityReport:
    mu1: float
    eigenfunction: SolutionProfile
    semi_stable: bool
    iterations: int
    shift: float


@dataclass(frozen=True)
class WeightedEstimateReport:
    alpha: float
    delta: float
    lhs: float
    ratio: float


@dataclass(frozen=True)
class ExponentReport:
    N: int
    p: float
    threshold: float
    regime: str            # "bounded" | "estimate"
    q0: float              # +inf when the denominator is nonpositive
    q1: float
    alpha_max: float


def alpha_max(N: int, p: float) -> float:
    """Supremum of admissible weight exponents, 1 + sqrt((N-1)/(p-1))."""
    return 1.0 + math.sqrt((N - 1) / (p - 1))


# -- quadrature pieces shared by forms and matrices -------------------------------

def _edge_coefficients(cfg: OperatorConfig, u: SolutionProfile,
                       w: DiscreteWeights) -> np.ndarray:
    """(p-1) |u_r|^(p-2) psi^(N-1) at midpoints, regularized like the operator."""
    d = u.u_r_mid
    wt = (d * d + cfg.eps_reg ** 2) ** ((cfg.p - 2.0) / 2.0)
    return (cfg.p - 1.0) * wt * w.W_mid


def _mass_weights(w: DiscreteWeights) -> np.ndarray:
    """Nodal mass psi^(N-1) dr; the origin cell uses the averaged density."""
    return w.w_src * w.dual


def _check_support(xi: np.ndarray, where: str, allow_pole: bool = False) -> None:
    scale = 1.0 + float(np.max(np.abs(xi)))
    if not allow_pole and abs(xi[0]) > _SUPPORT_TOL * scale:
        raise SupportError(f"{where} must vanish at r = 0 (pole excluded)")
    if abs(xi[-1]) > _SUPPORT_TOL * scale:
        raise SupportError(f"{where} must vanish at r = 1")


def _test_values(xi, grid: RadialGrid) -> np.ndarray:
    vals = xi.u if isinstance(xi, SolutionProfile) else np.asarray(xi, float)
    if vals.shape != grid.nodes.shape:
        raise SupportError("test function must live on the solution grid")
    return vals


def stability_form(model: RiemannianModel, cfg: OperatorConfig,
                   u: SolutionProfile, fprime: FprimeFn, xi, *,
                   weights: Optional[DiscreteWeights] = None,
                   allow_pole: bool = False) -> float:
    """Second-variation form Q(xi) = int (p-1)|u_r|^(p-2) xi_r^2 - f'(u) xi^2.

    fprime acts on solution values: fprime(u_nodes) -> f'(u) nodewise.
    Test functions must vanish at both endpoints; ``allow_pole`` widens the
    domain to the natural-pole space that computed eigenfunctions live in.
    """
    w = weights if weights is not None else build_weights(model, u.grid)
    vals = _test_values(xi, u.grid)
    _check_support(vals, "stability test function", allow_pole)
    g = _edge_coefficients(cfg, u, w)
    grad = float(np.sum(g * np.diff(vals) ** 2 / w.h))
    fp = np.asarray(fprime(u.u), dtype=float)
    mass = float(np.sum(fp * vals ** 2 * _mass_weights(w)))
    return grad - mass


def hardy_form(model: RiemannianModel, cfg: OperatorConfig,
               u: SolutionProfile, eta, *,
               weights: Optional[DiscreteWeights] = None) -> float:
    """Reduced form int |u_r|^p [(p-1) eta_r^2 + V eta^2] psi^(N-1) dr.

    V is the stability potential d/dr[(N-1) psi'/psi]; eta must vanish at both
    endpoints.  Midpoint quadrature throughout.
    """
    w = weights if weights is not None else build_weights(model, u.grid)
    vals = _test_values(eta, u.grid)
    _check_support(vals, "hardy test function")
    mid = u.grid.mid
    psi, dp, dd = model.profile.eval(mid)
    V = (model.N - 1) * (dd * psi - dp ** 2) / psi ** 2
    eta_mid = 0.5 * (vals[1:] + vals[:-1])
    eta_r = np.diff(vals) / w.h
    density = np.abs(u.u_r_mid) ** cfg.p * (
        (cfg.p - 1.0) * eta_r ** 2 + V * eta_mid ** 2) * w.W_mid
    return float(np.sum(density * w.h))


def cutoff_test_function(model: RiemannianModel, grid: RadialGrid, p: float,
                         alpha: float, delta: float, eps: float) -> np.ndarray:
    """Negative-power cutoff built from the warping profile.

    Equal to psi(eps)^-alpha - psi(delta)^-alpha on [0, eps], then
    psi(r)^-alpha - psi(delta)^-alpha down to its zero at delta, then 0.
    """
    amax = alpha_max(model.N, p)
    if not 1.0 <= alpha < amax:
        raise AlphaRangeError(
            f"alpha must lie in [1, alpha_max) with alpha_max = {amax:.6g}; "
            f"got {alpha}")
    if not 0.0 < eps < delta:
        raise DomainError("need 0 < eps < delta")
    if not delta < min(model.profile.horizon, 1.0):
        raise DomainError("delta must stay inside the unit ball")
    r = grid.nodes
    psi_r = model.profile.eval(r)[0]
    base = float(model.profile.eval(delta)[0]) ** (-alpha)
    plateau = float(model.profile.eval(eps)[0]) ** (-alpha) - base
    eta = np.zeros_like(r)
    inner = r <= eps
    middle = (r > eps) & (r <= delta)
    eta[inner] = plateau
    eta[middle] = psi_r[middle] ** (-alpha) - base
    return eta


def hardy_audit(model: RiemannianModel, cfg: OperatorConfig,
                u: SolutionProfile, alphas: Sequence[float],
                epss: Sequence[float], *, delta: Optional[float] = None,
                weights: Optional[DiscreteWeights] = None) -> np.ndarray:
    """hardy_form over the psi-scaled cutoff family, one value per (alpha, eps)."""
    w = weights if weights is not None else build_weights(model, u.grid)
    if delta is None:
        delta = admissible_delta(model)
    psi_nodes = model.profile.eval(u.grid.nodes)[0]
    out = np.empty((len(alphas), len(epss)))
    for i, a in enumerate(alphas):
        for j, e in enumerate(epss):
            eta = cutoff_test_function(model, u.grid, cfg.p, a, delta, e)
            out[i, j] = hardy_form(model, cfg, u, psi_nodes * eta, weights=w)
    return out


def gradient_scale(model: RiemannianModel, cfg: OperatorConfig,
                   u: SolutionProfile, *,
                   weights: Optional[DiscreteWeights] = None) -> float:
    """int |u_r|^p psi^(N-1) dr, the natural scale of the reduced form."""
    w = weights if weights is not None else build_weights(model, u.grid)
    return float(np.sum(np.abs(u.u_r_mid) ** cfg.p * w.W_mid * w.h))


# -- principal eigenvalue -----------------------------------------------------------

def _forms_matrices(model, cfg, u, fprime, w):
    """Symmetric tridiagonal (A, B) on the non-Dirichlet nodes 0..n-1.

    Edge k joins nodes k and k+1 with stiffness g[k]; the edge into the
    Dirichlet node only contributes to the last active diagonal entry.
    """
    g = _edge_coefficients(cfg, u, w) / w.h      # edge stiffness, length n
    b = _mass_weights(w)                          # nodal mass, length n+1
    fp = np.asarray(fprime(u.u), dtype=float)
    n = u.grid.n
    diag = np.empty(n)
    diag[0] = g[0]
    diag[1:] = g[1:] + g[:-1]
    diag -= fp[:-1] * b[:-1]
    off = -g[:n - 1]
    return diag, off, b[:-1]


def _lower_bound(fp: np.ndarray) -> float:
    # A = S - diag(f' b) with S positive semidefinite, so mu1 >= -max(f', 0)
    return -float(np.max(np.maximum(fp, 0.0), initial=0.0))


def principal_eigenvalue(model: RiemannianModel, cfg: OperatorConfig,
                         u: SolutionProfile, fprime: FprimeFn, *,
                         weights: Optional[DiscreteWeights] = None
                         ) -> StabilityReport:
    """Smallest mu of A xi = mu B xi by shifted inverse power iteration.

    A is the stiffness of the regularized |u_r|^(p-2) weight minus the f'(u)
    mass; B is the plain weighted mass.  Dirichlet at r = 1, natural at r = 0.
    """
    if not (u.decreasing or np.all(u.u == 0.0)):
        raise DomainError("principal eigenvalue expects a decreasing profile "
                          "or the zero state")
    w = weights if weights is not None else build_weights(model, u.grid)
    diag, off, b = _forms_matrices(model, cfg, u, fprime, w)
    shift = _lower_bound(np.asarray(fprime(u.u), dtype=float))
    shift -= 0.01 * (1.0 + abs(shift))
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[1, :] = diag - shift * b
    ab[2, :-1] = off

    def a_mv(x):
        y = diag * x
        y[:-1] += off * x[1:]
        y[1:] += off * x[:-1]
        return y

    norm_a = float(np.max(np.abs(diag)) + (2.0 * np.max(np.abs(off))
                                           if off.size else 0.0))
    x = np.ones(n)
    x /= math.sqrt(float(np.dot(b * x, x)))
    mu_prev = math.inf
    for it in range(1, _EIG_MAX_ITER + 1):
        y = solve_banded((1, 1), ab, b * x)
        y /= math.sqrt(float(np.dot(b * y, y)))
        ay = a_mv(y)
        mu = float(np.dot(y, ay))
        resid = ay - mu * b * y
        # backward-error scale: matvec roundoff sits at eps * ||A|| * ||y||
        denom = (norm_a + abs(mu) * float(np.max(b))) * float(np.max(np.abs(y)))
        ok = (np.max(np.abs(resid)) <= 1e-13 * denom
              and abs(mu - mu_prev) <= 1e-12 * (1.0 + abs(mu)))
        x, mu_prev = y, mu
        if ok:
            break
    else:
        raise EigenConvergenceError(
            f"inverse iteration did not converge in {_EIG_MAX_ITER} steps")
    if x[int(np.argmax(np.abs(x)))] < 0:
        x = -x
    xi = SolutionProfile.from_values(u.grid, np.concatenate([x, [0.0]]))
    return StabilityReport(mu, xi, mu >= -TOL_EIG, it, shift)


def eigen_mass(model: RiemannianModel, u: SolutionProfile, xi, *,
               weights: Optional[DiscreteWeights] = None) -> float:
    """Discrete weighted L2 mass of a test function (matches the eigen mass)."""
    w = weights if weights is not None else build_weights(model, u.grid)
    vals = _test_values(xi, u.grid)
    return float(np.sum(vals ** 2 * _mass_weights(w)))


# -- weighted gradient estimate -------------------------------------------------------

def weighted_gradient_estimate(model: RiemannianModel, cfg: OperatorConfig,
                               u: SolutionProfile, alpha: float, *,
                               weights: Optional[DiscreteWeights] = None
                               ) -> WeightedEstimateReport:
    """int_0^delta |u_r|^p psi^(N-1-2 alpha) dr against ||u||_p^p.

    delta always comes from admissible_delta; alpha must lie in [1, alpha_max).
    """
    amax = alpha_max(model.N, cfg.p)
    if not 1.0 <= alpha < amax:
        raise AlphaRangeError(
            f"alpha must lie in [1, alpha_max) with alpha_max = {amax:.6g}; "
            f"got {alpha}")
    if not u.decreasing:
        raise DomainError("weighted gradient estimate expects a decreasing "
                          "profile")
    delta = admissible_delta(model)
    r = u.grid.nodes
    mask = (r > 0.0) & (r <= delta)
    rr = r[mask]
    psi = model.profile.eval(rr)[0]
    integrand = np.abs(u.u_r[mask]) ** cfg.p * psi ** (model.N - 1 - 2.0 * alpha)
    lhs = float(np.trapezoid(integrand, rr)) if rr.size > 1 else 0.0
    denom = lq_norm(model, u, cfg.p) ** cfg.p
    ratio = lhs / denom if denom > 0 else 0.0
    return WeightedEstimateReport(float(alpha), float(delta), lhs, ratio)


# -- regularity exponents -------------------------------------------------------------

def regularity_threshold(p: float) -> float:
    """Dimension bound p + 4p/(p-1) below which radial semi-stable states are bounded."""
    if not p > 1:
        raise DomainError("p must exceed 1")
    return p + 4.0 * p / (p - 1.0)


def regularity_exponents(N: int, p: float) -> ExponentReport:
    """Threshold, regime and the supercritical exponents q0, q1.

    Nonpositive denominators map to +inf.  Restricted to 1 < p <= N.
    """
    if not isinstance(N, (int, np.integer)) or N < 2:
        raise DomainError("N must be an integer >= 2")
    if not p > 1:
        raise DomainError("p must exceed 1")
    if p > N:
        raise DomainError("restricted to p <= N (beyond that, embedding into "
                          "Hoelder classes already gives boundedness)")
    threshold = regularity_threshold(p)
    root = math.sqrt((N - 1) / (p - 1))
    den0 = N - p - 2.0 - 2.0 * root
    den1 = N - 2.0 - 2.0 * root
    q0 = N * p / den0 if den0 > 0 else math.inf
    q1 = N * p / den1 if den1 > 0 else math.inf
    regime = "bounded" if N < threshold else "estimate"
    return ExponentReport(int(N), float(p), threshold, regime, q0, q1,
                          alpha_max(N, p))


# -- branch-level audits ----------------------------------------------------------------

def stability_along_branch(model: RiemannianModel, cfg: OperatorConfig,
                           h: Nonlinearity, branch: Branch, *,
                           weights: Optional[DiscreteWeights] = None
                           ) -> tuple[Branch, list[dict]]:
    """Fill mu1 at every branch point; returns the new branch and CSV rows."""
    rows = []
    points = []
    w = weights
    for pt in branch.points:
        if w is None:
            w = build_weights(model, pt.profile.grid)
        lam = pt.lam
        rep = principal_eigenvalue(model, cfg, pt.profile,
                                   lambda s, lam=lam: lam * h.derivative(s),
                                   weights=w)
        points.append(replace(pt, mu1=rep.mu1))
        rows.append({"lambda": lam, "mu1": rep.mu1,
                     "semi_stable": rep.semi_stable})
    return Branch(tuple(points), branch.lambda_star_bracket, branch.bracket), rows


def norm_audit(model: RiemannianModel, cfg: OperatorConfig,
               branch: Branch) -> tuple[list[dict], dict]:
    """Empirical norm ratios along a branch, split by regularity regime.

    Bounded regime: sup norm against ||u||_p and against max(||u||_1, ||u||_p).
    Estimate regime: ||u||_q and ||u||_W1q at q = 0.9 q0 / 0.9 q1; rows are
    marked not applicable when the exponent is infinite.
    """
    rep = regularity_exponents(model.N, cfg.p)
    rows = []
    best = 0.0
    for pt in branch.points:
        u = pt.profile
        lp = lq_norm(model, u, cfg.p)
        l1 = weighted_integral(model, u.grid, np.abs(u.u))
        row = {"lambda": pt.lam, "regime": rep.regime, "applicable": True,
               "norm_inf": linf_norm(u), "norm_p": lp, "norm_1": l1,
               "ratio_inf_p": math.nan, "ratio_inf_max1p": math.nan,
               "q_lebesgue": math.nan, "ratio_q_p": math.nan,
               "q_sobolev": math.nan, "ratio_w1q_p": math.nan}
        if rep.regime == "bounded":
            row["ratio_inf_p"] = linf_norm(u) / lp if lp > 0 else 0.0
            denom = max(l1, lp)
            row["ratio_inf_max1p"] = linf_norm(u) / denom if denom > 0 else 0.0
            best = max(best, row["ratio_inf_p"])
        else:
            if math.isinf(rep.q0) or math.isinf(rep.q1):
                row["applicable"] = False
            else:
                q0, q1 = 0.9 * rep.q0, 0.9 * rep.q1
                row["q_lebesgue"] = q0
                row["q_sobolev"] = q1
                row["ratio_q_p"] = lq_norm(model, u, q0) / lp if lp > 0 else 0.0
                row["ratio_w1q_p"] = w1q_norm(model, u, q1) / lp if lp > 0 else 0.0
                best = max(best, row["ratio_q_p"], row["ratio_w1q_p"])
        rows.append(row)
    return rows, {"regime": rep.regime, "max_ratio": best}
