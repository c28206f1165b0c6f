"""Conservative discretization of the radial p-Laplace flux form.

The radial equation is discretized in conservation form: fluxes
``psi^(N-1) * phi_p(u_r)`` live at cell midpoints, nodal balances live on dual
cells.  Because the flux of a radial problem can be integrated outward from
the pole, a fixed right-hand side admits a direct O(n) solve: accumulate the
source, invert the flux function per midpoint, and sum slopes inward from the
Dirichlet boundary.  Damped Newton is kept as a polish / general-purpose path.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg import solve_banded

from .errors import (AssemblyError, DomainError, NewtonDivergenceError,
                     ProfileError)
from .geometry import RiemannianModel

__all__ = [
    "RadialGrid", "OperatorConfig", "SolutionProfile", "DiscreteWeights",
    "Tridiagonal", "build_weights", "assemble_residual", "assemble_jacobian",
    "solve_fixed_rhs", "torsion_function", "lq_norm", "linf_norm",
    "w1q_seminorm", "w1q_norm", "weighted_integral",
    "phi_p", "phi_p_prime", "phi_p_inverse",
]

RhsLike = Union[float, np.ndarray, Callable]

TOL_MONO = 1e-10
_MIN_CELLS = 16
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


# -- grid ----------------------------------------------------------------------

@dataclass(frozen=True)
class RadialGrid:
    """Strictly increasing nodes r_0 = 0 < ... < r_n = 1."""

    nodes: np.ndarray
    grading: str = "uniform"

    def __post_init__(self):
        nodes = _readonly(self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < _MIN_CELLS + 1:
            raise ProfileError(f"grid needs at least {_MIN_CELLS} cells")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ProfileError("grid must span [0, 1] exactly")
        if np.any(np.diff(nodes) <= 0):
            raise ProfileError("grid nodes must be strictly increasing")

    @classmethod
    def uniform(cls, n: int) -> "RadialGrid":
        return cls(np.linspace(0.0, 1.0, n + 1), "uniform")

    @classmethod
    def boundary_refined(cls, n: int) -> "RadialGrid":
        # cosine map clusters nodes quadratically at both r=0 and r=1
        s = np.linspace(0.0, 1.0, n + 1)
        nodes = 0.5 * (1.0 - np.cos(np.pi * s))
        nodes[0], nodes[-1] = 0.0, 1.0
        return cls(nodes, "boundary-refined")

    @classmethod
    def make(cls, n: int, grading: str = "uniform") -> "RadialGrid":
        if grading == "uniform":
            return cls.uniform(n)
        if grading == "boundary-refined":
            return cls.boundary_refined(n)
        raise ProfileError(f"unknown grading {grading!r}")

    @property
    def n(self) -> int:
        """Number of cells."""
        return self.nodes.size - 1

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    @property
    def dual(self) -> np.ndarray:
        """Dual-cell widths; these are also the trapezoid weights."""
        h = self.h
        return np.concatenate(([0.5 * h[0]], 0.5 * (h[1:] + h[:-1]), [0.5 * h[-1]]))


# -- operator configuration -----------------------------------------------------

@dataclass(frozen=True)
class OperatorConfig:
    """Exponent p and the slope regularization of phi_p."""

    p: float
    eps_reg: float = 1e-8
    tol_newton: float = 1e-10
    max_newton: int = 100
    quad: str = "midpoint"

    def __post_init__(self):
        if not self.p > 1:
            raise ProfileError("p must exceed 1")
        if not 0 < self.eps_reg <= 1e-4:
            raise ProfileError("eps_reg must lie in (0, 1e-4]")
        if self.quad != "midpoint":
            raise ProfileError("only midpoint flux quadrature is supported")


# -- regularized flux function ---------------------------------------------------

def phi_p(s, p: float, eps: float):
    """(s^2 + eps^2)^((p-2)/2) * s, the regularized odd power."""
    s = np.asarray(s, dtype=float)
    if p == 2.0:
        return s.copy()
    return (s * s + eps * eps) ** ((p - 2.0) / 2.0) * s


def phi_p_prime(s, p: float, eps: float):
    """d/ds phi_p = (s^2+eps^2)^((p-4)/2) ((p-1) s^2 + eps^2)."""
    s = np.asarray(s, dtype=float)
    if p == 2.0:
        return np.ones_like(s)
    t = s * s + eps * eps
    return t ** ((p - 4.0) / 2.0) * ((p - 1.0) * s * s + eps * eps)


def phi_p_inverse(y, p: float, eps: float):
    """Solve phi_p(s) = y per component (phi_p is strictly increasing).

    Values whose inverse overflows the double range (possible for p < 2 while
    an iterate blows up) come back as signed infinities; callers treat a
    non-finite state as blow-up evidence.
    """
    y = np.asarray(y, dtype=float)
    if p == 2.0:
        return y.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        s = np.sign(y) * np.abs(y) ** (1.0 / (p - 1.0))  # exact for eps = 0
    # s*s must stay representable inside phi_p / phi_p_prime
    finite = np.isfinite(s) & np.isfinite(y) & (np.abs(s) < 1e150)
    s = np.where(finite, s, np.where(y >= 0, np.inf, -np.inf))
    if np.any(finite):
        sa, ya = s[finite], y[finite]
        tol = 1e-15 * (np.abs(ya) + eps ** (p - 1.0))
        for _ in range(80):
            f = phi_p(sa, p, eps) - ya
            if np.all(np.abs(f) <= tol):
                break
            sa = sa - f / phi_p_prime(sa, p, eps)
        else:
            resid = np.max(np.abs(phi_p(sa, p, eps) - ya))
            raise NewtonDivergenceError(
                f"flux inversion stalled at residual {resid:.2e}")
        s[finite] = sa
    return s


# -- solution profiles ------------------------------------------------------------

def _nodal_derivative(nodes: np.ndarray, u: np.ndarray) -> np.ndarray:
    ur = np.empty_like(u)
    ur[1:-1] = (u[2:] - u[:-2]) / (nodes[2:] - nodes[:-2])
    ur[0] = 0.0  # pole regularity: zero flux at the origin
    # one-sided quadratic fit at r = 1
    r2, r1, r0 = nodes[-3], nodes[-2], nodes[-1]
    u2, u1, u0 = u[-3], u[-2], u[-1]
    ur[-1] = (u2 * (r0 - r1) / ((r2 - r1) * (r2 - r0))
              + u1 * (r0 - r2) / ((r1 - r2) * (r1 - r0))
              + u0 * ((r0 - r1) + (r0 - r2)) / ((r0 - r1) * (r0 - r2)))
    return ur


@dataclass(frozen=True)
class SolutionProfile:
    """Radial function with nodal and midpoint derivatives and run metadata."""

    grid: RadialGrid
    u: np.ndarray
    u_r: np.ndarray
    u_r_mid: np.ndarray
    decreasing: bool = False
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, grid: RadialGrid, u, *, decreasing: bool = False,
                    meta: Optional[dict] = None) -> "SolutionProfile":
        u = _readonly(u)
        if u.shape != grid.nodes.shape:
            raise ProfileError("profile values must live on the grid nodes")
        if not np.all(np.isfinite(u)):
            raise ProfileError("profile values must be finite")
        u_r_mid = _readonly(np.diff(u) / grid.h)
        u_r = _readonly(_nodal_derivative(grid.nodes, u))
        if decreasing and np.any(u_r_mid > TOL_MONO):
            raise ProfileError("profile flagged decreasing has positive slopes")
        return cls(grid, u, u_r, u_r_mid, decreasing, dict(meta or {}))

    def with_meta(self, **kv) -> "SolutionProfile":
        meta = dict(self.meta)
        meta.update(kv)
        return replace(self, meta=meta)

    @property
    def u_max(self) -> float:
        return float(np.max(np.abs(self.u)))


# -- precomputed weights -----------------------------------------------------------

@dataclass(frozen=True)
class DiscreteWeights:
    """Geometry factors of a (model, grid) pair, reused across solves."""

    grid: RadialGrid
    W_mid: np.ndarray   # psi^(N-1) at cell midpoints (flux weights)
    w_src: np.ndarray   # nodal source/mass weights; origin cell volume-averaged
    w_node: np.ndarray  # raw psi(r_i)^(N-1) (trapezoid norm weights)

    @property
    def h(self):
        return self.grid.h

    @property
    def dual(self):
        return self.grid.dual

    @property
    def r(self):
        return self.grid.nodes


def build_weights(model: RiemannianModel, grid: RadialGrid) -> DiscreteWeights:
    w_node = model.weight(grid.nodes)
    w_src = w_node.copy()
    # psi^(N-1)(0) = 0 would decouple the axis node from its source; the origin
    # dual cell therefore carries the exact average of the volume density.
    half = 0.5 * grid.h[0]
    pts = 0.5 * half * (_GL_NODES + 1.0)
    w_src[0] = float(np.dot(_GL_WEIGHTS, model.weight(pts))) * 0.5
    return DiscreteWeights(grid, _readonly(model.weight(grid.mid)),
                           _readonly(w_src), _readonly(w_node))


# -- assembly -----------------------------------------------------------------------

def _rhs_nodes(rhs: RhsLike, r: np.ndarray) -> np.ndarray:
    if callable(rhs):
        vals = np.asarray(rhs(r), dtype=float)
    else:
        vals = np.asarray(rhs, dtype=float)
    vals = np.broadcast_to(vals, r.shape).astype(float)
    if not np.all(np.isfinite(vals)):
        raise AssemblyError("right-hand side must be finite on the grid")
    return vals


def _values(u) -> np.ndarray:
    if isinstance(u, SolutionProfile):
        return u.u
    return np.asarray(u, dtype=float)


def _residual_arrays(w: DiscreteWeights, cfg: OperatorConfig, u: np.ndarray,
                     rhs: np.ndarray, g_D: float) -> np.ndarray:
    d = np.diff(u) / w.h
    flux = w.W_mid * phi_p(d, cfg.p, cfg.eps_reg)
    R = np.empty_like(u)
    R[0] = -flux[0] / w.dual[0] - w.w_src[0] * rhs[0]
    R[1:-1] = -np.diff(flux) / w.dual[1:-1] - w.w_src[1:-1] * rhs[1:-1]
    R[-1] = u[-1] - g_D
    return R


def assemble_residual(model: RiemannianModel, cfg: OperatorConfig, u,
                      rhs: RhsLike, *, g_D: float = 0.0,
                      weights: Optional[DiscreteWeights] = None,
                      grid: Optional[RadialGrid] = None) -> np.ndarray:
    """Nodal residual of the flux-form equation; Dirichlet row at r = 1.

    The left flux of the origin cell is exactly zero (pole regularity).
    """
    if isinstance(u, SolutionProfile):
        grid = u.grid
    if weights is None:
        if grid is None:
            raise AssemblyError("assemble_residual needs a profile or a grid")
        weights = build_weights(model, grid)
    vals = _values(u)
    return _residual_arrays(weights, cfg, vals,
                            _rhs_nodes(rhs, weights.r), g_D)


@dataclass(frozen=True)
class Tridiagonal:
    """Rows (lower, diag, upper) of a tridiagonal matrix."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def to_banded(self) -> np.ndarray:
        n = self.diag.size
        ab = np.zeros((3, n))
        ab[0, 1:] = self.upper
        ab[1, :] = self.diag
        ab[2, :-1] = self.lower
        return ab

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.upper * x[1:]
        y[1:] += self.lower * x[:-1]
        return y

    def solve(self, b: np.ndarray) -> np.ndarray:
        return solve_banded((1, 1), self.to_banded(), b)

    def to_dense(self) -> np.ndarray:
        return (np.diag(self.diag) + np.diag(self.upper, 1)
                + np.diag(self.lower, -1))


def _jacobian_arrays(w: DiscreteWeights, cfg: OperatorConfig, u: np.ndarray,
                     rhs_prime: Optional[np.ndarray]) -> Tridiagonal:
    d = np.diff(u) / w.h
    c = w.W_mid * phi_p_prime(d, cfg.p, cfg.eps_reg) / w.h  # edge stiffness
    n1 = u.size
    diag = np.zeros(n1)
    lower = np.zeros(n1 - 1)
    upper = np.zeros(n1 - 1)
    diag[0] = c[0] / w.dual[0]
    upper[0] = -c[0] / w.dual[0]
    diag[1:-1] = (c[1:] + c[:-1]) / w.dual[1:-1]
    upper[1:] = -c[1:] / w.dual[1:-1]
    lower[:-1] = -c[:-1] / w.dual[1:-1]
    if rhs_prime is not None:
        diag[:-1] -= w.w_src[:-1] * rhs_prime[:-1]
    # Dirichlet row
    diag[-1] = 1.0
    lower[-1] = 0.0
    return Tridiagonal(lower, diag, upper)


def assemble_jacobian(model: RiemannianModel, cfg: OperatorConfig, u,
                      rhs_derivative: Optional[RhsLike] = None, *,
                      weights: Optional[DiscreteWeights] = None,
                      grid: Optional[RadialGrid] = None) -> Tridiagonal:
    """Exact derivative of assemble_residual with respect to nodal values."""
    if isinstance(u, SolutionProfile):
        grid = u.grid
    if weights is None:
        if grid is None:
            raise AssemblyError("assemble_jacobian needs a profile or a grid")
        weights = build_weights(model, grid)
    rp = None if rhs_derivative is None else _rhs_nodes(rhs_derivative, weights.r)
    return _jacobian_arrays(weights, cfg, _values(u), rp)


# -- solvers -------------------------------------------------------------------------

def _direct_solution(w: DiscreteWeights, cfg: OperatorConfig,
                     rhs: np.ndarray, g_D: float) -> np.ndarray:
    """Exact solution of the discrete system for a fixed right-hand side.

    Integrating the conservation form outward from the zero pole flux gives the
    midpoint flux values directly; inverting phi_p yields the slopes, which sum
    inward from u(1) = g_D.
    """
    src = w.dual * w.w_src * rhs
    G = np.cumsum(src[:-1])
    d = phi_p_inverse(-G / w.W_mid, cfg.p, cfg.eps_reg)
    u = np.empty(w.r.size)
    u[-1] = g_D
    u[:-1] = g_D - np.cumsum((w.h * d)[::-1])[::-1]
    return u


def _roundoff_floor(w: DiscreteWeights, cfg: OperatorConfig, u: np.ndarray,
                    rhs: np.ndarray) -> np.ndarray:
    """Rowwise residual magnitude attributable to double-precision storage.

    Re-differencing nodal values loses eps * |u| / h per slope; the flux
    difference then cannot be trusted below this level, no matter the iterate.
    """
    d = np.diff(u) / w.h
    F = np.abs(w.W_mid * phi_p(d, cfg.p, cfg.eps_reg))
    cancel = (w.W_mid * phi_p_prime(d, cfg.p, cfg.eps_reg)
              * (np.abs(u[:-1]) + np.abs(u[1:])) / w.h)
    t = F + cancel
    fl = np.empty_like(u)
    fl[0] = t[0] / w.dual[0]
    fl[1:-1] = (t[1:] + t[:-1]) / w.dual[1:-1]
    fl[-1] = np.abs(u[-1]) + 1.0
    fl += w.w_src * (1.0 + np.abs(rhs))
    return 4.0 * np.finfo(float).eps * fl


def _scale_rows(w: DiscreteWeights, rhs: np.ndarray) -> np.ndarray:
    scale = np.maximum(w.w_src * (1.0 + np.abs(rhs)), 1e-300)
    scale[-1] = 1.0
    return scale


def _merit(R: np.ndarray, scale: np.ndarray, fl: np.ndarray) -> float:
    excess = np.maximum(np.abs(R) - fl, 0.0)
    return float(max(np.max(excess), np.max(excess / scale)))


def _newton_polish(w: DiscreteWeights, cfg: OperatorConfig, u: np.ndarray,
                   rhs: np.ndarray, rhs_prime: Optional[np.ndarray],
                   g_D: float) -> tuple[np.ndarray, int]:
    """Damped Newton on the full residual; returns (u, iterations).

    Convergence is judged on the residual above the roundoff floor, both in
    absolute terms and relative to the local source scale.
    """
    scale = _scale_rows(w, rhs)
    R = _residual_arrays(w, cfg, u, rhs, g_D)
    m = _merit(R, scale, _roundoff_floor(w, cfg, u, rhs))
    for it in range(cfg.max_newton):
        if m <= cfg.tol_newton:
            return u, it
        J = _jacobian_arrays(w, cfg, u, rhs_prime)
        du = J.solve(-R)
        t = 1.0
        while t >= 2.0 ** -40:
            u_try = u + t * du
            R_try = _residual_arrays(w, cfg, u_try, rhs, g_D)
            m_try = _merit(R_try, scale, _roundoff_floor(w, cfg, u_try, rhs))
            if m_try <= (1.0 - 1e-4 * t) * m:
                u, R, m = u_try, R_try, m_try
                break
            t *= 0.5
        else:
            raise NewtonDivergenceError(
                f"line search exhausted at residual {m:.2e}")
    if m <= cfg.tol_newton:
        return u, cfg.max_newton
    raise NewtonDivergenceError(
        f"no convergence in {cfg.max_newton} Newton iterations (residual {m:.2e})")


def solve_fixed_rhs(model: RiemannianModel, cfg: OperatorConfig,
                    grid: RadialGrid, rhs: RhsLike, *, g_D: float = 0.0,
                    weights: Optional[DiscreteWeights] = None,
                    rhs_derivative: Optional[RhsLike] = None) -> SolutionProfile:
    """Solve the flux-form problem with a frozen right-hand side >= 0."""
    w = weights if weights is not None else build_weights(model, grid)
    rhs_nodes = _rhs_nodes(rhs, w.r)
    if np.any(rhs_nodes < -1e-12):
        raise DomainError("fixed-rhs solve requires rhs >= 0 (monotone regime)")
    u = _direct_solution(w, cfg, rhs_nodes, g_D)
    rp = None if rhs_derivative is None else _rhs_nodes(rhs_derivative, w.r)
    u, iters = _newton_polish(w, cfg, u, rhs_nodes, rp, g_D)
    return SolutionProfile.from_values(
        grid, u, decreasing=bool(np.all(rhs_nodes >= 0.0)) and g_D == 0.0,
        meta={"newton_iters": iters})


def torsion_function(model: RiemannianModel, cfg: OperatorConfig,
                     grid: RadialGrid, *,
                     weights: Optional[DiscreteWeights] = None) -> SolutionProfile:
    """Solution of the flux-form problem with unit right-hand side."""
    return solve_fixed_rhs(model, cfg, grid, 1.0, weights=weights)


# -- norms ----------------------------------------------------------------------------

def weighted_integral(model: RiemannianModel, grid: RadialGrid,
                      values) -> float:
    """Trapezoid integral of values(r) * psi^(N-1) over [0, 1]."""
    vals = np.asarray(values, dtype=float)
    return float(np.trapezoid(vals * model.weight(grid.nodes), grid.nodes))


def lq_norm(model: RiemannianModel, u: SolutionProfile, q: float) -> float:
    """Weighted Lebesgue norm (trapezoid on the grid)."""
    if not q >= 1:
        raise DomainError("q must be >= 1")
    return weighted_integral(model, u.grid, np.abs(u.u) ** q) ** (1.0 / q)


def linf_norm(u: SolutionProfile) -> float:
    return u.u_max


def w1q_seminorm(model: RiemannianModel, u: SolutionProfile, q: float) -> float:
    if not q >= 1:
        raise DomainError("q must be >= 1")
    return weighted_integral(model, u.grid, np.abs(u.u_r) ** q) ** (1.0 / q)


def w1q_norm(model: RiemannianModel, u: SolutionProfile, q: float) -> float:
    return (lq_norm(model, u, q) ** q
            + w1q_seminorm(model, u, q) ** q) ** (1.0 / q)
