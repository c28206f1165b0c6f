import math

import numpy as np
import pytest

from pball import (Branch, BranchError, Divergence, Nonlinearity,
                   RadialGrid, SolverSettings,
                   UnboundedLambdaStarError, assemble_residual,
                   continue_branch, default_lambda_samples,
                   estimate_lambda_star, extremal_approximation,
                   lambda_lower_bound, monotone_minimal_solution)

# explicit minimal family on the flat disk: lam = 8b/(1+b)^2, sup u = 2 log(1+b)
B_AT_LAMBDA_ONE = 3.0 - 2.0 * math.sqrt(2.0)


@pytest.fixture(scope="module")
def disk_bracket(euclid2, cfg2, grid1024, exp_reaction):
    return estimate_lambda_star(euclid2, cfg2, exp_reaction, grid1024)


def test_lower_bound_values(euclid2, euclid3, cfg2, grid1024, exp_reaction):
    lam0 = lambda_lower_bound(euclid2, cfg2, exp_reaction, grid1024)
    assert lam0 == pytest.approx(math.exp(-0.25), abs=1e-4)
    lam0 = lambda_lower_bound(euclid3, cfg2, exp_reaction, grid1024)
    assert lam0 == pytest.approx(math.exp(-1.0 / 6.0), abs=1e-4)
    lam0 = lambda_lower_bound(euclid2, cfg2, Nonlinearity.power(3), grid1024)
    assert lam0 == pytest.approx(1.0 / 1.25 ** 3, abs=1e-3)


def test_minimal_solution_explicit_family(euclid2, cfg2, grid1024,
                                          exp_reaction):
    res = monotone_minimal_solution(euclid2, cfg2, exp_reaction, 1.0, grid1024)
    assert not isinstance(res, Divergence)
    assert res.u[0] == pytest.approx(2.0 * math.log(1.0 + B_AT_LAMBDA_ONE),
                                     abs=5e-4)
    assert res.decreasing and res.meta["monotone_certified"]
    # whole profile matches u_b(r) = 2 log((1+b)/(1+b r^2))
    r = grid1024.nodes
    b = B_AT_LAMBDA_ONE
    exact = 2.0 * np.log((1.0 + b) / (1.0 + b * r * r))
    assert np.max(np.abs(res.u - exact)) <= 5e-4


def test_minimal_solution_vanishes_as_lambda_to_zero(euclid2, cfg2, grid1024,
                                                     exp_reaction):
    res = monotone_minimal_solution(euclid2, cfg2, exp_reaction, 1e-6,
                                    grid1024)
    assert res.u_max <= 1e-5


def test_divergence_above_extremal(euclid2, cfg2, grid1024, exp_reaction):
    res = monotone_minimal_solution(euclid2, cfg2, exp_reaction, 3.0, grid1024)
    assert isinstance(res, Divergence)
    assert res.reason in ("saturation", "blowup")


def test_divergence_blowup_cutoff(euclid2, cfg2, exp_reaction):
    # a power reaction grows slowly enough to trip the sup-norm cutoff
    g = RadialGrid.uniform(64)
    res = monotone_minimal_solution(euclid2, cfg2, Nonlinearity.power(3),
                                    20.0, g)
    assert isinstance(res, Divergence)
    assert res.reason == "blowup"
    assert res.u_max > SolverSettings().blowup_cutoff


def test_divergence_detected_for_singular_exponent(hyper3, exp_reaction):
    # p < 2 blow-up drives the flux inverse past the double range; the
    # recursion must classify that as divergence, never crash
    from pball import OperatorConfig
    g = RadialGrid.uniform(64)
    cfg = OperatorConfig(p=1.5)
    res = monotone_minimal_solution(hyper3, cfg, exp_reaction, 50.0, g)
    assert isinstance(res, Divergence)
    assert res.reason in ("blowup", "saturation")


def test_fixed_point_residual(euclid2, cfg2, grid1024, exp_reaction):
    res = monotone_minimal_solution(euclid2, cfg2, exp_reaction, 1.0, grid1024)
    R = assemble_residual(euclid2, cfg2, res, exp_reaction.value(res.u))
    assert np.max(np.abs(R)) <= 10 * cfg2.tol_newton


def test_bracket_contains_two(disk_bracket):
    lo, hi = disk_bracket
    assert lo < 2.0 < hi
    assert (hi - lo) / hi <= 2e-3
    assert disk_bracket.lambda0 <= lo


def test_bracket_n10_contains_sixteen(cfg2, exp_reaction):
    from pball import RiemannianModel, WarpingProfile
    m = RiemannianModel(10, WarpingProfile.euclidean())
    g = RadialGrid.boundary_refined(1024)
    br = estimate_lambda_star(m, cfg2, exp_reaction, g)
    assert 16.0 * 0.98 <= br.midpoint <= 16.0 * 1.02


def test_unbounded_lambda_star_reported(euclid2, cfg2, exp_reaction):
    # bounded increasing reaction admits solutions at every lambda
    bounded = Nonlinearity.custom(lambda s: 2.0 - 1.0 / (1.0 + np.asarray(s)),
                                  lambda s: 1.0 / (1.0 + np.asarray(s)) ** 2)
    g = RadialGrid.uniform(32)
    st = SolverSettings(blowup_cutoff=1e250, max_doublings=40)
    with pytest.warns(UserWarning):
        with pytest.raises(UnboundedLambdaStarError):
            estimate_lambda_star(euclid2, cfg2, bounded, g, st)


def test_branch_monotone_and_bounds(euclid2, cfg2, grid1024, exp_reaction,
                                    disk_bracket):
    lams = np.array([0.5, 1.0, 1.5, 1.9])
    branch = continue_branch(euclid2, cfg2, exp_reaction, grid1024,
                             lam_samples=lams, bracket=disk_bracket)
    umax = [pt.u_max for pt in branch.points]
    assert all(a < b for a, b in zip(umax, umax[1:]))
    for pt in branch.points:
        assert all(math.isfinite(v) for v in pt.uniform_bounds)
        assert np.all(pt.profile.u_r_mid <= 1e-10)
        assert pt.profile.meta["monotone_certified"]


def test_branch_empty_samples_keeps_bracket(euclid2, cfg2, grid1024,
                                            exp_reaction, disk_bracket):
    branch = continue_branch(euclid2, cfg2, exp_reaction, grid1024,
                             lam_samples=[], bracket=disk_bracket)
    assert branch.points == ()
    assert branch.lambda_star_bracket == (disk_bracket.lambda_lo,
                                          disk_bracket.lambda_hi)


def test_branch_rejects_samples_at_or_above_lo(euclid2, cfg2, grid1024,
                                               exp_reaction, disk_bracket):
    with pytest.raises(BranchError):
        continue_branch(euclid2, cfg2, exp_reaction, grid1024,
                        lam_samples=[disk_bracket.lambda_lo],
                        bracket=disk_bracket)


def test_branch_uniform_bound_monitor_hyperbolic(hyper3, cfg2, exp_reaction):
    g = RadialGrid.uniform(512)
    br = estimate_lambda_star(hyper3, cfg2, exp_reaction, g)
    lams = np.concatenate([np.geomspace(0.1, 0.9, 6),
                           [0.98, 0.995]]) * br.lambda_lo
    branch = continue_branch(hyper3, cfg2, exp_reaction, g, lam_samples=lams,
                             bracket=br)
    (a_up, a_hu), (b_up, b_hu) = (branch.points[-2].uniform_bounds,
                                  branch.points[-1].uniform_bounds)
    assert 0.75 <= a_up / b_up <= 4.0 / 3.0
    assert 0.75 <= a_hu / b_hu <= 4.0 / 3.0


def test_default_samples_rule(disk_bracket):
    lams = default_lambda_samples(disk_bracket.lambda_lo)
    assert lams.size == 20
    assert np.all(lams < disk_bracket.lambda_lo)
    assert np.all(np.diff(lams) > 0)


def test_extremal_extrapolation_disk(euclid2, cfg2, grid1024, exp_reaction,
                                     disk_bracket):
    branch = continue_branch(euclid2, cfg2, exp_reaction, grid1024,
                             bracket=disk_bracket)
    ext = extremal_approximation(branch)
    assert ext.meta["u_max_extrapolated"] == pytest.approx(2.0 * math.log(2.0),
                                                           abs=0.05)


def test_extremal_requires_points_near_fold(euclid2, cfg2, grid1024,
                                            exp_reaction, disk_bracket):
    branch = continue_branch(euclid2, cfg2, exp_reaction, grid1024,
                             lam_samples=[0.5], bracket=disk_bracket)
    with pytest.raises(BranchError):
        extremal_approximation(branch)


def test_extremal_bounded_regime_n3(euclid3, cfg2, exp_reaction):
    g = RadialGrid.uniform(512)
    br = estimate_lambda_star(euclid3, cfg2, exp_reaction, g)
    branch = continue_branch(euclid3, cfg2, exp_reaction, g, bracket=br)
    ext = extremal_approximation(branch)
    est = ext.meta["u_max_extrapolated"]
    assert math.isfinite(est) and est < 10.0
    assert est >= branch.points[-1].u_max
    # cross-check against a deep bisection on a finer grid
    fine = RadialGrid.uniform(2048)
    deep = estimate_lambda_star(euclid3, cfg2, exp_reaction, fine,
                                SolverSettings(bisect_tol=1e-7))
    assert est == pytest.approx(deep.profile_lo.u_max, rel=0.05)


def test_minimality_cold_restart(euclid2, cfg2, grid1024, exp_reaction,
                                 disk_bracket):
    lams = np.array([0.4, 0.9, 1.4, 1.8, 1.95])
    branch = continue_branch(euclid2, cfg2, exp_reaction, grid1024,
                             lam_samples=lams, bracket=disk_bracket)
    for pt in branch.points[::2]:
        cold = monotone_minimal_solution(euclid2, cfg2, exp_reaction, pt.lam,
                                         grid1024)
        assert np.max(np.abs(cold.u - pt.profile.u)) <= 1e-7


def test_branch_constructor_validates_order(euclid2, cfg2, grid1024,
                                            exp_reaction, disk_bracket):
    branch = continue_branch(euclid2, cfg2, exp_reaction, grid1024,
                             lam_samples=[0.5, 1.0], bracket=disk_bracket)
    with pytest.raises(BranchError):
        Branch(tuple(reversed(branch.points)), branch.lambda_star_bracket,
               disk_bracket)
