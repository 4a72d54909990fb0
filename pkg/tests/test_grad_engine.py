"""The covariance gradient and its independent cross-checks.

The exact contraction, the sampled estimators, the brute-force
enumeration, and the central-difference oracle all measure the same
quantity through unrelated code paths; these tests hold them together.
"""

import numpy as np
import pytest

from firl.density_ratio import exact_ratio
from firl.divergence import KINDS, ExpertDensity, h_f
from firl.grad_engine import (GradReport, analytic_grad_exact,
                              analytic_grad_mc, analytic_grad_mixture,
                              enumeration_grad, fd_grad_oracle,
                              gradcheck_suite, ipm_grad, linear_ball_critic,
                              maxentirl_grad)
from firl.mdp import build_gridworld
from firl.reward_model import apply_update, tabular_reward
from firl.soft_solver import (TrajectoryBatch, forward_marginals,
                              sample_trajectories, soft_backward)


def _instance(seed=0, slip=0.0, grid=(3, 3), horizon=4, alpha=1.0):
    rng = np.random.default_rng(seed)
    mdp = build_gridworld(*grid, slip_prob=slip, horizon=horizon)
    model = apply_update(tabular_reward(mdp.n_states),
                         rng.normal(0, 0.3, mdp.n_states))
    rho_e = rng.dirichlet(np.full(mdp.n_states, 2.0))
    sol = forward_marginals(mdp, soft_backward(mdp, model.params, alpha))
    return mdp, model, rho_e, sol


@pytest.mark.parametrize("kind", KINDS)
def test_gradient_vanishes_at_the_matched_density(kind):
    mdp, model, _, sol = _instance(seed=1)
    report = analytic_grad_exact(mdp, model, 1.0, kind,
                                 rho_e=sol.marginal_avg, sol=sol)
    assert np.linalg.norm(report.grad) < 1e-12


def test_reverse_kl_ignores_the_expert_scale():
    mdp, model, rho_e, sol = _instance(seed=2)
    g1 = analytic_grad_exact(mdp, model, 1.0, "rkl", rho_e=rho_e, sol=sol).grad
    g2 = analytic_grad_exact(
        mdp, model, 1.0, "rkl",
        rho_e=ExpertDensity(3.7 * rho_e, normalized=False), sol=sol).grad
    assert np.abs(g1 - g2).max() < 1e-12


def test_forward_kl_requires_a_normalized_expert():
    mdp, model, rho_e, sol = _instance(seed=3)
    with pytest.raises(ValueError, match="normalized expert density"):
        analytic_grad_exact(mdp, model, 1.0, "fkl",
                            rho_e=ExpertDensity(2.0 * rho_e, normalized=False),
                            sol=sol)


def test_reverse_kl_rejects_zero_expert_mass_on_visited_states():
    mdp, model, _, sol = _instance(seed=4)
    point = np.zeros(mdp.n_states)
    point[0] = 1.0
    with pytest.raises(ValueError, match="h_rkl is not finite at state"):
        analytic_grad_exact(mdp, model, 1.0, "rkl", rho_e=point, sol=sol)


def test_exactly_one_ratio_source_is_accepted():
    mdp, model, rho_e, sol = _instance(seed=5)
    ratio = exact_ratio(rho_e, sol.marginal_avg)
    with pytest.raises(ValueError, match="exactly one"):
        analytic_grad_exact(mdp, model, 1.0, "fkl", rho_e=rho_e, ratio=ratio)
    with pytest.raises(ValueError, match="exactly one"):
        analytic_grad_exact(mdp, model, 1.0, "fkl")


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("slip", [0.0, 0.2])
def test_exact_contraction_equals_enumeration(kind, slip):
    mdp, model, rho_e, sol = _instance(seed=6, slip=slip, alpha=0.8)
    ga = analytic_grad_exact(mdp, model, 0.8, kind, rho_e=rho_e, sol=sol).grad
    ge = enumeration_grad(mdp, model, 0.8, kind, rho_e, sol=sol).grad
    assert np.linalg.norm(ga - ge) < 1e-10


def test_exact_gradient_matches_the_fd_oracle():
    mdp, model, rho_e, sol = _instance(seed=7)
    ga = analytic_grad_exact(mdp, model, 1.0, "fkl", rho_e=rho_e, sol=sol).grad
    gf = fd_grad_oracle(mdp, model, 1.0, "fkl", rho_e).grad
    assert np.linalg.norm(ga - gf) / np.linalg.norm(gf) < 1e-6


def test_fd_error_shrinks_quadratically_in_eps():
    mdp, model, rho_e, sol = _instance(seed=8)
    ga = analytic_grad_exact(mdp, model, 1.0, "fkl", rho_e=rho_e, sol=sol).grad
    e1 = np.linalg.norm(fd_grad_oracle(mdp, model, 1.0, "fkl", rho_e,
                                       eps=1e-3).grad - ga)
    e2 = np.linalg.norm(fd_grad_oracle(mdp, model, 1.0, "fkl", rho_e,
                                       eps=5e-4).grad - ga)
    assert 3.5 < e1 / e2 < 4.5


def test_fd_refuses_oversized_models():
    mdp, _, rho_e, _ = _instance(seed=9)
    big = tabular_reward(300)
    with pytest.raises(ValueError, match="exceeds the cap"):
        fd_grad_oracle(mdp, big, 1.0, "fkl", rho_e)


def test_gradcheck_suite_stays_within_tolerance():
    records = gradcheck_suite(n_instances=6, seed=0)
    assert len(records) == 6
    assert all(r["rel_error"] < 1e-4 for r in records)
    assert [r["kind"] for r in records] == ["fkl", "rkl", "js"] * 2
    assert {r["reward_kind"] for r in records} == {"tabular", "mlp"}
    assert all(r["instance"] == i for i, r in enumerate(records))


def test_symmetric_problem_gives_a_symmetric_gradient():
    # 3x1 corridor started in the middle with a mirror-symmetric target
    mdp = build_gridworld(3, 1, init_state=1, horizon=3)
    model = tabular_reward(3)
    rho_e = np.array([0.25, 0.5, 0.25])
    g = analytic_grad_exact(mdp, model, 1.0, "fkl", rho_e=rho_e).grad
    assert g[0] == pytest.approx(g[2], abs=1e-14)


def test_mc_estimates_the_exact_gradient():
    mdp, model, rho_e, sol = _instance(seed=10)
    ratio = exact_ratio(rho_e, sol.marginal_avg)
    ga = analytic_grad_exact(mdp, model, 1.0, "fkl", rho_e=rho_e, sol=sol).grad
    batch = sample_trajectories(mdp, sol, 50_000, seed=11)
    report = analytic_grad_mc(batch, model, 1.0, "fkl", ratio)
    assert np.linalg.norm(report.grad - ga) / np.linalg.norm(ga) < 0.05
    assert report.n_samples == 50_000
    assert report.estimator == "mc"


def test_mc_is_exactly_zero_under_a_constant_ratio():
    # constant h sums make the covariance vanish identically
    mdp, model, _, sol = _instance(seed=12)
    ratio = exact_ratio(np.full(9, 1.0 / 9.0), np.full(9, 1.0 / 9.0))
    batch = sample_trajectories(mdp, sol, 64, seed=13)
    report = analytic_grad_mc(batch, model, 1.0, "fkl", ratio)
    assert np.array_equal(report.grad, np.zeros(9))


def test_mc_is_exactly_zero_on_identical_trajectories():
    mdp, model, rho_e, sol = _instance(seed=14)
    ratio = exact_ratio(rho_e, sol.marginal_avg)
    one = sample_trajectories(mdp, sol, 1, seed=15).states
    batch = TrajectoryBatch(np.repeat(one, 8, axis=0))
    report = analytic_grad_mc(batch, model, 1.0, "fkl", ratio)
    assert np.array_equal(report.grad, np.zeros(9))


def test_mc_needs_at_least_two_trajectories():
    mdp, model, rho_e, sol = _instance(seed=16)
    ratio = exact_ratio(rho_e, sol.marginal_avg)
    batch = sample_trajectories(mdp, sol, 1, seed=17)
    with pytest.raises(ValueError, match="at least 2 trajectories"):
        analytic_grad_mc(batch, model, 1.0, "fkl", ratio)


def test_mixture_is_zero_when_both_sides_repeat_one_path():
    mdp, model, rho_e, sol = _instance(seed=18)
    ratio = exact_ratio(rho_e, sol.marginal_avg)
    one = sample_trajectories(mdp, sol, 1, seed=19).states
    batch = TrajectoryBatch(np.repeat(one, 6, axis=0))
    report = analytic_grad_mixture(batch, batch, model, 1.0, "fkl", ratio)
    assert np.array_equal(report.grad, np.zeros(9))
    assert report.n_samples == 12
    assert report.estimator == "mixture"


def test_mixture_widens_the_h_sum_range_with_an_off_policy_expert():
    # agent wanders from the start corner; expert demos hug the far corner
    mdp = build_gridworld(3, 3, horizon=6)
    model = tabular_reward(9)
    gt = np.zeros(9)
    gt[8] = 2.0
    sol_a = forward_marginals(mdp, soft_backward(mdp, np.zeros(9), 1.0))
    sol_e = forward_marginals(mdp, soft_backward(mdp, gt, 0.3))
    agent = sample_trajectories(mdp, sol_a, 128, seed=20)
    expert = sample_trajectories(mdp, sol_e, 32, seed=21)
    ratio = exact_ratio(sol_e.marginal_avg, sol_a.marginal_avg)
    mc = analytic_grad_mc(agent, model, 1.0, "fkl", ratio)
    mix = analytic_grad_mixture(agent, expert, model, 1.0, "fkl", ratio, seed=22)
    mc_range = mc.diagnostics["sum_h_max"] - mc.diagnostics["sum_h_min"]
    mix_range = mix.diagnostics["sum_h_max"] - mix.diagnostics["sum_h_min"]
    assert mix_range > mc_range


def test_mixture_rejects_mismatched_horizons():
    mdp, model, rho_e, sol = _instance(seed=23)
    ratio = exact_ratio(rho_e, sol.marginal_avg)
    agent = sample_trajectories(mdp, sol, 8, seed=24)
    short = TrajectoryBatch(agent.states[:, :-1])
    with pytest.raises(ValueError, match="horizons differ"):
        analytic_grad_mixture(agent, short, model, 1.0, "fkl", ratio)


def test_maxentirl_tabular_coordinates():
    mdp, model, rho_e, sol = _instance(seed=25, alpha=0.5)
    report = maxentirl_grad(rho_e, sol, model, 0.5)
    want = (mdp.horizon / 0.5) * (rho_e - sol.marginal_avg)
    assert np.allclose(report.grad, want, atol=1e-12)
    assert report.estimator == "maxentirl"


def test_maxentirl_vanishes_at_the_match():
    mdp, model, _, sol = _instance(seed=26)
    report = maxentirl_grad(sol.marginal_avg, sol, model, 1.0)
    assert np.abs(report.grad).max() < 1e-12


def test_maxentirl_accepts_expert_trajectories():
    mdp, model, rho_e, sol = _instance(seed=27)
    batch = sample_trajectories(mdp, sol, 40, seed=28)
    report = maxentirl_grad(batch, sol, model, 1.0)
    emp = np.bincount(batch.states[:, 1:].ravel(), minlength=9) \
        / batch.states[:, 1:].size
    want = mdp.horizon * (emp - sol.marginal_avg)
    assert np.allclose(report.grad, want, atol=1e-12)
    # a flat array of visited states works the same way
    flat = maxentirl_grad(batch.states[:, 1:].ravel(), sol, model, 1.0)
    assert np.allclose(flat.grad, report.grad, atol=1e-15)


def test_maxentirl_importance_branch_matches_the_plain_one():
    mdp, model, rho_e, sol = _instance(seed=29)
    plain = maxentirl_grad(rho_e, sol, model, 1.0)
    weighted = maxentirl_grad(rho_e, sol, model, 1.0,
                              agent_density=sol.marginal_avg,
                              use_importance_sampling=True)
    assert np.allclose(weighted.grad, plain.grad, atol=1e-10)
    assert weighted.estimator == "maxentirl_is"
    with pytest.raises(ValueError, match="needs an agent density"):
        maxentirl_grad(rho_e, sol, model, 1.0, use_importance_sampling=True)


def test_maxentirl_needs_solved_marginals():
    mdp, model, rho_e, _ = _instance(seed=30)
    bare = soft_backward(mdp, model.params, 1.0)
    with pytest.raises(ValueError, match="missing marginals"):
        maxentirl_grad(rho_e, bare, model, 1.0)


def test_ipm_with_the_h_critic_mirrors_the_mc_gradient():
    mdp, model, rho_e, sol = _instance(seed=31)
    ratio = exact_ratio(rho_e, sol.marginal_avg)
    batch = sample_trajectories(mdp, sol, 256, seed=32)
    mc = analytic_grad_mc(batch, model, 1.0, "fkl", ratio)
    critic = h_f("fkl", ratio.ratios, clip=True)
    ipm = ipm_grad(batch, critic, model, 1.0)
    assert np.array_equal(ipm.grad, -mc.grad)
    assert ipm.estimator == "ipm"


def test_ipm_is_zero_under_a_constant_critic():
    mdp, model, _, sol = _instance(seed=33)
    batch = sample_trajectories(mdp, sol, 64, seed=34)
    report = ipm_grad(batch, np.full(9, 3.0), model, 1.0)
    assert np.array_equal(report.grad, np.zeros(9))


def test_linear_ball_critic_points_along_the_mean_gap():
    feats = np.eye(3)
    critic = linear_ball_critic(feats, [2, 2], [0, 0], radius=1.0)
    r2 = 1.0 / np.sqrt(2.0)
    assert np.allclose(critic, [-r2, 0.0, r2], atol=1e-12)
    doubled = linear_ball_critic(feats, [2, 2], [0, 0], radius=2.0)
    assert np.allclose(doubled, 2.0 * critic, atol=1e-12)
    flat = linear_ball_critic(feats, [1, 1], [1, 1])
    assert np.array_equal(flat, np.zeros(3))


def test_grad_report_rejects_non_finite_values():
    with pytest.raises(ValueError, match="non-finite gradient"):
        GradReport(np.array([1.0, np.inf]), "mc")


def test_exact_report_diagnostics():
    mdp, model, rho_e, sol = _instance(seed=35)
    report = analytic_grad_exact(mdp, model, 1.0, "fkl", rho_e=rho_e, sol=sol)
    d = report.diagnostics
    assert d["h_min"] <= d["mean_h"] <= d["h_max"]
