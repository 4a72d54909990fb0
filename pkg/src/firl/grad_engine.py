"""Analytic gradient of the f-divergence between the expert state
density and the learned policy's state marginal.

The gradient is (1 / (alpha T)) times the trajectory covariance between
the summed ratio statistic h_f(u(s_t)) and the summed reward gradient,
both over t = 1..T (the start state carries no reward). Four
evaluation routes live here:

  exact      contraction against pairwise state marginals, no sampling
  mc         sample covariance over policy rollouts
  mixture    sample covariance over pooled agent + resampled expert rollouts
  enumerate  brute-force expectation over every trajectory

plus the two baselines (maximum-entropy IRL matching, linear IPM
critic) and a central-difference oracle used only for verification.
"""

import numpy as np

from .divergence import DENSITY_FLOOR, KINDS, density_values, h_f
from .mdp import FiniteMdp
from .reward_model import (apply_update, default_features, mlp_reward,
                           reward_jacobian, reward_vector, tabular_reward)
from .soft_solver import (enumerate_trajectories, forward_marginals,
                          pairwise_marginals, soft_backward)

FD_PARAM_CAP = 256


class GradReport:
    """grad (n_params,), the estimator name, sample count, diagnostics."""

    def __init__(self, grad, estimator, n_samples=None, diagnostics=None):
        self.grad = np.asarray(grad, dtype=float)
        if not np.all(np.isfinite(self.grad)):
            raise ValueError("%s produced a non-finite gradient" % estimator)
        self.estimator = estimator
        self.n_samples = n_samples
        self.diagnostics = diagnostics or {}


def _expert_values(rho_e, kind):
    p = density_values(rho_e)
    if kind in ("fkl", "js") and abs(p.sum() - 1.0) > 1e-8:
        raise ValueError("%s needs a normalized expert density" % kind)
    return p


def _h_table(kind, rho_e, marginal_avg):
    """h_f(u) per state, with zero weight where the policy never goes."""
    p = _expert_values(rho_e, kind)
    q = np.asarray(marginal_avg, dtype=float)
    visited = q > 0
    u = p / np.where(visited, q, 1.0)
    with np.errstate(divide="ignore"):
        h = h_f(kind, u)
    h = np.where(visited, h, 0.0)
    if not np.all(np.isfinite(h)):
        bad = int(np.nonzero(~np.isfinite(h))[0][0])
        raise ValueError("h_%s is not finite at state %d: the policy visits a "
                         "state with zero expert density" % (kind, bad))
    return h


def _ensure_solution(mdp, model, alpha, sol):
    if sol is None:
        sol = soft_backward(mdp, reward_vector(model), alpha)
    if sol.marginal_avg is None:
        forward_marginals(mdp, sol)
    return sol


def analytic_grad_exact(mdp, model, alpha, kind, rho_e=None, sol=None, ratio=None):
    """Sampling-free covariance via pairwise state marginals.

    Supply either the expert density rho_e (the ratio is formed exactly
    against the solved marginal) or a precomputed per-state ratio
    estimate; exactly one of the two.
    """
    if (rho_e is None) == (ratio is None):
        raise ValueError("pass exactly one of rho_e and ratio")
    if kind not in KINDS:
        raise ValueError("unknown divergence kind %r" % (kind,))
    sol = _ensure_solution(mdp, model, alpha, sol)
    if ratio is not None:
        h = h_f(kind, ratio.ratios)
    else:
        h = _h_table(kind, rho_e, sol.marginal_avg)
    g = reward_jacobian(model)
    pair = pairwise_marginals(mdp, sol)
    t_hor = mdp.horizon
    w = np.zeros(mdp.n_states)
    for (t, tp), joint in pair.items():
        if t == tp:
            w += h * np.diag(joint)
        else:
            w += h @ joint      # h at t, grad at tp
            w += joint @ h      # grad at t, h at tp
    sum_h = float(t_hor * (sol.marginal_avg @ h))
    sum_g = t_hor * (sol.marginal_avg @ g)
    grad = (w @ g - sum_h * sum_g) / (alpha * t_hor)
    diag = {"mean_h": float(sol.marginal_avg @ h),
            "h_min": float(h.min()), "h_max": float(h.max())}
    return GradReport(grad, "exact", diagnostics=diag)


def _batch_sums(states, h_table, g):
    """Per-trajectory sums of h and of the reward jacobian, skipping s_0."""
    body = states[:, 1:]
    n, t_hor = body.shape
    n_states = g.shape[0]
    a = h_table[body].sum(axis=1)
    flat = (body + np.arange(n)[:, None] * n_states).ravel()
    counts = np.bincount(flat, minlength=n * n_states).reshape(n, n_states)
    b = counts @ g
    return a, b, t_hor


def _sample_cov(a, b):
    n = len(a)
    if n < 2:
        raise ValueError("covariance needs at least 2 trajectories, got %d" % n)
    return (a - a.mean()) @ (b - b.mean(axis=0)) / (n - 1)


def _mc_diag(a, t_hor):
    """Spread of the per-trajectory h sums; wide spread means the batch
    mixes states with very different expert/agent density ratios."""
    return {"mean_h": float(a.mean() / t_hor),
            "sum_h_min": float(a.min()), "sum_h_max": float(a.max())}


def analytic_grad_mc(batch, model, alpha, kind, ratio):
    """Unbiased sample covariance over a batch of policy rollouts.

    The ratio estimate is evaluated with clipping so a stray state
    with vanishing estimated density cannot blow up a single term.
    """
    if kind not in KINDS:
        raise ValueError("unknown divergence kind %r" % (kind,))
    h_table = h_f(kind, ratio.ratios, clip=True)
    g = reward_jacobian(model)
    a, b, t_hor = _batch_sums(batch.states, h_table, g)
    grad = _sample_cov(a, b) / (alpha * t_hor)
    return GradReport(grad, "mc", n_samples=batch.n, diagnostics=_mc_diag(a, t_hor))


def analytic_grad_mixture(agent, expert, model, alpha, kind, ratio, seed=0):
    """Covariance over agent rollouts pooled with resampled expert ones.

    The expert batch is bootstrap-resampled to the agent batch size so
    both sides enter the pool with equal weight.
    """
    if kind not in KINDS:
        raise ValueError("unknown divergence kind %r" % (kind,))
    if agent.states.shape[1] != expert.states.shape[1]:
        raise ValueError("agent and expert horizons differ")
    rng = np.random.default_rng(seed)
    pick = rng.integers(0, expert.n, size=agent.n)
    pooled = np.vstack([agent.states, expert.states[pick]])
    h_table = h_f(kind, ratio.ratios, clip=True)
    g = reward_jacobian(model)
    a, b, t_hor = _batch_sums(pooled, h_table, g)
    grad = _sample_cov(a, b) / (alpha * t_hor)
    return GradReport(grad, "mixture", n_samples=len(pooled),
                      diagnostics=_mc_diag(a, t_hor))


def maxentirl_grad(expert, sol, model, alpha, agent_density=None,
                   use_importance_sampling=False):
    """Feature-matching baseline: (T / alpha) (E_expert[g] - E_policy[g]).

    The expert side accepts either trajectory samples (integer state
    arrays; start states are skipped) or a state density. With
    importance sampling on, the expert expectation is instead taken
    under the policy marginal reweighted by rho_E / agent_density.
    """
    g = reward_jacobian(model)
    t_hor = sol.policy.shape[0]
    if sol.marginal_avg is None:
        raise ValueError("solution is missing marginals")
    e_policy = sol.marginal_avg @ g
    if use_importance_sampling:
        if agent_density is None:
            raise ValueError("importance sampling needs an agent density estimate")
        p = density_values(expert)
        w = p / np.maximum(np.asarray(agent_density, dtype=float), DENSITY_FLOOR)
        e_expert = (sol.marginal_avg * w) @ g
        estimator = "maxentirl_is"
    else:
        e_expert, estimator = _expert_side(expert, g), "maxentirl"
    grad = (t_hor / alpha) * (e_expert - e_policy)
    return GradReport(grad, estimator)


def _expert_side(expert, g):
    if hasattr(expert, "states"):
        states = np.asarray(expert.states, dtype=np.int64)[:, 1:]
        return g[states.ravel()].mean(axis=0)
    arr = np.asarray(expert)
    if arr.dtype.kind in "iu" and not hasattr(expert, "values"):
        return g[arr.ravel()].mean(axis=0)
    return density_values(expert) @ g


def ipm_grad(batch, critic, model, alpha):
    """Integral-probability-metric direction: minus the covariance of
    the summed critic with the summed reward gradient."""
    critic = np.asarray(critic, dtype=float)
    g = reward_jacobian(model)
    a, b, t_hor = _batch_sums(batch.states, critic, g)
    grad = -_sample_cov(a, b) / (alpha * t_hor)
    return GradReport(grad, "ipm", n_samples=batch.n)


def linear_ball_critic(features, expert_states, agent_states, radius=1.0):
    """Optimal critic over the radius-ball of linear functions: per-state
    values of the feature-mean difference direction."""
    features = np.asarray(features, dtype=float)
    mu_e = features[np.asarray(expert_states, dtype=np.int64).ravel()].mean(axis=0)
    mu_a = features[np.asarray(agent_states, dtype=np.int64).ravel()].mean(axis=0)
    direction = mu_e - mu_a
    norm = np.linalg.norm(direction)
    if norm == 0:
        return np.zeros(features.shape[0])
    return features @ (radius * direction / norm)


def fd_grad_oracle(mdp, model, alpha, kind, rho_e, eps=1e-5):
    """Central differences through solve -> marginal -> exact divergence.

    Independent of every analytic path above; refuses models beyond
    FD_PARAM_CAP parameters since the cost is two solves per parameter.
    """
    if model.n_params > FD_PARAM_CAP:
        raise ValueError("finite differencing %d params exceeds the cap of %d"
                         % (model.n_params, FD_PARAM_CAP))
    from .divergence import divergence_exact

    p = _expert_values(rho_e, kind)

    def loss(m):
        sol = forward_marginals(mdp, soft_backward(mdp, reward_vector(m), alpha))
        return divergence_exact(kind, p, sol.marginal_avg)

    grad = np.zeros(model.n_params)
    for i in range(model.n_params):
        step = np.zeros(model.n_params)
        step[i] = eps
        grad[i] = (loss(apply_update(model, step))
                   - loss(apply_update(model, -step))) / (2 * eps)
    return GradReport(grad, "fd_oracle")


def enumeration_grad(mdp, model, alpha, kind, rho_e, sol=None):
    """Exact covariance by summing over every trajectory explicitly."""
    sol = _ensure_solution(mdp, model, alpha, sol)
    h = _h_table(kind, rho_e, sol.marginal_avg)
    g = reward_jacobian(model)
    paths, probs = enumerate_trajectories(mdp, sol)
    body = paths[:, 1:]
    a = h[body].sum(axis=1)
    b = g[body].sum(axis=1) if body.size else np.zeros((len(paths), g.shape[1]))
    e_ab = (probs * a) @ b
    e_a = probs @ a
    e_b = probs @ b
    grad = (e_ab - e_a * e_b) / (alpha * mdp.horizon)
    return GradReport(grad, "enumerate", n_samples=len(paths))


def _random_instance(rng, index):
    """Deterministic-transition MDP with a point-mass start state.

    On this family the trajectory covariance is exactly the gradient of
    the divergence, because the policy is the only source of
    randomness, so the score of a trajectory telescopes into the sum
    of per-step policy scores with no transition terms.
    """
    n_s = int(rng.integers(2, 7))
    n_a = int(rng.integers(2, 4))
    horizon = int(rng.integers(2, 6))
    dest = rng.integers(0, n_s, size=(n_s, n_a))
    transitions = np.zeros((n_s, n_a, n_s))
    for s in range(n_s):
        for a in range(n_a):
            transitions[s, a, dest[s, a]] = 1.0
    s0 = int(rng.integers(0, n_s))
    init = np.zeros(n_s)
    init[s0] = 1.0
    coords = rng.random((n_s, 2)) * 3.0
    mdp = FiniteMdp(transitions, init, horizon, coords=coords)
    # expert mass only where the policy can ever go, so the exact
    # divergence stays finite for every theta along the FD stencil
    reachable = set()
    frontier = {s0}
    for _ in range(horizon):
        frontier = {int(dest[s, a]) for s in frontier for a in range(n_a)}
        reachable |= frontier
    reach = sorted(reachable)
    rho_e = np.zeros(n_s)
    rho_e[reach] = rng.dirichlet(np.full(len(reach), 2.0))
    if index % 2 == 0:
        model = tabular_reward(n_s)
        model = apply_update(model, rng.normal(0.0, 0.3, size=n_s))
    else:
        model = mlp_reward(default_features(mdp), hidden=(8, 8),
                           seed=int(rng.integers(0, 2 ** 31)))
        model = apply_update(model, rng.normal(0.0, 0.3, size=model.n_params))
    alpha = float(rng.uniform(0.5, 2.0))
    return mdp, rho_e, model, alpha


def gradcheck_suite(n_instances=20, seed=0, eps=1e-5):
    """Analytic-vs-finite-difference sweep over random instances.

    Returns one record per instance with the relative L2 error between
    the exact covariance gradient and the central-difference oracle.
    """
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_instances):
        mdp, rho_e, model, alpha = _random_instance(rng, i)
        kind = KINDS[i % len(KINDS)]
        ga = analytic_grad_exact(mdp, model, alpha, kind, rho_e=rho_e).grad
        gf = fd_grad_oracle(mdp, model, alpha, kind, rho_e, eps=eps).grad
        rel = float(np.linalg.norm(ga - gf) / max(np.linalg.norm(gf), 1e-12))
        records.append({
            "instance": i,
            "n_states": mdp.n_states,
            "n_actions": mdp.n_actions,
            "horizon": mdp.horizon,
            "kind": kind,
            "reward_kind": model.kind,
            "rel_error": rel,
        })
    return records
