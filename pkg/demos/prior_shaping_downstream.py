"""Use a learned reward as a shaping prior on a hard-exploration task.

First confirm the safety property: with gamma = 1 and the terminal
convention, potential shaping moves no policy at all. Then drop the
convention, discount slightly, and sweep the shaping weight: a prior
trained on a uniform coverage target speeds up the goal-seeking task
at the right weight.

Run:  python3 demos/prior_shaping_downstream.py
"""

import numpy as np

from firl.mdp import build_gridworld
from firl.reward_model import reward_vector
from firl.scenarios import (density_matching, hard_exploration_task,
                            prior_reward_downstream, run_scenario)
from firl.soft_solver import soft_backward
from firl.trainer import potential_shape


def main():
    rng = np.random.default_rng(0)
    mdp = build_gridworld(4, 4, horizon=6)
    reward = rng.normal(size=16)
    phi = rng.normal(size=16)
    base = soft_backward(mdp, reward, 0.7)
    shaped = soft_backward(mdp, potential_shape(reward, phi, horizon=6), 0.7)
    print("potential shaping, gamma 1, terminal convention:")
    print("  max policy deviation %.2e (invariant by construction)"
          % np.max(np.abs(shaped.policy - base.policy)))
    print()

    print("training a coverage prior (uniform target, 6x6, 200 iterations)")
    sc = density_matching("uniform", grid=(6, 6), iterations=200, seed=0)
    prior = reward_vector(run_scenario(sc).model)

    rows = prior_reward_downstream(prior)
    controls = {r["alpha"]: r["return"] for r in rows if r["lambda"] == 0.0}
    print("downstream return minus the unshaped control:")
    alphas = sorted(controls)
    lams = sorted({r["lambda"] for r in rows})
    print("  lambda  " + "  ".join("alpha=%-4g" % a for a in alphas))
    for lam in lams:
        cells = []
        for a in alphas:
            r = next(x for x in rows
                     if x["lambda"] == lam and x["alpha"] == a)
            cells.append("%+ .4f  " % (r["return"] - controls[a]))
        print("  %-6g  %s" % (lam, "".join(cells)))


if __name__ == "__main__":
    main()
