"""Train the same two-blob matching problem under FKL, RKL and JS and
compare where each lands. All three share one gradient engine; only the
h transform weighting trajectories differs.

Run:  python3 demos/compare_divergences.py
"""

import numpy as np

from firl.divergence import divergence_exact
from firl.reward_model import reward_vector
from firl.scenarios import density_matching, run_scenario
from firl.soft_solver import forward_marginals, soft_backward


def main():
    print("kind   exact_fkl  exact_rkl  exact_js   TV       wall")
    for kind in ("fkl", "rkl", "js"):
        sc = density_matching("mixture2", grid=(5, 5), kind=kind, seed=0)
        result = run_scenario(sc)
        sol = forward_marginals(sc.mdp, soft_backward(
            sc.mdp, reward_vector(result.model), sc.cfg.alpha))
        rho = sol.marginal_avg
        tv = 0.5 * np.abs(rho - sc.expert).sum()
        print("%-5s  %.6f   %.6f   %.6f   %.4f   %.1fs"
              % (kind,
                 divergence_exact("fkl", sc.expert, rho),
                 divergence_exact("rkl", sc.expert, rho),
                 divergence_exact("js", sc.expert, rho),
                 tv, result.wall_clock))
    print()
    print("each run minimizes its own column; on a problem this easy")
    print("all three drive every divergence close to zero")


if __name__ == "__main__":
    main()
