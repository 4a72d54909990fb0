"""Finite-horizon tabular MDPs: construction, validation, perturbation."""

import numpy as np

# Action order used by the gridworld builders.
GRID_ACTIONS = ("right", "up", "left", "down", "stay")
GRID_DELTAS = ((1, 0), (0, 1), (-1, 0), (0, -1), (0, 0))

STOCHASTIC_TOL = 1e-12


class FiniteMdp:
    """Tabular MDP (S, A, P, rho0, T) plus per-state 2-D coordinates.

    transitions[s, a] is the distribution over next states. coords[s] is
    the point used for kernels, features and heatmap export; when not
    given, states are laid out on a line with unit spacing.

    Instances are treated as immutable after construction.
    """

    def __init__(self, transitions, init_dist, horizon, coords=None):
        self.transitions = np.asarray(transitions, dtype=float)
        self.init_dist = np.asarray(init_dist, dtype=float)
        self.horizon = int(horizon)
        if self.transitions.ndim != 3:
            raise ValueError("transitions must have shape (S, A, S), got %r"
                             % (self.transitions.shape,))
        self.n_states = int(self.transitions.shape[0])
        self.n_actions = int(self.transitions.shape[1])
        if coords is None:
            coords = np.column_stack([
                np.arange(self.n_states, dtype=float) + 0.5,
                np.full(self.n_states, 0.5),
            ])
        self.coords = np.asarray(coords, dtype=float)
        validate(self)


def validate(mdp):
    """Check every structural invariant; raises ValueError naming the first
    violation (state/action indices included)."""
    P = mdp.transitions
    if P.ndim != 3 or P.shape[2] != P.shape[0] or P.shape[0] < 1:
        raise ValueError("transitions must have shape (S, A, S), got %r" % (P.shape,))
    if mdp.horizon < 1:
        raise ValueError("horizon must be >= 1, got %d" % mdp.horizon)
    if not np.all(np.isfinite(P)):
        raise ValueError("transitions contain non-finite entries")
    neg = np.argwhere(P < 0)
    if len(neg):
        s, a, sp = neg[0]
        raise ValueError("negative transition probability at (s=%d, a=%d, s'=%d)"
                         % (s, a, sp))
    sums = P.sum(axis=2)
    bad = np.argwhere(np.abs(sums - 1.0) > STOCHASTIC_TOL)
    if len(bad):
        s, a = bad[0]
        raise ValueError("transition row (s=%d, a=%d) sums to %.17g, not 1"
                         % (s, a, sums[s, a]))
    if mdp.init_dist.shape != (mdp.n_states,):
        raise ValueError("init_dist must be a length-S vector")
    if np.any(mdp.init_dist < 0):
        s = int(np.argwhere(mdp.init_dist < 0)[0][0])
        raise ValueError("negative init_dist entry at state %d" % s)
    if abs(mdp.init_dist.sum() - 1.0) > STOCHASTIC_TOL:
        raise ValueError("init_dist sums to %.17g, not 1" % mdp.init_dist.sum())
    if mdp.coords.shape != (mdp.n_states, 2):
        raise ValueError("coords must have shape (S, 2)")


def build_gridworld(width, height, slip_prob=0.0, init_state=0, horizon=10):
    """Grid MDP with actions (right, up, left, down, stay).

    State s sits at column x = s % width, row y = s // width; coords are
    the cell centers (x + 0.5, y + 0.5). Moves off the edge stay in
    place. The intended action's effect happens with probability
    1 - slip_prob; the remainder is split evenly over the other four
    actions' effects.
    """
    if width < 1 or height < 1:
        raise ValueError("grid must have at least one cell")
    if not 0.0 <= slip_prob < 1.0:
        raise ValueError("slip_prob must lie in [0, 1)")
    n = width * height
    if not 0 <= init_state < n:
        raise ValueError("init_state %d outside [0, %d)" % (init_state, n))
    na = len(GRID_DELTAS)
    dest = np.empty((n, na), dtype=int)
    for s in range(n):
        x, y = s % width, s // width
        for a, (dx, dy) in enumerate(GRID_DELTAS):
            nx, ny = x + dx, y + dy
            if 0 <= nx < width and 0 <= ny < height:
                dest[s, a] = ny * width + nx
            else:
                dest[s, a] = s
    P = _rebuild_from_effects(dest, slip_prob)
    init = np.zeros(n)
    init[init_state] = 1.0
    xs = np.arange(n) % width
    ys = np.arange(n) // width
    coords = np.column_stack([xs + 0.5, ys + 0.5]).astype(float)
    return FiniteMdp(P, init, horizon, coords)


def _rebuild_from_effects(dest, slip_prob):
    """Transition table from per-(s, a) intended destinations.

    Slip mass lands on the other actions' destinations; collisions
    (several actions leading to the same cell) simply accumulate.
    """
    n, na = dest.shape
    P = np.zeros((n, na, n))
    for s in range(n):
        for a in range(na):
            P[s, a, dest[s, a]] += 1.0 - slip_prob
            for b in range(na):
                if b != a:
                    P[s, a, dest[s, b]] += slip_prob / (na - 1)
    return P


def modify_dynamics(mdp, action_remap=None, slip_override=None):
    """New MDP with remapped or degraded actions; everything else unchanged.

    action_remap maps action index -> replacement action index; the
    remapped action copies the replacement's transition rows. With
    slip_override, each row's intended effect (its argmax, which must
    carry probability > 0.5) is kept and the table is rebuilt at the new
    slip level. Remap applies before the slip rebuild.
    """
    P = mdp.transitions.copy()
    na = mdp.n_actions
    if action_remap:
        for a, b in action_remap.items():
            if not (0 <= a < na and 0 <= b < na):
                raise ValueError("action remap %r -> %r outside [0, %d)" % (a, b, na))
        src = P.copy()
        for a, b in action_remap.items():
            P[:, a, :] = src[:, b, :]
    if slip_override is not None:
        if not 0.0 <= slip_override < 1.0:
            raise ValueError("slip_override must lie in [0, 1)")
        if na < 2:
            raise ValueError("slip rebuild needs at least two actions")
        maxp = P.max(axis=2)
        low = np.argwhere(maxp <= 0.5)
        if len(low):
            s, a = low[0]
            raise ValueError(
                "cannot identify the intended effect of (s=%d, a=%d): "
                "max transition probability %.3f is not > 0.5" % (s, a, maxp[s, a]))
        P = _rebuild_from_effects(P.argmax(axis=2), slip_override)
    return FiniteMdp(P, mdp.init_dist.copy(), mdp.horizon, mdp.coords.copy())
