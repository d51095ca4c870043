"""Shared test utilities."""

import numpy as np

from adhdp_landscape import agent
from adhdp_landscape import dynamics as dyn

#: "criterion N: PASS|FAIL ..." lines, printed at the end of the session
ACCEPTANCE_LINES = []


def report(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def candidate_targets(x, candidates, nets, config, env):
    """TD target of each candidate action from state ``x`` (no smoothing noise)."""
    inertia = env.inertia_matrix()
    state = dyn.BodyState.from_vector(x)
    out = []
    for u in candidates:
        nxt = dyn.step(state, u, inertia, env.dt)
        cost = agent.scale_cost(dyn.step_cost(state, u, env.cost), config)
        terminal = dyn.check_termination(nxt, env.termination) is not None
        tr = agent.Transition(x, u, cost, nxt.as_vector(), terminal)
        out.append(agent.td_target(tr, nets, config, env.termination.penalty))
    return np.array(out)


def scaling_argmins(seed, n_candidates=16):
    """Greedy candidate index under cost scale 1 and under cost scale 10.

    The scaled problem uses the critic of the scaled value function, J / 10.
    """
    rng = np.random.default_rng(seed)
    env = agent.EnvConfig()
    base = agent.VariantConfig(gamma=0.95)
    scaled = agent.VariantConfig(gamma=0.95, cost_scale=10.0)
    nets = agent.make_nets(base, rng.integers(1 << 31))
    # perturb so instances differ beyond the init scheme
    nets.critic = nets.critic.with_weights(nets.critic.weights + rng.normal(0, 0.3, nets.critic.weights.size))
    nets_scaled = agent.AgentNets(nets.actor, agent.scale_critic(nets.critic, 10.0))
    axis = rng.normal(size=3)
    q = dyn.quat_from_axis_angle(axis, rng.uniform(0, 2.5))
    x = np.concatenate((q, rng.normal(0, 0.5, 3)))
    candidates = rng.uniform(-base.u_max, base.u_max, size=(n_candidates, 3))
    y1 = candidate_targets(x, candidates, nets, base, env)
    y10 = candidate_targets(x, candidates, nets_scaled, scaled, env)
    return int(np.argmin(y1)), int(np.argmin(y10)), y1, y10


def jacobi_eigh(A, tol=1e-15, max_sweeps=100):
    """Cyclic Jacobi eigen-solver for a small symmetric matrix; descending order."""
    A = np.array(A, dtype=float)
    n = len(A)
    V = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum((A - np.diag(np.diag(A))) ** 2))
        if off <= tol * max(1.0, np.abs(A).max()):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                R = np.eye(n)
                R[p, p] = R[q, q] = c
                R[p, q], R[q, p] = s, -s
                A = R.T @ A @ R
                V = V @ R
    vals = np.diag(A)
    order = np.argsort(vals)[::-1]
    return vals[order], V[:, order]


def pca_oracle(X, k):
    """Covariance eigendecomposition with the largest-entry-positive sign rule."""
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=0)
    vals, vecs = jacobi_eigh(Xc.T @ Xc / (len(X) - 1))
    vals = np.clip(vals, 0.0, None)
    comps = vecs[:, :k].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return comps, vals[:k] / vals.sum()
