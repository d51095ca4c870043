"""
Action-dependent heuristic dynamic programming (ADHDP) on the attitude plant.

The critic ``J(x, u)`` regresses a bootstrapped cost-to-go target; the actor
is pushed downhill on ``J(x, pi(x))`` through the critic's input gradient.
Four stabilizer combinations are shipped as presets (see :data:`VARIANT_FLAGS`).
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dynamics as dyn
from . import nn
from .errors import NumericOverflowError

#: (target network, numeric cost scaling, Huber critic loss, target-policy smoothing)
VARIANT_FLAGS = {
    "variant1": (False, False, False, False),
    "variant2": (True, False, False, False),
    "variant3": (True, True, True, True),
    "variant4": (True, True, True, False),
}

VARIANT_TITLES = {
    "variant1": "Basic ADHDP",
    "variant2": "ADHDP with target network",
    "variant3": "ADHDP with training stabilizers + TPS",
    "variant4": "ADHDP with training stabilizers",
}


@dataclass(frozen=True)
class VariantConfig:
    use_target_network: bool = False
    tau_target: float = 0.005
    cost_scale: float = 1.0
    use_huber: bool = False
    kappa_huber: float = 1.0
    use_tps: bool = False
    sigma_tps: float = 0.05
    gamma: float = 0.95
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    actor_update_period: int = 1
    actor_freeze_steps: int = 0
    noise_init: float = 0.02
    noise_final: float = 0.005
    noise_decay_steps: int = 50_000
    l2_actor: float = 0.0
    clip_norm: float = 1.0
    u_max: float = 0.5
    hidden_dims: tuple = (64, 64)

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0.0 < self.tau_target <= 1.0:
            raise ValueError(f"tau_target must lie in (0, 1], got {self.tau_target}")
        if not self.cost_scale > 0:
            raise ValueError("cost_scale must be positive")
        if not self.kappa_huber > 0 or not self.u_max > 0 or not self.clip_norm > 0:
            raise ValueError("kappa_huber, u_max and clip_norm must be positive")
        if min(self.actor_lr, self.critic_lr, self.sigma_tps, self.noise_init,
               self.noise_final, self.l2_actor) < 0:
            raise ValueError("learning rates, noise levels and l2 must be non-negative")
        if self.actor_update_period < 1 or self.actor_freeze_steps < 0 or self.noise_decay_steps < 0:
            raise ValueError("invalid actor schedule or noise decay length")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))

    @property
    def flags(self):
        return (self.use_target_network, self.cost_scale != 1.0, self.use_huber, self.use_tps)


def variant_preset(name):
    """Paper-scale agent settings for ``variant1`` .. ``variant4``."""
    if name not in VARIANT_FLAGS:
        raise KeyError(f"unknown variant {name!r}; choose from {sorted(VARIANT_FLAGS)}")
    if name == "variant1":
        return VariantConfig()
    target, scaling, huber_loss, tps = VARIANT_FLAGS[name]
    return VariantConfig(
        use_target_network=target,
        cost_scale=10.0 if scaling else 1.0,
        use_huber=huber_loss,
        use_tps=tps,
        actor_update_period=10,
        actor_freeze_steps=10_000,
        noise_init=0.05,
        noise_final=0.02,
        l2_actor=0.1,
    )


@dataclass(frozen=True)
class EnvConfig:
    inertia: tuple = tuple(dyn.DEFAULT_INERTIA.ravel())
    dt: float = 0.01
    steps_per_episode: int = 5000
    episodes: int = 100
    initial_axis: tuple = dyn.DEFAULT_INITIAL_AXIS
    initial_angle_deg: float = dyn.DEFAULT_INITIAL_ANGLE_DEG
    initial_omega: tuple = (0.0, 0.0, 0.0)
    cost: dyn.CostWeights = field(default_factory=dyn.CostWeights)
    termination: dyn.TerminationRule = field(default_factory=dyn.TerminationRule)

    def __post_init__(self):
        for name in ("inertia", "initial_axis", "initial_omega"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not self.dt > 0 or self.steps_per_episode < 1 or self.episodes < 1:
            raise ValueError("dt, steps_per_episode and episodes must be positive")
        dyn.InertiaMatrix(np.reshape(self.inertia, (3, 3)))

    def inertia_matrix(self):
        return dyn.InertiaMatrix(np.reshape(self.inertia, (3, 3)))

    def initial_state(self):
        return dyn.initial_state(self.initial_axis, self.initial_angle_deg, self.initial_omega)


# =============================================================================
# Networks
# =============================================================================

@dataclass
class AgentNets:
    actor: nn.MlpParams
    critic: nn.MlpParams
    target_critic: Optional[nn.MlpParams] = None

    @property
    def bootstrap_critic(self):
        return self.target_critic if self.target_critic is not None else self.critic


def actor_layout(hidden_dims=(64, 64)):
    return nn.MlpLayout(dyn.STATE_DIM, hidden_dims, dyn.ACTION_DIM, "tanh", "tanh")


def critic_layout(hidden_dims=(64, 64)):
    return nn.MlpLayout(dyn.STATE_DIM + dyn.ACTION_DIM, hidden_dims, 1, "tanh", "identity")


def make_nets(config, seed):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    a_seed, c_seed = ss.spawn(2)
    actor = nn.init(actor_layout(config.hidden_dims), a_seed)
    critic = nn.init(critic_layout(config.hidden_dims), c_seed)
    target = critic.copy() if config.use_target_network else None
    return AgentNets(actor, critic, target)


def policy(actor, x, u_max):
    """Deterministic action ``u_max * tanh-head(actor(x))``; works on batches."""
    out, _ = nn.forward(actor, x)
    return u_max * out


def critic_value(critic, x, u):
    xu = np.concatenate((x, u), axis=-1)
    out, _ = nn.forward(critic, xu)
    return out[..., 0]


# =============================================================================
# Per-step pieces
# =============================================================================

def noise_sigma(step, config):
    """Exploration std: linear from noise_init to noise_final, then constant."""
    if config.noise_decay_steps == 0 or step >= config.noise_decay_steps:
        return config.noise_final
    frac = step / config.noise_decay_steps
    return config.noise_init + frac * (config.noise_final - config.noise_init)


def select_action(actor, x, step, config, rng):
    u = policy(actor, x, config.u_max)
    sigma = noise_sigma(step, config)
    if sigma > 0:
        u = u + rng.normal(0.0, sigma, size=u.shape)
    return np.clip(u, -config.u_max, config.u_max)


def scale_cost(c, config):
    return c / config.cost_scale


@dataclass
class Transition:
    x: np.ndarray
    u: np.ndarray
    cost: float          # already scaled
    x_next: np.ndarray
    terminal: bool


def td_target(tr, nets, config, penalty, rng=None):
    """Bootstrapped critic target for one transition.

    Terminal transitions get the scaled penalty instead of a bootstrap term.
    """
    if tr.terminal:
        return tr.cost + penalty / config.cost_scale
    u_next = policy(nets.actor, tr.x_next, config.u_max)
    if config.use_tps:
        u_next = u_next + rng.normal(0.0, config.sigma_tps * config.u_max, size=u_next.shape)
    u_next = np.clip(u_next, -config.u_max, config.u_max)
    return tr.cost + config.gamma * float(critic_value(nets.bootstrap_critic, tr.x_next, u_next))


def td_error(r, J_t, J_prev, gamma):
    """Backward-indexed TD error ``(r + gamma J_t) - J_prev``."""
    return (r + gamma * J_t) - J_prev


def critic_update(nets, tr, y, config):
    """One gradient step of the critic toward target ``y``.

    Returns the residual ``e = J(x, u) - y`` measured before the step.
    """
    xu = np.concatenate((tr.x, tr.u))
    out, cache = nn.forward(nets.critic, xu)
    e = float(out[0]) - y
    if not np.isfinite(e):
        raise NumericOverflowError(f"critic residual is non-finite (prediction {out[0]}, target {y})",
                                   component="critic")
    if config.use_huber:
        _, slope = nn.huber(e, config.kappa_huber)
    else:
        _, slope = nn.mse(e)
    if slope != 0.0:
        grad, _ = nn.backward(nets.critic, cache, np.array([slope]))
        nets.critic = nn.sgd_step(nets.critic, grad, config.critic_lr, config.clip_norm)
    return e


def actor_is_due(step, config):
    return step >= config.actor_freeze_steps and step % config.actor_update_period == 0


def critic_action_grad(critic, x, u):
    """dJ/du of the critic at ``(x, u)``; batched inputs give batched gradients."""
    xu = np.concatenate((x, u), axis=-1)
    out, cache = nn.forward(critic, xu)
    _, dxu = nn.backward(critic, cache, np.ones_like(out))
    return dxu[..., dyn.STATE_DIM:]


def actor_gradient(actor, x, u_max, action_grad):
    """Gradient of ``J(x, pi(x))`` w.r.t. the actor weights.

    ``action_grad(x, u)`` supplies dJ/du; the critic itself is not updated.
    """
    a_out, cache = nn.forward(actor, x)
    du = action_grad(x, u_max * a_out)
    grad, _ = nn.backward(actor, cache, u_max * du)
    return grad


def actor_update(nets, x, step, config):
    """Deterministic policy-gradient step through the critic, when the schedule allows."""
    if not actor_is_due(step, config) or config.actor_lr == 0:
        return False
    critic = nets.critic
    grad = actor_gradient(nets.actor, x, config.u_max, lambda xx, uu: critic_action_grad(critic, xx, uu))
    nets.actor = nn.sgd_step(nets.actor, grad, config.actor_lr, config.clip_norm, config.l2_actor)
    return True


def polyak(target, online, tau):
    if target.layout != online.layout:
        raise ValueError("target and online networks have different layouts")
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    if tau == 1.0:
        return online.copy()
    return target.with_weights((1.0 - tau) * target.weights + tau * online.weights)


def scale_critic(critic, factor):
    """Critic whose output is ``J / factor`` (last layer scaled)."""
    w = critic.weights.copy()
    n_out, n_in = critic.layout.shapes[-1]
    w[-(n_out * n_in + n_out):] /= factor
    return critic.with_weights(w)


# =============================================================================
# Training loop
# =============================================================================

def train(config, env, seed, recorder):
    """Run the full online training loop, streaming everything to ``recorder``.

    Raises :class:`NumericOverflowError` after closing the recorder's partial
    episode, so the caller can still persist what was collected.
    """
    inertia = env.inertia_matrix()
    seeds = np.random.SeedSequence(seed).spawn(3)
    nets = make_nets(config, seeds[0])
    explore_rng = np.random.default_rng(seeds[1])
    tps_rng = np.random.default_rng(seeds[2])
    # zero learning rates disable updates entirely
    critic_lr_on = config.critic_lr > 0

    global_step = 0
    for episode in range(env.episodes):
        state = env.initial_state()
        x = state.as_vector()
        cause = "limit"
        steps_done = 0
        try:
            for t in range(env.steps_per_episode):
                u = select_action(nets.actor, x, global_step, config, explore_rng)
                state_next = dyn.step(state, u, inertia, env.dt)
                raw_cost = dyn.step_cost(state, u, env.cost)
                ended = dyn.check_termination(state_next, env.termination)
                x_next = state_next.as_vector()
                tr = Transition(x, u, scale_cost(raw_cost, config), x_next, ended is not None)
                y = td_target(tr, nets, config, env.termination.penalty, tps_rng)
                if critic_lr_on:
                    e = critic_update(nets, tr, y, config)
                else:
                    e = float(critic_value(nets.critic, x, u)) - y
                    if not np.isfinite(e):
                        raise NumericOverflowError("critic residual is non-finite", component="critic")
                if nets.target_critic is not None:
                    nets.target_critic = polyak(nets.target_critic, nets.critic, config.tau_target)
                actor_update(nets, x, global_step, config)

                recorder.record_step(global_step, episode, t * env.dt, x, u, tr.cost, e, tr.terminal)
                recorder.maybe_record_probe(global_step, x, u, y)
                recorder.maybe_sample_actor(global_step, nets.actor.weights)
                global_step += 1
                steps_done = t + 1
                state, x = state_next, x_next
                if ended is not None:
                    cause = ended
                    break
        except NumericOverflowError:
            recorder.end_episode(episode, steps_done, "overflow", nets)
            raise
        recorder.end_episode(episode, steps_done, cause, nets)
    return recorder.record

