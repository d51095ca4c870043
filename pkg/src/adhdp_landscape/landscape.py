"""
Loss surfaces over PCA planes of weight snapshots, and TD trajectory series.

The four indices computed here:

* critic match loss over the PCA plane of end-of-episode critic weights,
* actor loss (frozen final critic as cost) over the PCA plane of actor weights,
* (time, TD, actor PC1) triples from the periodic actor samples,
* (state PC1, TD) pairs from the step log.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import agent
from . import nn
from . import pca
from .errors import ZeroVarianceError
from .recorder import subsample_probes

NETS = ("critic", "actor")


@dataclass
class LandscapeGrid:
    net: str
    alpha_axis: np.ndarray
    beta_axis: np.ndarray
    values: np.ndarray          # values[i, j] = loss(alpha_axis[i], beta_axis[j])
    finite: np.ndarray
    reference_loss: float
    trajectory: np.ndarray      # (n_snapshots, 2) plane coordinates
    basis: pca.PcaBasis


# =============================================================================
# Loss functions
# =============================================================================

def _split_probes(probes):
    probes = np.asarray(probes, dtype=float)
    if probes.ndim != 2 or len(probes) == 0:
        raise ValueError("probe set is empty")
    return probes[:, 1:11], probes[:, 11]


def critic_match_loss(critic, probes):
    """Mean squared gap between critic outputs and recorded TD targets.

    ``probes`` rows follow the ``probes.csv`` layout (step, state, action, y).
    """
    xu, y = _split_probes(probes)
    with np.errstate(all="ignore"):
        out, _ = nn.forward(critic, xu)
        r = out[:, 0] - y
        return float(np.mean(r * r))


def actor_surface_loss(actor, frozen_critic, states, u_max):
    """Mean frozen-critic cost of the actor's deterministic actions.

    ``frozen_critic`` is critic params, or any callable ``J(states, actions)``.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or len(states) == 0:
        raise ValueError("probe state set is empty")
    with np.errstate(all="ignore"):
        u = agent.policy(actor, states, u_max)
        if callable(frozen_critic):
            values = frozen_critic(states, u)
        else:
            values = agent.critic_value(frozen_critic, states, u)
        return float(np.mean(values))


def loss_function(run, cfg, net):
    """Build ``loss(flat_weights) -> float`` for one net of a recorded run."""
    a = cfg.analysis
    if net == "critic":
        layout = agent.critic_layout(cfg.agent.hidden_dims)
        n = min(a.n_ref, len(run.probes))
        probes = subsample_probes(run.probes, n, a.probe_seed)
        return lambda w: critic_match_loss(nn.MlpParams(layout, w), probes)
    if net == "actor":
        layout = agent.actor_layout(cfg.agent.hidden_dims)
        critic = nn.MlpParams(agent.critic_layout(cfg.agent.hidden_dims), run.snapshots["critic"][-1])
        n = min(a.n_actor_probes, len(run.probes))
        states = subsample_probes(run.probes, n, a.probe_seed)[:, 1:8]
        return lambda w: actor_surface_loss(nn.MlpParams(layout, w), critic, states, cfg.agent.u_max)
    raise ValueError(f"net must be one of {NETS}, got {net!r}")


# =============================================================================
# Grids
# =============================================================================

def symmetric_axis(radius, resolution):
    """``resolution`` evenly spaced points on [-radius, radius]; exact 0 at the center."""
    if resolution == 1:
        return np.zeros(1)
    half = (resolution - 1) / 2.0
    return radius * ((np.arange(resolution) - half) / half)


def evaluate_grid(loss, basis, reference, alpha_axis, beta_axis, order=None):
    """Loss at ``reference + a*pc1 + b*pc2`` for every grid node.

    ``order`` optionally permutes the flat node visiting order; nodes are
    independent so the result does not depend on it.
    """
    n_a, n_b = len(alpha_axis), len(beta_axis)
    values = np.empty((n_a, n_b))
    nodes = range(n_a * n_b) if order is None else order
    for flat in nodes:
        i, j = divmod(int(flat), n_b)
        values[i, j] = loss(pca.reconstruct(basis, alpha_axis[i], beta_axis[j], reference))
    return values


def plane_from_snapshots(snapshots, range_scale, resolution):
    """PCA plane, plane coordinates of the snapshots, and the two grid axes.

    The plane passes through the final snapshot. Each axis is symmetric about
    zero and reaches ``range_scale`` times the farthest snapshot along it.
    """
    W = np.asarray(snapshots, dtype=float)
    if len(W) < 3:
        raise ValueError(f"need at least 3 weight snapshots for a plane, got {len(W)}")
    try:
        basis = pca.fit_pca(W, 2)
    except ZeroVarianceError:
        raise ZeroVarianceError("weight snapshots never changed; train longer or with "
                                "non-zero learning rates to get a landscape plane") from None
    reference = W[-1]
    traj = (W - reference) @ basis.components.T
    extent = np.max(np.abs(traj), axis=0)
    if not extent[0] > 0:
        raise ZeroVarianceError("weight trajectory has no extent along the first principal direction")
    if not extent[1] > 0:
        extent[1] = extent[0]
    alpha = symmetric_axis(range_scale * extent[0], resolution)
    beta = symmetric_axis(range_scale * extent[1], resolution)
    return basis, reference, traj, alpha, beta


def build_landscape(run, cfg, net, resolution=None, range_scale=None, order=None):
    a = cfg.analysis
    resolution = a.resolution if resolution is None else resolution
    range_scale = a.range_scale if range_scale is None else range_scale
    basis, reference, traj, alpha, beta = plane_from_snapshots(run.snapshots[net], range_scale, resolution)
    loss = loss_function(run, cfg, net)
    values = evaluate_grid(loss, basis, reference, alpha, beta, order)
    return LandscapeGrid(net, alpha, beta, values, np.isfinite(values), loss(reference), traj, basis)


# =============================================================================
# TD series
# =============================================================================

def td_by_episode(run):
    """Per-episode mean |TD residual| from the step log."""
    episodes = run.column("episode").astype(int)
    td = np.abs(run.column("td"))
    out = []
    for ep in range(len(run.episodes)):
        sel = td[episodes == ep]
        out.append(float(np.mean(sel)) if sel.size else float("nan"))
    return np.array(out)


@dataclass
class ActorTdSeries:
    steps: np.ndarray
    time: np.ndarray
    td: np.ndarray
    pc1: np.ndarray
    ratio: float
    degenerate: bool
    basis: pca.PcaBasis = None


def actor_weight_td_time(run, dt):
    """(training time, TD, actor PC1) at every periodic actor sample.

    A frozen actor has no principal direction; its PC1 is reported as 0
    everywhere with ratio 0 and ``degenerate`` set.
    """
    if len(run.actor_sample_steps) == 0:
        raise ValueError("run has no periodic actor samples")
    steps = np.asarray(run.actor_sample_steps)
    td = run.column("td")[np.searchsorted(run.column("step"), steps)]
    time = steps * dt
    if len(steps) < 2:
        return ActorTdSeries(steps, time, td, np.zeros(len(steps)), 0.0, True)
    try:
        basis = pca.fit_pca(run.actor_samples, 1)
    except ZeroVarianceError:
        return ActorTdSeries(steps, time, td, np.zeros(len(steps)), 0.0, True)
    pc1 = pca.project(basis, run.actor_samples)[:, 0]
    return ActorTdSeries(steps, time, td, pc1, float(basis.explained_variance_ratio[0]), False, basis)


@dataclass
class StateTdSeries:
    steps: np.ndarray
    pc1: np.ndarray
    td: np.ndarray
    ratio: float
    basis: pca.PcaBasis = None


def state_td_map(run, stride=10):
    """(state PC1, TD) for every ``stride``-th logged step; PCA fit on all states."""
    states = run.states
    idx = np.arange(0, len(states), stride)
    td = run.column("td")[idx]
    steps = run.column("step")[idx].astype(np.int64)
    try:
        basis = pca.fit_pca(states, 1)
    except (ZeroVarianceError, ValueError):
        return StateTdSeries(steps, np.zeros(len(idx)), td, 0.0)
    pc1 = pca.project(basis, states[idx])[:, 0]
    return StateTdSeries(steps, pc1, td, float(basis.explained_variance_ratio[0]), basis)


# =============================================================================
# Analysis directory
# =============================================================================

def _r(v):
    return repr(float(v))


def _write_lines(path, header, rows):
    Path(path).write_text("\n".join([header] + rows) + "\n")


def write_landscape(grid, directory):
    d = Path(directory)
    rows = [f"{_r(a)},{_r(b)},{_r(grid.values[i, j])},{int(grid.finite[i, j])}"
            for i, a in enumerate(grid.alpha_axis) for j, b in enumerate(grid.beta_axis)]
    _write_lines(d / f"landscape_{grid.net}.csv", "alpha,beta,loss,finite", rows)
    rows = [f"{k},{_r(a)},{_r(b)}" for k, (a, b) in enumerate(grid.trajectory)]
    _write_lines(d / f"landscape_{grid.net}_trajectory.csv", "episode,alpha,beta", rows)
    pca.save_basis(grid.basis, d / f"pca_{grid.net}.bin")


def analyze(run, cfg, directory, resolution=None):
    """Compute all four indices of ``run`` and write them into ``directory``.

    Returns the metadata dict that is also written to ``pca_meta.txt``.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    meta = {}
    for net in NETS:
        grid = build_landscape(run, cfg, net, resolution=resolution)
        write_landscape(grid, d)
        ratios = grid.basis.explained_variance_ratio
        meta[f"{net}_pc1_ratio"] = ratios[0]
        meta[f"{net}_pc2_ratio"] = ratios[1]
        meta[f"{net}_reference_loss"] = grid.reference_loss
        meta[f"{net}_alpha_range"] = grid.alpha_axis[-1]
        meta[f"{net}_beta_range"] = grid.beta_axis[-1]

    by_ep = td_by_episode(run)
    _write_lines(d / "td_by_episode.csv", "episode,mean_abs_td",
                 [f"{k},{_r(v)}" for k, v in enumerate(by_ep)])

    series = actor_weight_td_time(run, cfg.env.dt)
    _write_lines(d / "time_td_actorpc1.csv", "step,time,td,actor_pc1",
                 [f"{s},{_r(t)},{_r(e)},{_r(p)}"
                  for s, t, e, p in zip(series.steps, series.time, series.td, series.pc1)])
    meta["actor_time_pc1_ratio"] = series.ratio
    meta["actor_time_degenerate"] = int(series.degenerate)
    if series.basis is not None:
        pca.save_basis(series.basis, d / "pca_actor_time.bin")

    smap = state_td_map(run, cfg.analysis.state_stride)
    _write_lines(d / "statepc1_td.csv", "step,state_pc1,td",
                 [f"{s},{_r(p)},{_r(e)}" for s, p, e in zip(smap.steps, smap.pc1, smap.td)])
    meta["state_pc1_ratio"] = smap.ratio
    if smap.basis is not None:
        pca.save_basis(smap.basis, d / "pca_state.bin")

    meta["n_ref"] = min(cfg.analysis.n_ref, len(run.probes))
    meta["n_actor_probes"] = min(cfg.analysis.n_actor_probes, len(run.probes))
    lines = [f"{k} = {v if isinstance(v, int) else _r(v)}" for k, v in meta.items()]
    (d / "pca_meta.txt").write_text("\n".join(lines) + "\n")
    return meta


def read_meta(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = (s.strip() for s in line.split("=", 1))
            out[k] = float(v)
    return out
