"""Train -> analyze -> plot -> compare, operating on run directories."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import agent, landscape, plotting
from .config import dump_config, parse_config
from .errors import NumericOverflowError, RunFormatError
from .recorder import Recorder, load_run, save_run

INDEX_FILES = ("landscape_critic.csv", "landscape_actor.csv", "time_td_actorpc1.csv", "statepc1_td.csv")
FIGURE_FILES = ("landscape_critic.svg", "landscape_actor.svg", "time_td_actorpc1.svg", "statepc1_td.svg",
                "states_quaternion.svg", "states_omega.svg", "states_torque.svg")


class PartialRun(Exception):
    """Training aborted on a numeric failure; the partial run was saved."""

    def __init__(self, run_dir, cause):
        super().__init__(f"training aborted ({cause}); partial run saved to {run_dir}")
        self.run_dir = run_dir
        self.cause = cause


def train_run(cfg, out_dir, echo=print):
    """Train with ``cfg`` and persist the run to ``out_dir``.

    Raises :class:`PartialRun` (after saving) if training hit a numeric failure.
    """
    out_dir = Path(out_dir)

    def report(s):
        echo(f"episode {s.episode:4d}  steps {s.steps:5d}  mean|TD| {s.mean_abs_td:10.4f}  "
             f"end {s.terminal_cause}")

    rec = Recorder(dump_config(cfg), cfg.recorder.actor_sample_period, cfg.recorder.probe_period,
                   cfg.recorder.probe_cap, on_episode=report if echo else None)
    try:
        agent.train(cfg.agent, cfg.env, cfg.seed, rec)
    except NumericOverflowError as exc:
        save_run(rec.record, out_dir)
        raise PartialRun(out_dir, str(exc)) from exc
    save_run(rec.record, out_dir)
    return out_dir


def run_config(run_dir):
    path = Path(run_dir) / "config"
    if not path.is_file():
        raise RunFormatError(f"missing run file {path}")
    return parse_config(path.read_text(), source=str(path))


def analyze_run(run_dir, resolution=None):
    run_dir = Path(run_dir)
    cfg = run_config(run_dir)
    run = load_run(run_dir)
    return landscape.analyze(run, cfg, run_dir / "analysis", resolution=resolution)


def plot_run(run_dir, log_scale=False, contours=10, size=plotting.DEFAULT_SIZE):
    """Render the seven figures of an analyzed run into ``<run>/figures``."""
    run_dir = Path(run_dir)
    a, figs = run_dir / "analysis", run_dir / "figures"
    missing = [f for f in INDEX_FILES if not (a / f).is_file()]
    if missing:
        raise RunFormatError(f"{run_dir} has not been analyzed (missing {', '.join(missing)}); "
                             f"run `adhdp-landscape analyze {run_dir}` first")
    steps_csv = run_dir / "steps.csv"
    if not steps_csv.is_file():
        raise RunFormatError(f"missing run file {steps_csv}")
    last_episode = int(np.loadtxt(steps_csv, delimiter=",", skiprows=1, usecols=1, ndmin=1)[-1])

    def spec(kind, name, **kw):
        return plotting.FigureSpec(kind, a / name, figs / name.replace(".csv", ".svg"),
                                   contours=contours, size=size, **kw)

    out = []
    for net, title in (("critic", "Critic match loss landscape"), ("actor", "Actor loss landscape")):
        s = spec("heatmap", f"landscape_{net}.csv", title=title,
                 overlay_path=a / f"landscape_{net}_trajectory.csv",
                 log_scale=log_scale and net == "critic")
        out.append(plotting.render_heatmap(s.input_path, s))
    s = spec("trajectory3d", "time_td_actorpc1.csv", title="Time / TD / actor weight PC1",
             x_column="time", y_columns=("td",), z_column="actor_pc1",
             xlabel="time [s]", ylabel="TD", zlabel="actor PC1")
    out.append(plotting.render_traj3d(s.input_path, s))
    s = spec("scatter", "statepc1_td.csv", title="State PC1 vs TD", x_column="state_pc1",
             y_columns=("td",), xlabel="state PC1", ylabel="TD")
    out.append(plotting.render_scatter(s.input_path, s))

    for name, cols, ylabel in (("quaternion", ("q0", "q1", "q2", "q3"), "quaternion"),
                               ("omega", ("w1", "w2", "w3"), "angular velocity [rad/s]"),
                               ("torque", ("u1", "u2", "u3"), "control torque [N m]")):
        s = plotting.FigureSpec("line", steps_csv, figs / f"states_{name}.svg", x_column="time",
                                y_columns=cols, xlabel="time [s]", ylabel=ylabel,
                                title=f"Final episode ({last_episode}) {name}",
                                select=("episode", last_episode), size=size)
        out.append(plotting.render_line(steps_csv, s))
    return out


@dataclass
class RunSummary:
    name: str
    episodes: int
    final_mean_abs_td: float
    actor_pc1_ratio: float
    mean_steps: float
    total_steps: int
    saturation: float
    aborted: bool


def saturation_fraction(actions, u_max):
    actions = np.asarray(actions, dtype=float)
    if len(actions) == 0:
        return 0.0
    return float(np.mean(np.any(np.abs(actions) >= 0.99 * u_max, axis=1)))


def summarize_run(run_dir):
    run_dir = Path(run_dir)
    meta_path = run_dir / "analysis" / "pca_meta.txt"
    if not meta_path.is_file():
        raise RunFormatError(f"{run_dir} has not been analyzed; run `adhdp-landscape analyze {run_dir}` first")
    cfg = run_config(run_dir)
    run = load_run(run_dir)
    meta = landscape.read_meta(meta_path)
    eps = run.episodes
    return RunSummary(
        name=run_dir.name,
        episodes=len(eps),
        final_mean_abs_td=eps[-1].mean_abs_td if eps else float("nan"),
        actor_pc1_ratio=meta["actor_time_pc1_ratio"],
        mean_steps=float(np.mean([e.steps for e in eps])) if eps else 0.0,
        total_steps=len(run.steps),
        saturation=saturation_fraction(run.actions, cfg.agent.u_max),
        aborted=run.aborted,
    )


COMPARE_COLUMNS = ("run", "episodes", "final_mean_abs_td", "actor_pc1_ratio", "mean_steps",
                   "total_steps", "saturation_fraction", "aborted")


def compare_table(summaries):
    """(plain-text table, csv text) for a list of :class:`RunSummary`."""
    rows = [(s.name, str(s.episodes), f"{s.final_mean_abs_td:.6g}", f"{s.actor_pc1_ratio:.6f}",
             f"{s.mean_steps:.1f}", str(s.total_steps), f"{s.saturation:.4f}", "yes" if s.aborted else "no")
            for s in summaries]
    widths = [max(len(c), *(len(r[k]) for r in rows)) if rows else len(c)
              for k, c in enumerate(COMPARE_COLUMNS)]
    fmt_row = lambda r: "  ".join(v.ljust(w) if k == 0 else v.rjust(w)  # noqa: E731
                                  for k, (v, w) in enumerate(zip(r, widths)))
    text = [fmt_row(COMPARE_COLUMNS), "  ".join("-" * w for w in widths)] + [fmt_row(r) for r in rows]
    csv = [",".join(COMPARE_COLUMNS)] + [",".join(r) for r in rows]
    return "\n".join(text) + "\n", "\n".join(csv) + "\n"
