"""
Training instrumentation and the on-disk run directory format.

A run directory holds::

    config               key = value text (includes format_version)
    steps.csv            one row per environment step
    episodes.csv         one row per episode
    probes.csv           (state, action, TD target) tuples sampled during training
    weights/<net>_<episode>.bin   end-of-episode flat weights, little-endian float64
    actor_samples.bin    periodic actor weights (header: uint64 count, uint64 dim;
                         then count int64 steps; then count*dim float64)

Floats are written with ``repr`` so every value reloads bit-exactly.
"""

import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

import numpy as np

from .errors import RunFormatError

FORMAT_VERSION = 1

STEP_COLUMNS = ("step", "episode", "time", "q0", "q1", "q2", "q3", "w1", "w2", "w3",
                "u1", "u2", "u3", "cost", "td", "terminal")
PROBE_COLUMNS = ("step", "q0", "q1", "q2", "q3", "w1", "w2", "w3", "u1", "u2", "u3", "y")
EPISODE_COLUMNS = ("episode", "steps", "mean_abs_td", "terminal_cause")
_INT_STEP_COLS = {0, 1, 15}
NETS = ("actor", "critic")


@dataclass
class EpisodeSummary:
    episode: int
    steps: int
    mean_abs_td: float
    terminal_cause: str


@dataclass
class RunRecord:
    """Everything one training run leaves behind for the analysis stage."""
    config_text: str = ""
    steps: np.ndarray = field(default_factory=lambda: np.zeros((0, len(STEP_COLUMNS))))
    probes: np.ndarray = field(default_factory=lambda: np.zeros((0, len(PROBE_COLUMNS))))
    snapshots: Dict[str, List[np.ndarray]] = field(default_factory=lambda: {n: [] for n in NETS})
    actor_sample_steps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    actor_samples: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    episodes: List[EpisodeSummary] = field(default_factory=list)

    def column(self, name):
        return self.steps[:, STEP_COLUMNS.index(name)]

    @property
    def states(self):
        return self.steps[:, 3:10]

    @property
    def actions(self):
        return self.steps[:, 10:13]

    @property
    def aborted(self):
        return bool(self.episodes) and self.episodes[-1].terminal_cause == "overflow"

    def __eq__(self, other):
        if not isinstance(other, RunRecord):
            return NotImplemented
        return (self.config_text == other.config_text
                and _same(self.steps, other.steps)
                and _same(self.probes, other.probes)
                and all(len(self.snapshots[n]) == len(other.snapshots[n])
                        and all(_same(a, b) for a, b in zip(self.snapshots[n], other.snapshots[n]))
                        for n in NETS)
                and _same(self.actor_sample_steps, other.actor_sample_steps)
                and _same(self.actor_samples, other.actor_samples)
                and self.episodes == other.episodes)


def _same(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.size == 0 and b.size == 0:
        return True
    return a.shape == b.shape and a.tobytes() == b.tobytes()


class Recorder:
    """Collects step logs, probes, actor samples and episode snapshots.

    ``record_step`` must be called with strictly increasing global steps.
    """

    def __init__(self, config_text="", actor_sample_period=100, probe_period=10, probe_cap=50_000,
                 on_episode=None):
        if actor_sample_period < 1 or probe_period < 1 or probe_cap < 0:
            raise ValueError("sampling periods must be >= 1 and probe_cap >= 0")
        self.config_text = config_text
        self.actor_sample_period = actor_sample_period
        self.probe_period = probe_period
        self.probe_cap = probe_cap
        self.on_episode = on_episode
        self._steps = []
        self._probes = []
        self._snapshots = {n: [] for n in NETS}
        self._sample_steps = []
        self._samples = []
        self._episodes = []
        self._episode_start = 0
        self._last_step = -1

    def record_step(self, step, episode, time, x, u, cost, td, terminal):
        if step <= self._last_step:
            raise ValueError(f"step {step} recorded after step {self._last_step}")
        self._last_step = step
        self._steps.append((step, episode, time, *x, *u, cost, td, 1 if terminal else 0))

    def maybe_record_probe(self, step, x, u, y):
        if step % self.probe_period == 0 and len(self._probes) < self.probe_cap:
            self.record_probe(step, x, u, y)

    def record_probe(self, step, x, u, y):
        self._probes.append((step, *x, *u, y))

    def maybe_sample_actor(self, step, weights):
        if step % self.actor_sample_period == 0:
            self._sample_steps.append(step)
            self._samples.append(np.array(weights, dtype=float))

    def snapshot_weights(self, episode, net, weights):
        snaps = self._snapshots[net]
        if episode != len(snaps):
            raise ValueError(f"{net} snapshot for episode {episode} out of order (have {len(snaps)})")
        snaps.append(np.array(weights, dtype=float))

    def end_episode(self, episode, steps, cause, nets):
        tds = [row[14] for row in self._steps[self._episode_start:]]
        mean_abs = float(np.mean(np.abs(tds))) if tds else 0.0
        self._episodes.append(EpisodeSummary(episode, steps, mean_abs, cause))
        self._episode_start = len(self._steps)
        self.snapshot_weights(episode, "actor", nets.actor.weights)
        self.snapshot_weights(episode, "critic", nets.critic.weights)
        if self.on_episode is not None:
            self.on_episode(self._episodes[-1])

    @property
    def record(self):
        samples = np.array(self._samples) if self._samples else np.zeros((0, 0))
        return RunRecord(
            config_text=self.config_text,
            steps=np.array(self._steps, dtype=float).reshape(-1, len(STEP_COLUMNS)),
            probes=np.array(self._probes, dtype=float).reshape(-1, len(PROBE_COLUMNS)),
            snapshots={n: list(v) for n, v in self._snapshots.items()},
            actor_sample_steps=np.array(self._sample_steps, dtype=np.int64),
            actor_samples=samples,
            episodes=list(self._episodes),
        )


def subsample_probes(probes, n, seed):
    """Seeded uniform subset of ``n`` probe rows, in original order."""
    m = len(probes)
    if n > m:
        raise ValueError(f"asked for {n} probes but only {m} were recorded")
    if n == m:
        return probes
    idx = np.sort(np.random.default_rng(seed).choice(m, size=n, replace=False))
    return probes[idx]


# =============================================================================
# Persistence
# =============================================================================

def _fmt(v, integer=False):
    return str(int(v)) if integer else repr(float(v))


def _write_csv(path, header, rows, int_cols=()):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v, i in int_cols) for i, v in enumerate(row)))
    Path(path).write_text("\n".join(lines) + "\n")


def _read_csv(path, header):
    path = Path(path)
    if not path.is_file():
        raise RunFormatError(f"missing run file {path}")
    lines = path.read_text().splitlines()
    if not lines or lines[0] != ",".join(header):
        raise RunFormatError(f"{path}: unexpected header {lines[0] if lines else '<empty>'!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise RunFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(parts)}")
        rows.append(parts)
    return rows


def _floats(path, rows, ncols):
    try:
        return np.array([[float(v) for v in r] for r in rows], dtype=float).reshape(-1, ncols)
    except ValueError as exc:
        raise RunFormatError(f"{path}: {exc}") from None


def write_weights(path, vec):
    Path(path).write_bytes(np.asarray(vec, dtype="<f8").tobytes())


def read_weights(path):
    path = Path(path)
    if not path.is_file():
        raise RunFormatError(f"missing weight file {path}")
    raw = path.read_bytes()
    if len(raw) % 8:
        raise RunFormatError(f"{path}: length {len(raw)} is not a multiple of 8")
    return np.frombuffer(raw, dtype="<f8").astype(float)


def save_run(record, directory):
    d = Path(directory)
    (d / "weights").mkdir(parents=True, exist_ok=True)
    (d / "config").write_text(record.config_text)
    _write_csv(d / "steps.csv", STEP_COLUMNS, record.steps, _INT_STEP_COLS)
    _write_csv(d / "probes.csv", PROBE_COLUMNS, record.probes, {0})
    lines = [",".join(EPISODE_COLUMNS)]
    lines += [f"{e.episode},{e.steps},{e.mean_abs_td!r},{e.terminal_cause}" for e in record.episodes]
    (d / "episodes.csv").write_text("\n".join(lines) + "\n")

    for old in (d / "weights").glob("*.bin"):
        old.unlink()
    for net in NETS:
        for ep, vec in enumerate(record.snapshots[net]):
            write_weights(d / "weights" / f"{net}_{ep:04d}.bin", vec)

    n, dim = record.actor_samples.shape if record.actor_samples.size else (0, 0)
    blob = (np.array([n, dim], dtype="<u8").tobytes()
            + np.asarray(record.actor_sample_steps, dtype="<i8").tobytes()
            + np.asarray(record.actor_samples, dtype="<f8").tobytes())
    (d / "actor_samples.bin").write_bytes(blob)


_WEIGHT_NAME = re.compile(r"^(actor|critic)_(\d+)\.bin$")


def load_run(directory):
    d = Path(directory)
    if not d.is_dir():
        raise RunFormatError(f"run directory {d} does not exist")
    cfg = d / "config"
    if not cfg.is_file():
        raise RunFormatError(f"missing run file {cfg}")
    record = RunRecord(config_text=cfg.read_text())

    record.steps = _floats(d / "steps.csv", _read_csv(d / "steps.csv", STEP_COLUMNS), len(STEP_COLUMNS))
    record.probes = _floats(d / "probes.csv", _read_csv(d / "probes.csv", PROBE_COLUMNS), len(PROBE_COLUMNS))
    for lineno, r in enumerate(_read_csv(d / "episodes.csv", EPISODE_COLUMNS), start=2):
        try:
            record.episodes.append(EpisodeSummary(int(r[0]), int(r[1]), float(r[2]), r[3]))
        except ValueError as exc:
            raise RunFormatError(f"{d / 'episodes.csv'}:{lineno}: {exc}") from None

    found = {n: {} for n in NETS}
    wdir = d / "weights"
    if not wdir.is_dir():
        raise RunFormatError(f"missing weights directory {wdir}")
    for name in sorted(os.listdir(wdir)):
        m = _WEIGHT_NAME.match(name)
        if m:
            found[m.group(1)][int(m.group(2))] = read_weights(wdir / name)
    for net in NETS:
        eps = sorted(found[net])
        if eps != list(range(len(eps))):
            raise RunFormatError(f"{wdir}: {net} snapshots are not contiguous from episode 0")
        record.snapshots[net] = [found[net][e] for e in eps]

    path = d / "actor_samples.bin"
    if not path.is_file():
        raise RunFormatError(f"missing run file {path}")
    raw = path.read_bytes()
    if len(raw) < 16:
        raise RunFormatError(f"{path}: truncated header")
    n, dim = (int(v) for v in np.frombuffer(raw[:16], dtype="<u8"))
    if len(raw) != 16 + 8 * n + 8 * n * dim:
        raise RunFormatError(f"{path}: size {len(raw)} does not match header ({n} x {dim})")
    record.actor_sample_steps = np.frombuffer(raw[16:16 + 8 * n], dtype="<i8").astype(np.int64)
    samples = np.frombuffer(raw[16 + 8 * n:], dtype="<f8").astype(float)
    record.actor_samples = samples.reshape(n, dim) if n else np.zeros((0, 0))
    return record
