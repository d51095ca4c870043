import numpy as np
import pytest

from adhdp_landscape import agent
from adhdp_landscape.errors import RunFormatError
from adhdp_landscape.recorder import STEP_COLUMNS, Recorder, load_run, save_run, subsample_probes


def small_run(episodes=3, steps=40):
    cfg = agent.VariantConfig(use_target_network=True, hidden_dims=(8,))
    env = agent.EnvConfig(episodes=episodes, steps_per_episode=steps)
    rec = Recorder("seed = 1\n", actor_sample_period=7, probe_period=3)
    return agent.train(cfg, env, 1, rec)


def test_empty_run():
    r = Recorder().record
    assert r.steps.shape == (0, len(STEP_COLUMNS)) and len(r.probes) == 0
    assert r.snapshots == {"actor": [], "critic": []} and not r.aborted


def test_out_of_order_step_rejected():
    rec = Recorder()
    rec.record_step(5, 0, 0.0, np.zeros(7), np.zeros(3), 0.0, 0.0, False)
    with pytest.raises(ValueError):
        rec.record_step(5, 0, 0.0, np.zeros(7), np.zeros(3), 0.0, 0.0, False)


def test_one_snapshot_pair_per_episode():
    run = small_run(episodes=4)
    assert len(run.snapshots["actor"]) == len(run.snapshots["critic"]) == 4
    assert len({len(s) for s in run.snapshots["critic"]}) == 1


def test_episode_mean_abs_td_matches_steps():
    run = small_run()
    ep = run.column("episode")
    for summary in run.episodes:
        sel = np.abs(run.column("td")[ep == summary.episode])
        assert summary.mean_abs_td == pytest.approx(float(np.mean(sel)), abs=1e-12)
        assert summary.steps == sel.size


def test_probes_are_recorded_pairs():
    run = small_run()
    steps = run.column("step").astype(int)
    for row in run.probes:
        i = np.searchsorted(steps, int(row[0]))
        np.testing.assert_array_equal(row[1:11], run.steps[i, 3:13])


def test_save_load_roundtrip(tmp_path):
    run = small_run()
    save_run(run, tmp_path / "r")
    back = load_run(tmp_path / "r")
    assert back == run
    header = (tmp_path / "r" / "steps.csv").read_text().splitlines()[0]
    assert header == "step,episode,time,q0,q1,q2,q3,w1,w2,w3,u1,u2,u3,cost,td,terminal"


def test_weight_file_length(tmp_path):
    run = small_run(episodes=1)
    save_run(run, tmp_path)
    n_critic = (10 + 1) * 8 + (8 + 1) * 1
    assert (tmp_path / "weights" / "critic_0000.bin").stat().st_size == 8 * n_critic
    assert (tmp_path / "weights" / "actor_0000.bin").stat().st_size == 8 * ((7 + 1) * 8 + (8 + 1) * 3)


def test_missing_file_named(tmp_path):
    save_run(small_run(episodes=1), tmp_path)
    (tmp_path / "probes.csv").unlink()
    with pytest.raises(RunFormatError, match="probes.csv"):
        load_run(tmp_path)


def test_corrupt_actor_samples_named(tmp_path):
    save_run(small_run(episodes=1), tmp_path)
    p = tmp_path / "actor_samples.bin"
    p.write_bytes(p.read_bytes()[:-3])
    with pytest.raises(RunFormatError, match="actor_samples.bin"):
        load_run(tmp_path)


def test_subsample():
    probes = np.arange(50_000 * 2, dtype=float).reshape(-1, 2)
    sub = subsample_probes(probes, 512, 0)
    assert len(np.unique(sub[:, 0])) == 512
    assert np.all(np.diff(sub[:, 0]) > 0)
    np.testing.assert_array_equal(sub, subsample_probes(probes, 512, 0))
    assert subsample_probes(probes[:10], 10, 3) is not None
    np.testing.assert_array_equal(subsample_probes(probes[:10], 10, 3), probes[:10])
    with pytest.raises(ValueError):
        subsample_probes(probes[:10], 11, 0)
