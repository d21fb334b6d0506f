import json

import pytest

import wellrl


def small_config(tmp_path):
    cfg = wellrl.load_config("case2-desk")
    cfg["grid"].update(nx=11, ny=11)
    cfg["scenarios"].update(samples=6, clusters=2)
    cfg["output_dir"] = str(tmp_path / "run")
    cfg["train"]["seeds"] = [1]
    cfg["ppo"]["total_episodes"] = 160
    cfg["de"].update(population=6, iterations=5)
    return cfg


def test_presets_round_trip():
    assert set(wellrl.preset_names()) == {"case1-desk", "case2-desk", "case1-full", "case2-full"}
    cfg = wellrl.load_config("case1-full")
    assert cfg["grid"]["nx"] == 61
    assert wellrl.load_config(cfg) == cfg


def test_missing_keys_are_named():
    cfg = wellrl.load_config("case2-desk")
    del cfg["distribution"]["sigma"]
    with pytest.raises(wellrl.ConfigError, match="distribution.sigma"):
        wellrl.load_config(cfg)


def test_environment_episode():
    cfg = wellrl.load_config("case2-desk")
    problem = wellrl.ReservoirProblem(cfg)
    fields = problem.sample_fields(cfg, 2, 3)
    env = wellrl.WellEnv(problem, fields, seed=5)
    assert (env.observation_dim, env.action_dim) == (9, 4)
    obs = env.reset_to(0)
    assert obs[:4] == [0.0] * 4
    total, done = 0.0, False
    while not done:
        obs, reward, done = env.step([1.0] * 4)
        assert 0.0 <= reward <= 1.0
        total += reward
    assert total == pytest.approx(wellrl.base_return(problem, fields[0]), abs=1e-12)
    assert sum(env.last_rates) == pytest.approx(0.0, abs=1e-9)


def test_gae_and_mds_and_kmeans():
    adv, ret = wellrl.compute_gae([1.0, 1.0], [0.0, 0.0], [0.0, 1.0], 5.0, 0.5, 1.0)
    assert adv == pytest.approx([1.5, 1.0])
    assert ret == pytest.approx([1.5, 1.0])
    import numpy as np

    pts = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 4.0], [3.0, 4.0]])
    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    x = wellrl.classical_mds(d)
    dx = np.linalg.norm(x[:, None] - x[None], axis=-1)
    assert np.allclose(dx, d, atol=1e-8)
    labels, centers, inertia = wellrl.kmeans(pts, 4, seed=1)
    assert sorted(labels) == [0, 1, 2, 3] and inertia == 0.0


def test_de_sphere():
    best, fit, hist = wellrl.de_optimize(lambda x: -sum((v - 0.5) ** 2 for v in x), [0.0] * 3, [1.0] * 3,
                                         population=12, iterations=120, seed=2)
    assert all(abs(v - 0.5) < 1e-2 for v in best)
    assert all(b >= a for a, b in zip(hist, hist[1:]))


def test_pipeline(tmp_path):
    cfg = small_config(tmp_path)
    assert wellrl.sample(cfg) is False
    assert wellrl.sample(cfg) is True
    wellrl.cluster(cfg)
    assert wellrl.train(cfg, "ppo") == ["train/ppo/seed_1", "summary/ppo"]
    assert wellrl.train(cfg, "ppo") == []
    wellrl.benchmark(cfg)
    wellrl.report(cfg)
    report = tmp_path / "run" / "report"
    header = (report / "recovery.csv").read_text().splitlines()[0]
    assert header == "eval_index,sample_id,base,ppo,de"
    manifest = json.loads((tmp_path / "run" / "run_manifest.json").read_text())
    assert manifest["stages"]["train/ppo/seed_1"]["simulations"] == 160
    assert wellrl.git_blob_sha1(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
    assert wellrl.git_blob_sha1(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"
