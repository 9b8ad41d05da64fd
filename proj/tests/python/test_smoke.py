"""End-to-end smoke tests for the python bindings."""

import math

import pytest

import insyn


@pytest.fixture(scope="module")
def scene():
    return insyn.generate_scene(kind="mixed", steps=24, noise=0.02, seed=7, groups=3)


@pytest.fixture(scope="module")
def windows(scene):
    raw = insyn.window_scene(scene, radius=2.0, scene_id="smoke")
    normalized, stats = insyn.normalize_windows(raw)
    return normalized, stats


def test_scene_queries(scene):
    assert scene.num_steps == 24
    assert scene.dt == pytest.approx(0.4)
    peds = scene.pedestrians
    assert len(peds) >= 2
    x, y = scene.position(peds[0], 0)
    assert math.isfinite(x) and math.isfinite(y)
    for ped, (nx, ny) in scene.neighbors(0, peds[0], radius=2.0):
        assert ped != peds[0]
        assert math.hypot(nx - x, ny - y) <= 2.0


def test_region_partition():
    assert insyn.region_of((0, 0), (-1, 1)) == "LU"
    assert insyn.region_of((0, 0), (0, 1)) == "RU"
    assert insyn.region_of((0, 0), (1, 0)) == "RD"
    assert insyn.region_of((0, 0), (0, -1)) == "LD"
    with pytest.raises(insyn.InsynError):
        insyn.region_of((1, 1), (1, 1))


def test_walking_states(scene):
    agent = scene.pedestrians[0]
    states = insyn.walking_states(scene, agent, 0, 8, radius=2.0)
    assert len(states) == 8
    for (_, slots) in states:
        assert len(slots) == 4
        for state, dist in slots:
            assert state in (0, 1, 2)
            if state == 0:
                assert dist == insyn.LARGE_DISTANCE


def test_scenario_label_oracle():
    for kind in ("lone", "insync", "headon", "crossing", "mixed"):
        assert insyn.verify_scenario_labels(kind, steps=24, seed=3) == 0


def test_windows(windows):
    normalized, stats = windows
    assert len(normalized) > 0
    w = normalized[0]
    assert w.normalized
    assert len(w.obs_positions) == insyn.OBS_STEPS
    assert len(w.future) == insyn.FUTURE_STEPS
    assert w.obs_positions[0] == (0.0, 0.0)
    for step in w.interaction:
        for _, dist in step:
            assert 0.0 <= dist <= 1.0
    turned = insyn.rotate_window(w, 1)
    assert insyn.rotate_window(turned, 3).obs_positions == w.obs_positions


def test_metrics():
    truth = [(float(t), 0.0) for t in range(insyn.FUTURE_STEPS)]
    offset = [(x + 0.3, y + 0.4) for x, y in truth]
    assert insyn.ade(offset, truth) == pytest.approx(0.5)
    assert insyn.fde((0, 0), (1, 1)) == pytest.approx(math.sqrt(2))
    assert insyn.ide((0.06, 0.08), (0, 0)) == pytest.approx(0.1)

    result = insyn.best_of_k([offset, truth], truth)
    assert result["best_index"] == 1
    assert result["ade"] == 0.0


def test_train_evaluate_roundtrip(tmp_path, windows):
    normalized, stats = windows
    models = insyn.train(
        normalized,
        stats,
        epochs=2,
        batch_size=8,
        lr_generator=1e-3,
        clip=0.0,
        seed=5,
        model_dim=16,
        heads=2,
        enc_layers=1,
        dec_layers=1,
        ffn_dim=24,
        neighbor_hidden=8,
        cvae_hidden=12,
        cvae_latent=6,
    )
    assert any(term == "total" for _, _, term, _ in models.loss_curve)

    w = normalized[0]
    traj = models.decode(w, w.goal)
    assert len(traj) == insyn.FUTURE_STEPS
    assert traj[-1] == w.goal

    goals = models.sample(w, k=5, seed=9)
    assert len(goals) == 5
    assert goals == models.sample(w, k=5, seed=9)

    report = models.evaluate(normalized[:4], k=3, seed=1)
    assert report["mean_ade"] >= 0.0
    assert len(report["rows"]) == 4

    oracle = models.evaluate(normalized[:4], k=2, seed=1, oracle=True)
    assert oracle["mean_ade"] == 0.0

    path = str(tmp_path / "smoke.ckpt")
    models.save(path)
    loaded = insyn.load(path)
    reloaded_traj = loaded.decode(w, w.goal)
    # float32 checkpoint round-trip keeps the decode close
    for (ax, ay), (bx, by) in zip(traj, reloaded_traj):
        assert ax == pytest.approx(bx, abs=1e-4)
        assert ay == pytest.approx(by, abs=1e-4)


def test_ingest_roundtrip(tmp_path, scene):
    raw = tmp_path / "raw.txt"
    lines = []
    for ped in scene.pedestrians:
        for step in range(scene.num_steps):
            x, y = scene.position(ped, step)
            lines.append(f"{step * 10}.0\t{ped}.0\t{x:.6f}\t{y:.6f}")
    raw.write_text("\n".join(lines) + "\n")

    rebuilt = insyn.ingest(str(raw), columns=(0, 1, 2, 3), stride=10, dt=0.4)
    assert rebuilt.num_steps == scene.num_steps
    assert sorted(rebuilt.pedestrians) == sorted(scene.pedestrians)
