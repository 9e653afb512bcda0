import json

import numpy as np
import pytest

from countgraph.counting import CountParams, Scene, forward
from countgraph.oracle import exact_count, is_ideal
from countgraph.synth import SynthConfig, generate_dataset, generate_scene, iter_scenes, load_dataset, scene_line

ID = CountParams.identity()


def test_noise_free_scenes_are_ideal():
    cfg = SynthConfig(q=0.0, jitter=0.0, dup_prob=0.0)
    for sc in iter_scenes(cfg, 300):
        assert exact_count(sc) == sc.true_count


def test_duplicated_noise_free_scenes_count_exactly():
    cfg = SynthConfig(q=0.0, jitter=0.0, dup_prob=1.0, seed=3)
    for sc in iter_scenes(cfg, 300):
        assert is_ideal(sc)
        assert abs(forward(ID, sc).c - sc.true_count) <= 1e-9


def test_fixed_seed_repeats():
    cfg = SynthConfig(q=0.3, jitter=0.02, seed=99)
    a = generate_scene(cfg, np.random.default_rng(5))
    b = generate_scene(cfg, np.random.default_rng(5))
    assert a == b


def test_scene_shape_and_ranges():
    cfg = SynthConfig(n=20, max_objects=12, side=0.1, q=0.5, jitter=0.03, seed=1)
    for sc in iter_scenes(cfg, 200):
        assert sc.n == 20
        assert 0 <= sc.true_count <= 12
        assert all(0.0 <= v <= 1.0 for v in sc.attention)


def test_attention_noise_bounds():
    # relevant proposals land in [1-q, 1], distractors in [0, q]
    cfg = SynthConfig(q=0.3, seed=8)
    for sc in iter_scenes(cfg, 100):
        a = np.array(sc.attention)
        assert np.all((a <= 0.3) | (a >= 0.7))


def test_round_trip():
    for sc in iter_scenes(SynthConfig(q=0.4, jitter=0.05, seed=2), 50):
        assert Scene.from_json(json.loads(scene_line(sc))) == sc


def test_dataset_file(tmp_path):
    cfg = SynthConfig(seed=4, q=0.2)
    path = generate_dataset(cfg, 3, tmp_path / "d.jsonl")
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    assert load_dataset(path) == list(iter_scenes(cfg, 3))
    again = generate_dataset(cfg, 3, tmp_path / "e.jsonl")
    assert path.read_bytes() == again.read_bytes()


def test_label_histogram_covers_range():
    cfg = SynthConfig(max_objects=5, q=0.3, jitter=0.02, seed=11)
    labels = np.array([sc.true_count for sc in iter_scenes(cfg, 10_000)])
    assert set(labels.tolist()) == set(range(6))


def test_bad_config_rejected():
    for kwargs in (
        dict(n=0),
        dict(max_objects=11),
        dict(side=0.6),
        dict(dup_prob=1.5),
        dict(jitter=-0.1),
        dict(q=2.0),
        dict(side=0.5, max_objects=4),
    ):
        with pytest.raises(ValueError):
            SynthConfig(**kwargs)
    with pytest.raises(ValueError):
        generate_dataset(SynthConfig(), 0, "unused.jsonl")


def test_load_reports_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = scene_line(next(iter_scenes(SynthConfig(), 1)))
    path.write_text(good + "\n" + '{"boxes": [[0,0,1,1]], "attention": [2.0]}\n')
    with pytest.raises(ValueError, match=":2:"):
        load_dataset(path)


def test_io_error_names_path(tmp_path):
    target = tmp_path / "missing-dir" / "x.jsonl"
    with pytest.raises(OSError, match="missing-dir"):
        generate_dataset(SynthConfig(), 2, target)
