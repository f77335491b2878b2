import math

import numpy as np
import pytest

import bevf


def test_network_sizing():
    assert [bevf.receptive_field(n) for n in (4, 5, 6, 7)] == [76, 156, 316, 636]
    assert [bevf.min_input_size(n) for n in (4, 5, 6, 7)] == [16, 32, 64, 128]
    assert bevf.count_params(5, 4, 15) == 122227


def test_render_and_extract_round_trip():
    spec = bevf.GridSpec(64, 32, 1.0, 0.5)
    v = bevf.VehicleState(1, 20.3, 7.1, 4.5, 1.9)
    grid = bevf.render_frame([v], spec)
    assert grid.shape == (32, 64)
    assert grid.min() >= 0.0 and grid.max() <= 1.0
    assert bevf.gaussian_at(v, 20.3, 7.1) == 1.0
    cfg = bevf.ExtractConfig()
    cfg.win_w, cfg.win_h = 7.0, 3.0
    est = bevf.extract_positions(grid, spec, cfg)
    assert len(est) == 1
    assert est[0].x == pytest.approx(20.3, abs=0.05)
    assert est[0].y == pytest.approx(7.1, abs=0.05)


def test_extract_rejects_wrong_shape():
    with pytest.raises(ValueError):
        bevf.extract_positions(np.zeros((3, 3)), bevf.GridSpec(64, 32))


def test_hungarian_and_associate():
    assert bevf.hungarian([[5, 1], [1, 5]]) == [(0, 1), (1, 0)]
    a = bevf.associate([(0.0, 0.0), (10.0, 0.0)], [(10.0, 1.0), (0.0, 0.0), (50.0, 0.0)])
    assert len(a.pairs) == 2
    assert a.unmatched_targets == [2]
    assert sum(p.distance for p in a.pairs) == pytest.approx(1.0)


def test_synth_is_deterministic():
    cfg = bevf.SynthConfig()
    cfg.seed = 3
    cfg.duration_s = 4.0
    a, b = bevf.synth_highway(cfg), bevf.synth_highway(cfg)
    assert len(a) == 20
    assert a.to_text() == b.to_text()
    speeds = {abs(v.vx) for f in a.frames for v in f.vehicles}
    assert all(25.0 <= s <= 35.0 for s in speeds)


def test_forward_shape():
    x = np.random.default_rng(0).random((3, 16, 32))
    y = bevf.predict(4, 2, 1, x)
    assert y.shape == x.shape
    assert np.isfinite(y).all()
