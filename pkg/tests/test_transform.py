import math

import pytest

from bridgesim import (
    LayerSequence,
    ScentFunction,
    bridge_transform,
    derive_rng,
    phase_thresholds,
)
from bridgesim.verify import random_sequence


@pytest.fixture
def scent4():
    return ScentFunction.power(4, k=1.0, phi=1.0)


def test_transform_with_spare_columns(scent4):
    trace = bridge_transform(LayerSequence(8, 4, (5, 3, 1, 0)), 16, scent4)
    assert trace.u == 2
    assert trace.added_full_columns == 1
    assert trace.pre.counts == (6, 4, 2, 1)
    assert trace.j_full == 1
    assert trace.j_bot == 2
    assert trace.leftover_m == 1
    assert trace.mid.counts == (3, 3, 3, 3)
    assert trace.post.counts == (3, 3, 3, 4)
    assert trace.post.total == 13
    assert trace.scent_deltas["pre"] >= scent4.phi - 1e-12


def test_transform_column_assembly(scent4):
    trace = bridge_transform(LayerSequence(8, 4, (5, 5, 0, 0)), 10, scent4)
    assert trace.u == 2
    assert trace.added_full_columns == 0
    assert trace.pre.counts == (5, 3, 1, 1)
    assert trace.post.n(4) >= 1


def test_transform_errors(scent4):
    with pytest.raises(ValueError):
        bridge_transform(LayerSequence(8, 4, (5, 4, 2, 1)), 16, scent4)  # already at the top
    with pytest.raises(ValueError):
        bridge_transform(LayerSequence(8, 4, (3, 1, 0, 0)), 3, scent4)  # cap below count
    with pytest.raises(ValueError):
        # no spare particles and no layer holds two: the column cannot form
        bridge_transform(LayerSequence(8, 4, (1, 1, 0, 0)), 2, scent4)
    with pytest.raises(ValueError):
        bridge_transform(LayerSequence(8, 4, (8, 3, 1, 0)), 16, scent4)  # full slab input


def feasible_input(w, h, rng):
    """Sequence/cap pair with enough particles to reach the top layer."""
    while True:
        seq = random_sequence(w, h, rng, top_gap=True)
        n = seq.total + int(rng.integers(0, w * h))
        u = w - max(seq.counts) - 1
        if (u >= 1 and n - seq.total >= h) or seq.total >= h:
            return seq, n


def test_transform_random_accounting():
    rng = derive_rng(61)
    mid_dips = 0
    for _ in range(300):
        w = int(rng.integers(5, 12))
        h = int(rng.integers(3, 8))
        scent = ScentFunction.power(h, k=float(rng.choice([1.0, 2.0])), phi=2.0)
        seq, n = feasible_input(w, h, rng)
        trace = bridge_transform(seq, n, scent)
        assert trace.pre.total == trace.input.total + trace.added_full_columns * h
        assert trace.mid.total == trace.pre.total - trace.leftover_m
        assert trace.post.total == trace.pre.total
        assert trace.post.r_top == h
        assert max(trace.post.counts) <= w - 1
        assert trace.leftover_m <= h - 1
        s = trace.scent_deltas
        assert s["pre"] >= trace.added_full_columns * scent.phi - 1e-9
        assert s["pre_to_post"] >= -1e-9
        if s["mid"] < -1e-9:
            mid_dips += 1  # consolidation may park particles; post restores them
        assert trace.bound_deltas["post"] >= 0
    assert mid_dips > 0  # the dip genuinely occurs, which is why post exists


def test_threshold_values():
    th = phase_thresholds(1.0, 3.0, 1.0, 5 * math.log(2))
    assert th.beta1 == pytest.approx(17 * math.log(2), abs=1e-12)
    assert th.beta2 == pytest.approx(2.5 * math.log(2), abs=1e-12)
    assert th.eta1 == pytest.approx(8.0, abs=1e-12)
    assert th.eta2 == pytest.approx(1.0, abs=1e-12)


def test_threshold_vanishes_at_beta2():
    beta2 = 2.5 * math.log(2)
    th = phase_thresholds(1.0, 3.0, 1.0, beta2)
    assert th.eta2 == pytest.approx(0.0, abs=1e-12)


def test_threshold_domain():
    with pytest.raises(ValueError):
        phase_thresholds(0.5, 3.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        phase_thresholds(1.0, 3.0, 0.0, 1.0)
    with pytest.warns(UserWarning):
        phase_thresholds(2.0, 3.0, 1.0, 1.0)  # rho >= alpha - 2


def test_threshold_scales_inversely_with_scent():
    a = phase_thresholds(1.0, 4.0, 1.0, 3.0)
    b = phase_thresholds(1.0, 4.0, 2.0, 3.0)
    assert a.eta1 == pytest.approx(2 * b.eta1)
    assert a.eta2 == pytest.approx(2 * b.eta2)
