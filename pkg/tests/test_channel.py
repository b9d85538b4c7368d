import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nr_cba.channel import (
    KINDS, LONG_DELAY_SPREAD, SHORT_DELAY_SPREAD, SPEED_PRESETS, ChannelProfile, evolve, from_matrices,
    make_profile, realize,
)
from nr_cba.errors import ConfigError, MissingState, UnknownKind

PANEL = (2, 8)


def single_cluster(delay=0.0, speed=0.0):
    z = np.zeros(1)
    return ChannelProfile(delays=z + delay, powers=np.ones(1), aod=z + 0.3, eod=z, aoa=z - 0.2,
                          k_factor=np.inf, delay_spread=1e-9, speed=speed, label="one")


def test_los_power_split():
    p = make_profile("los_high_corr", 0.0, SHORT_DELAY_SPREAD, seed=4)
    assert p.powers[0] == pytest.approx(10 / 11, abs=1e-12)
    assert p.n_clusters == 4


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_profile_invariants(kind, seed):
    p = make_profile(kind, 1.0, SHORT_DELAY_SPREAD, seed)
    assert p.powers.sum() == pytest.approx(1.0, abs=1e-9)
    assert p.delays[0] == 0.0 and np.all(p.delays >= 0)
    target = LONG_DELAY_SPREAD if kind == "nlos_long_delay" else SHORT_DELAY_SPREAD
    assert p.rms_delay_spread() == pytest.approx(target, rel=1e-9)


def test_speed_presets():
    assert SPEED_PRESETS["3kmh"] == pytest.approx(0.833, abs=1e-3)
    assert SPEED_PRESETS["60kmh"] == pytest.approx(16.67, abs=1e-2)


def test_profile_errors():
    with pytest.raises(UnknownKind):
        make_profile("cdl_z", 1.0, 1e-7, 0)
    with pytest.raises(ConfigError):
        make_profile("nlos_rich", -1.0, 1e-7, 0)
    with pytest.raises(ConfigError):
        make_profile("nlos_rich", 1.0, 0.0, 0)


def test_single_cluster_at_zero_delay_is_flat():
    h = realize(single_cluster(), 6, 4, PANEL, seed=1).per_rb
    np.testing.assert_allclose(h, np.broadcast_to(h[0], h.shape), atol=1e-12)


def test_single_cluster_is_rank_one():
    h = realize(single_cluster(delay=5e-7), 6, 4, PANEL, seed=2).per_rb
    sv = np.linalg.svd(h, compute_uv=False)
    assert np.all(sv[:, 1] < 1e-9)


def test_static_channel_does_not_change():
    p = make_profile("nlos_rich", 0.0, SHORT_DELAY_SPREAD, 3)
    a = realize(p, 8, 4, PANEL, 0.0, seed=5).per_rb
    b = realize(p, 8, 4, PANEL, 1.0, seed=5).per_rb
    np.testing.assert_array_equal(a, b)


def test_port_count_means_horizontal_panel():
    p = make_profile("nlos_rich", 1.0, SHORT_DELAY_SPREAD, 3)
    h = realize(p, 2, 4, 8, seed=0)
    assert h.panel == (4, 1) and h.per_rb.shape == (2, 4, 8)


def test_determinism():
    p = make_profile("nlos_long_delay", 16.67, LONG_DELAY_SPREAD, 9)
    a = realize(p, 26, 4, PANEL, 0.1, seed=11).per_rb
    b = realize(p, 26, 4, PANEL, 0.1, seed=11).per_rb
    assert a.tobytes() == b.tobytes()


def test_doppler_and_decorrelation():
    p = make_profile("nlos_rich", SPEED_PRESETS["60kmh"], SHORT_DELAY_SPREAD, 0)
    assert p.max_doppler == pytest.approx(117.8, abs=0.1)
    corr = []
    for seed in range(20):
        p = make_profile("nlos_rich", SPEED_PRESETS["60kmh"], SHORT_DELAY_SPREAD, seed)
        h0 = realize(p, 26, 4, PANEL, seed=seed)
        h1 = evolve(h0, p, 5e-3)
        a, b = h0.per_rb.ravel(), h1.per_rb.ravel()
        corr.append(abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))
    assert np.mean(corr) < 0.99


def test_evolve_zero_and_additivity():
    p = make_profile("los_high_corr", 16.67, SHORT_DELAY_SPREAD, 2)
    h = realize(p, 10, 4, PANEL, seed=3)
    np.testing.assert_array_equal(evolve(h, p, 0.0).per_rb, h.per_rb)
    two = evolve(evolve(h, p, 2e-3), p, 3e-3)
    one = evolve(h, p, 5e-3)
    assert np.max(np.abs(two.per_rb - one.per_rb)) <= 1e-9


def test_evolve_needs_state():
    h = from_matrices(np.ones((2, 4, 32)), PANEL)
    with pytest.raises(MissingState):
        evolve(h, single_cluster(), 1e-3)


def test_average_entry_power_is_normalized():
    powers = []
    for kind in KINDS:
        for seed in range(30):
            p = make_profile(kind, 1.0, SHORT_DELAY_SPREAD, seed)
            powers.append(np.mean(np.abs(realize(p, 26, 4, PANEL, seed=seed).per_rb) ** 2))
    assert 0.8 <= np.mean(powers) <= 1.2


def test_long_delay_is_more_frequency_selective():
    short, long = [], []
    for seed in range(20):
        for ds, out in ((SHORT_DELAY_SPREAD, short), (LONG_DELAY_SPREAD, long)):
            p = make_profile("nlos_rich", 1.0, ds, seed)
            norms = np.linalg.norm(realize(p, 26, 4, PANEL, seed=seed).per_rb, axis=(1, 2))
            out.append(np.std(norms) / np.mean(norms))
    assert np.mean(long) > np.mean(short)
    assert sum(l > s for l, s in zip(long, short)) >= 15


def test_los_is_more_spatially_correlated():
    def ratio(kind):
        out = []
        for seed in range(20):
            p = make_profile(kind, 1.0, SHORT_DELAY_SPREAD, seed)
            h = realize(p, 26, 4, PANEL, seed=seed).per_rb
            sv = np.linalg.svd(h.reshape(-1, 32), compute_uv=False)
            out.append(sv[0] ** 2 / sv[1] ** 2)
        return np.mean(out)
    assert ratio("los_high_corr") > ratio("nlos_rich")


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(KINDS), st.integers(0, 2**31), st.floats(0, 30))
def test_realization_is_finite_with_declared_shape(kind, seed, speed):
    p = make_profile(kind, speed, SHORT_DELAY_SPREAD, seed)
    h = realize(p, 5, 4, PANEL, 0.01, seed)
    assert h.per_rb.shape == (5, 4, 32)
    assert np.all(np.isfinite(h.per_rb))
