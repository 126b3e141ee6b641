import math

import numpy as np
import pytest

from urnn_equiv.errors import CalibrationError, DegenerateOutputError, InvalidInputError
from urnn_equiv.linalg import spectral_norm
from urnn_equiv.rnn import Sequence
from urnn_equiv.synth import (
    SystemSpec,
    activity_fractions,
    bias_calibrate,
    generate_dataset,
    generate_system,
)


def default_spec(**overrides):
    base = dict(n=4, m=2, p=2, epsilon=0.01, seed=0)
    base.update(overrides)
    return SystemSpec(**base)


# --- generate_system -----------------------------------------------------------


def test_singular_values_inside_epsilon_band():
    for seed in range(5):
        params = generate_system(default_spec(seed=seed))
        sv = np.linalg.svd(params.w, compute_uv=False)
        assert sv[0] < 1.0
        assert sv[-1] > 1.0 - 0.01 - 1e-12


def test_singular_values_wide_epsilon():
    params = generate_system(default_spec(epsilon=0.5, seed=3))
    sv = np.linalg.svd(params.w, compute_uv=False)
    assert sv[-1] > 0.5 - 1e-12
    assert spectral_norm(params.w) < 1.0


def test_generation_is_deterministic():
    spec = default_spec(seed=11)
    a = generate_system(spec)
    b = generate_system(spec)
    for name in ("w", "f", "b", "c", "h_init"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_generated_activity_near_target():
    params, info = generate_system(default_spec(seed=2), return_info=True)
    fractions = np.array(info["achieved_activity_fractions"])
    assert np.all(np.abs(fractions - 0.6) <= 0.05)
    # independent probe drawn from the same distribution
    rng = np.random.default_rng(999)
    fresh = [Sequence(x=rng.standard_normal((400, 2))) for _ in range(10)]
    fresh_fractions = activity_fractions(params, fresh)
    assert np.all(np.abs(fresh_fractions - 0.6) <= 0.1)


def test_fastest_mode_time_constant_near_inverse_epsilon():
    params = generate_system(default_spec(seed=4))
    sv = np.linalg.svd(params.w, compute_uv=False)
    k = -1.0 / math.log(sv[-1])
    assert 80 <= k <= 120


def test_spec_validation():
    with pytest.raises(InvalidInputError):
        SystemSpec(n=0, m=1, p=1, epsilon=0.01, seed=0)
    with pytest.raises(InvalidInputError):
        SystemSpec(n=1, m=1, p=1, epsilon=1.5, seed=0)
    with pytest.raises(InvalidInputError):
        SystemSpec(n=1, m=1, p=1, epsilon=0.01, seed=0, input_sparsity=0.0)


# --- bias_calibrate --------------------------------------------------------------


def test_calibration_immediate_when_within_tolerance():
    params = generate_system(default_spec(seed=5))
    rng = np.random.default_rng(1)
    probes = [Sequence(x=rng.standard_normal((300, 2))) for _ in range(4)]
    shifted = params.replace(b=params.b + 1000.0)  # every unit always on
    out, fractions, evals = bias_calibrate(shifted, probes, target=0.96, tol=0.05, max_iter=50)
    assert evals == 1
    assert np.array_equal(out.b, shifted.b)
    assert np.all(fractions == 1.0)


def test_calibration_hits_custom_target():
    params = generate_system(default_spec(seed=6))
    rng = np.random.default_rng(2)
    probes = [Sequence(x=rng.standard_normal((300, 2))) for _ in range(6)]
    _, fractions, _ = bias_calibrate(params, probes, target=0.4, tol=0.05, max_iter=500)
    assert np.all(np.abs(fractions - 0.4) <= 0.05)


def test_activity_monotone_in_bias():
    params = generate_system(default_spec(seed=7))
    rng = np.random.default_rng(3)
    probes = [Sequence(x=rng.standard_normal((300, 2))) for _ in range(6)]
    base = activity_fractions(params, probes)
    for i in range(params.n):
        up = params.b.copy()
        up[i] += 0.5
        down = params.b.copy()
        down[i] -= 0.5
        assert activity_fractions(params.replace(b=up), probes)[i] >= base[i]
        assert activity_fractions(params.replace(b=down), probes)[i] <= base[i]


def test_calibration_failure_carries_fractions():
    params = generate_system(default_spec(seed=8))
    rng = np.random.default_rng(4)
    probes = [Sequence(x=rng.standard_normal((100, 2))) for _ in range(2)]
    with pytest.raises(CalibrationError) as err:
        bias_calibrate(params, probes, target=0.6, tol=0.001, max_iter=3)
    assert len(err.value.fractions) == params.n


def test_calibration_rejects_sigmoid():
    params = generate_system(default_spec(seed=9)).replace(activation="sigmoid")
    with pytest.raises(InvalidInputError):
        bias_calibrate(params, [Sequence(x=np.zeros((10, 2)))], 0.6, 0.05, 10)


# --- generate_dataset --------------------------------------------------------------


def test_dataset_snr_ratio():
    spec = default_spec(seed=10, epsilon=0.05)
    params = generate_system(spec)
    ds = generate_dataset(params, spec, n_train=30, n_test=10, t_len=200, snr_db=20.0, seed=1)
    noise_power = ds.metadata["empirical_noise_power"]
    ratio = noise_power / ds.clean_signal_power
    assert ratio == pytest.approx(0.01, rel=0.12)
    assert abs(ds.metadata["empirical_snr_db"] - 20.0) <= 0.5


def test_dataset_infinite_snr_means_no_noise():
    spec = default_spec(seed=11, epsilon=0.05)
    params = generate_system(spec)
    ds = generate_dataset(params, spec, 5, 2, 50, math.inf, seed=2)
    from urnn_equiv.rnn import rnn_map

    for seq in ds.train + ds.test:
        assert np.array_equal(seq.y, rnn_map(params, seq.x))


def test_dataset_sparse_inputs():
    spec = default_spec(seed=12, epsilon=0.05, input_sparsity=0.02)
    params = generate_system(spec)
    ds = generate_dataset(params, spec, 40, 10, 200, 20.0, seed=3)
    xs = np.concatenate([seq.x for seq in ds.train + ds.test])
    fraction = np.count_nonzero(xs) / xs.size
    assert abs(fraction - 0.02) <= 0.005


def test_dataset_deterministic():
    spec = default_spec(seed=13, epsilon=0.05)
    params = generate_system(spec)
    d1 = generate_dataset(params, spec, 4, 2, 60, 15.0, seed=4)
    d2 = generate_dataset(params, spec, 4, 2, 60, 15.0, seed=4)
    for s1, s2 in zip(d1.train + d1.test, d2.train + d2.test):
        assert np.array_equal(s1.x, s2.x)
        assert np.array_equal(s1.y, s2.y)
    assert d1.metadata == d2.metadata


def test_dataset_records_power_exactly_as_computed():
    spec = default_spec(seed=14, epsilon=0.05)
    params = generate_system(spec)
    ds = generate_dataset(params, spec, 6, 3, 80, 20.0, seed=5)
    from urnn_equiv.rnn import rnn_map

    clean = np.stack([rnn_map(params, seq.x) for seq in ds.train + ds.test])
    assert ds.clean_signal_power == np.mean(clean**2)


def test_dataset_rejects_degenerate_system():
    spec = default_spec(seed=15, epsilon=0.05)
    params = generate_system(spec)
    dead = params.replace(c=np.zeros_like(params.c), b=-100 * np.ones(params.n))
    with pytest.raises(DegenerateOutputError):
        generate_dataset(dead, spec, 2, 1, 20, 20.0, seed=6)


def test_dataset_sequences_share_shapes():
    spec = default_spec(seed=16, epsilon=0.05)
    params = generate_system(spec)
    ds = generate_dataset(params, spec, 3, 2, 40, 20.0, seed=7)
    assert len(ds.train) == 3 and len(ds.test) == 2
    for seq in ds.train + ds.test:
        assert seq.x.shape == (40, 2)
        assert seq.y.shape == (40, 2)
