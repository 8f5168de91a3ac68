import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import support_least_squares
from subnyquist.errors import ConfigError, DivergenceError, MaskError
from subnyquist.frames import SupportSet, forward_transform, frame_power, support_of
from subnyquist.metrics import snr_db
from subnyquist.recovery import (
    Adaptive, Exponential, RecoveryConfig, RecoveryTrace, TraceRecord, compute_adaptive_threshold,
    hard_threshold, hybrid_imat_recover, imat_recover, known_support_recover, preset_config, recover,
    recovery_step, threshold_schedule_value,
)
from subnyquist.sampling import Mask, apply_mask, gen_mask
from subnyquist.siggen import BandPlan, gen_multiband, random_band_plan


def trial(L, frac, rate, seed, n_bands=2):
    plan = random_band_plan(L, frac, n_bands, seed)
    x, support = gen_multiband(L, plan, seed)
    mask = gen_mask(L, round(rate * L), seed + 10_000)
    return x, support, mask, apply_mask(x, mask)


# --- thresholds -----------------------------------------------------------

def test_adaptive_threshold_examples():
    assert compute_adaptive_threshold(np.zeros(8, complex), 2.5) == 0
    assert compute_adaptive_threshold(np.array([1, 0], complex), 2.5) == pytest.approx(2.5)
    assert compute_adaptive_threshold(np.full(8, 2 + 0j), 2.5) == pytest.approx(2.5 * math.sqrt(32) / 2, rel=1e-12)
    assert compute_adaptive_threshold(np.full(8, 2 + 0j), 2.5) == pytest.approx(7.0711, abs=1e-4)


def test_adaptive_threshold_against_rms_form():
    # alpha * ||S|| / sqrt(L/2) is sqrt(2) times alpha * rms(S): within the 2x band
    S = forward_transform(np.random.default_rng(3).standard_normal(1024))
    rms_form = 2.5 * np.sqrt(np.mean(np.abs(S) ** 2))
    ratio = compute_adaptive_threshold(S, 2.5) / rms_form
    assert ratio == pytest.approx(math.sqrt(2), rel=1e-12)
    assert 0.5 <= ratio <= 2


def test_hard_threshold_examples():
    X = forward_transform(np.random.default_rng(1).standard_normal(16))
    np.testing.assert_array_equal(hard_threshold(X, 0), X)
    assert not hard_threshold(X, np.max(np.abs(X)) * 1.01).any()
    ties = np.array([5, 3, 3, 5], dtype=complex)
    np.testing.assert_array_equal(hard_threshold(ties, 3), ties)
    hermitian = np.array([5, 3, 5, 3], dtype=complex)  # bins 1 and 3 are the conjugate pair
    np.testing.assert_array_equal(hard_threshold(hermitian, 3), hermitian)
    np.testing.assert_array_equal(hard_threshold(hermitian, 3.0000001), [5, 0, 5, 0])
    with pytest.raises(ValueError):
        hard_threshold(X, -1)


@given(st.integers(1, 64).map(lambda h: 2 * h), st.integers(0, 10_000), st.floats(0, 1.2))
def test_hard_threshold_properties(L, seed, frac):
    X = forward_transform(np.random.default_rng(seed).standard_normal(L))
    thr = frac * np.max(np.abs(X))
    Y = hard_threshold(X, thr)
    kept = Y != 0
    assert np.all(np.abs(X[kept]) >= thr * (1 - 1e-12))
    assert np.array_equal(kept, kept[(-np.arange(L)) % L])
    np.testing.assert_array_equal(hard_threshold(Y, thr), Y)


def test_schedule_values():
    S = np.ones(8, complex)
    assert threshold_schedule_value(Exponential(10, 0.5), 1, S, 2.5) == 10
    assert threshold_schedule_value(Exponential(10, 0.5), 4, S, 2.5) == 1.25
    for i in (1, 7, 300):
        assert threshold_schedule_value(Adaptive(), i, S * i, 2.5) == compute_adaptive_threshold(S * i, 2.5)
    with pytest.raises(ValueError):
        threshold_schedule_value(Adaptive(), 0, S, 2.5)


# --- config and trace -----------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    {"alpha": 0}, {"max_iters": 0}, {"gamma": 0}, {"gamma": 2.5}, {"stop_rel_residual": -1},
    {"schedule": Exponential(1.0, 1.0)}, {"schedule": Exponential(-1.0, 0.5)},
])
def test_config_rejects_invalid(kwargs):
    with pytest.raises(ConfigError):
        RecoveryConfig(**kwargs)


@pytest.mark.parametrize("config", [
    RecoveryConfig(), preset_config("hybrid"), RecoveryConfig(schedule=Exponential(3.0, 0.9), overwrite_samples=True),
])
def test_config_json_round_trip(config):
    assert RecoveryConfig.from_json(config.to_json()) == config


def test_config_json_field_names():
    data = RecoveryConfig().to_dict()
    assert set(data) == {"alpha", "max_iters", "gamma", "schedule", "overwrite_samples", "stop_rel_residual"}
    with pytest.raises(ConfigError):
        RecoveryConfig.from_dict({**data, "extra": 1})


def test_trace_csv_round_trip():
    trace = RecoveryTrace([TraceRecord(1, 0.5, 0.25, 4, None), TraceRecord(2, 0.25, 1e-3, 6, 42.0)])
    text = trace.to_csv()
    assert text.splitlines()[0] == "iter,threshold,residual_power,support_size,snr_db"
    assert text.splitlines()[1].endswith(",")
    assert RecoveryTrace.from_csv(text).records == trace.records


# --- IMAT -----------------------------------------------------------------

def test_imat_zero_frame():
    mask = gen_mask(64, 20, 1)
    out, trace = imat_recover(np.zeros(64), mask, RecoveryConfig())
    assert not out.any()
    assert trace[0].iter == 1 and trace[0].residual_power == 0


def test_imat_full_mask():
    x, support = gen_multiband(4096, random_band_plan(4096, 0.05, 3, 2), 2)
    mask = gen_mask(4096, 4096, 0)
    out, trace = imat_recover(x, mask, RecoveryConfig(max_iters=100))
    assert snr_db(x, out) >= 100


def test_imat_matches_support_least_squares():
    L = 256
    x, support = gen_multiband(L, BandPlan(((30, 2),)), seed=4)
    mask = gen_mask(L, L // 2, seed=5)
    out, _ = imat_recover(apply_mask(x, mask), mask, RecoveryConfig(max_iters=200))
    ls = support_least_squares(apply_mask(x, mask), mask.indices, support.bins)
    assert snr_db(x, out) >= 100
    assert np.linalg.norm(out - ls) <= 1e-6 * np.linalg.norm(ls)


def test_imat_input_errors():
    with pytest.raises(MaskError):
        imat_recover(np.zeros(16), gen_mask(16, 0, 0), RecoveryConfig())
    with pytest.raises(MaskError):
        imat_recover(np.ones(16), gen_mask(16, 4, 0), RecoveryConfig())
    with pytest.raises(MaskError):
        imat_recover(np.zeros(16), gen_mask(32, 4, 0), RecoveryConfig())


def test_trace_records_snr_with_reference():
    x, _, mask, y = trial(1024, 0.02, 0.2, 3)
    out, trace = imat_recover(y, mask, preset_config("imat"), reference=x)
    assert all(r.snr_db is not None for r in trace)
    assert trace[-1].snr_db == pytest.approx(snr_db(x, out))
    assert [r.iter for r in trace] == list(range(1, len(trace) + 1))
    _, bare = imat_recover(y, mask, preset_config("imat"))
    assert all(r.snr_db is None for r in bare)


def test_support_containment_at_sufficient_rate():
    contained = 0
    for seed in range(50):
        x, support, mask, y = trial(2048, 0.02, 7.25 * 0.02, seed, n_bands=1 + seed % 3)
        out, _ = imat_recover(y, mask, preset_config("imat"))
        X = forward_transform(out)
        admitted = support_of(X, 1e-9 * max(np.max(np.abs(X)), 1e-300))
        contained += set(admitted) <= set(support)
    assert contained >= 0.95 * 50


# --- known support --------------------------------------------------------

def test_known_support_identity_iteration():
    x = np.random.default_rng(0).standard_normal(32)
    everything = SupportSet(32, tuple(range(32)))
    mask = gen_mask(32, 32, 0)
    out, trace = known_support_recover(x, mask, everything, RecoveryConfig(max_iters=1))
    assert len(trace) == 1
    np.testing.assert_allclose(out, x, atol=1e-12)


def test_known_support_matches_two_unknown_least_squares():
    L = 8
    mask = gen_mask(L, 6, seed=2)
    # arbitrary on-mask data, so the fit is a genuine projection
    y = apply_mask(np.random.default_rng(9).standard_normal(L), mask)
    support = SupportSet(L, (1, 7))
    out, _ = known_support_recover(y, mask, support, RecoveryConfig(max_iters=500, stop_rel_residual=0))
    ls = support_least_squares(y, mask.indices, support.bins)
    assert np.linalg.norm(out - ls) <= 1e-8 * np.linalg.norm(ls)


def test_known_support_errors():
    with pytest.raises(ConfigError):
        known_support_recover(np.zeros(8), gen_mask(8, 4, 0), SupportSet(8, ()), RecoveryConfig())
    with pytest.raises(MaskError):
        known_support_recover(np.zeros(8), gen_mask(8, 0, 0), SupportSet(8, (1, 7)), RecoveryConfig())
    with pytest.raises(ConfigError):
        recover("known-support", np.zeros(8), gen_mask(8, 4, 0), RecoveryConfig())
    with pytest.raises(ConfigError):
        recover("omp", np.zeros(8), gen_mask(8, 4, 0), RecoveryConfig())


def test_known_support_below_landau_fails():
    failures = 0
    for seed in range(20):
        x, support, mask, y = trial(2048, 0.04, 0.5 * 0.04, seed)
        try:
            out, trace = known_support_recover(y, mask, support, preset_config("known-support"))
        except DivergenceError:
            failures += 1
            continue
        p = trace.residual_powers
        failures += bool(np.all(np.diff(p) >= 0) or snr_db(x, out) < 20)
    assert failures >= 0.8 * 20


def test_divergence_error_carries_trace():
    L = 256
    x, support = gen_multiband(L, BandPlan(((10, 60),)), seed=1)
    mask = gen_mask(L, 40, seed=1)
    with pytest.raises(DivergenceError) as info:
        known_support_recover(apply_mask(x, mask), mask, support, RecoveryConfig(gamma=2.0))
    assert len(info.value.trace) >= 1


# --- hybrid ---------------------------------------------------------------

def test_hybrid_first_iteration_equals_imat():
    x, _, mask, y = trial(1024, 0.03, 0.2, 8)
    cfg = RecoveryConfig(max_iters=1)
    a, ta = imat_recover(y, mask, cfg)
    b, tb = hybrid_imat_recover(y, mask, cfg)
    np.testing.assert_array_equal(a, b)
    assert ta.records == tb.records


def test_hybrid_zero_frame():
    out, _ = hybrid_imat_recover(np.zeros(64), gen_mask(64, 8, 0), preset_config("hybrid"))
    assert not out.any()


def perfect(x, run):
    try:
        return snr_db(x, run()[0]) >= 100
    except DivergenceError:
        return False


def test_hybrid_beats_imat_at_ratio_three():
    hybrid_ok = imat_ok = 0
    hybrid_cfg = dataclasses.replace(preset_config("hybrid"), max_iters=300)
    for seed in range(20):
        x, _, mask, y = trial(2048, 0.02, 0.06, seed, n_bands=1 + seed % 3)
        hybrid_ok += perfect(x, lambda: hybrid_imat_recover(y, mask, hybrid_cfg))
        imat_ok += perfect(x, lambda: imat_recover(y, mask, preset_config("imat")))
    print(f"hybrid {hybrid_ok}/20, imat {imat_ok}/20")
    assert hybrid_ok >= 0.8 * 20
    assert imat_ok < 0.5 * 20


# --- shared properties ----------------------------------------------------

@pytest.mark.parametrize("alg", ["imat", "known-support", "hybrid"])
def test_final_residual_not_above_initial(alg):
    for seed in range(5):
        x, support, mask, y = trial(2048, 0.02, 0.2, seed)
        out, trace = recover(alg, y, mask, preset_config(alg), support=support)
        assert trace[-1].residual_power <= frame_power(y)


def test_overwrite_samples_replaces_on_mask_values():
    x, _, mask, y = trial(1024, 0.05, 0.15, 1)
    cfg = RecoveryConfig(max_iters=3, overwrite_samples=True)
    out, _ = imat_recover(y, mask, cfg)
    np.testing.assert_array_equal(out[mask.indicator], y[mask.indicator])
    plain, _ = imat_recover(y, mask, RecoveryConfig(max_iters=3))
    np.testing.assert_array_equal(out[~mask.indicator], plain[~mask.indicator])


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 2.0), st.integers(0, 1000))
def test_gamma_neutral_at_fixpoint(gamma, seed):
    # with R equal to the true spectrum the residual vanishes, so E = 0
    L = 256
    x, support = gen_multiband(L, random_band_plan(L, 0.1, 2, seed), seed)
    mask = gen_mask(L, 60, seed)
    X = np.fft.fft(x)
    y = apply_mask(x, mask)
    e = np.fft.ifft(X).real
    e[~mask.indicator] = 0
    S = np.fft.fft(y) - np.fft.fft(e)
    keep = np.abs(S) >= compute_adaptive_threshold(S, 2.5)
    _, R = recovery_step(S, X.copy(), mask.indicator, mask.m / L, gamma, keep | support.indicator)
    assert np.linalg.norm(R - X) < 1e-9 * np.linalg.norm(X)
