import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subnyquist.errors import FrameError
from subnyquist.frames import SupportSet, forward_transform, inverse_transform
from subnyquist.metrics import EvalReport, evaluate, snr_db
from subnyquist.siggen import BandPlan, gen_multiband, random_band_plan


def unit_frame(L=1024, seed=0):
    x = np.random.default_rng(seed).standard_normal(L)
    return x / np.sqrt(np.mean(x ** 2))


def test_snr_examples():
    x = unit_frame()
    assert snr_db(x, x) == 300
    assert snr_db(x, np.zeros_like(x)) == pytest.approx(0, abs=1e-12)
    err = np.full(x.shape, 1e-5)
    assert snr_db(x, x + err) == pytest.approx(100, abs=1e-9)


def test_snr_errors():
    with pytest.raises(FrameError):
        snr_db(np.zeros(8), np.ones(8))
    with pytest.raises(FrameError):
        snr_db(np.ones(8), np.ones(6))


@settings(max_examples=50)
@given(st.floats(1e-6, 1e6) | st.floats(-1e6, -1e-6), st.integers(0, 1000))
def test_snr_scale_invariance(c, seed):
    rng = np.random.default_rng(seed)
    r = rng.standard_normal(64)
    e = r + 0.1 * rng.standard_normal(64)
    assert snr_db(c * r, c * e) == pytest.approx(snr_db(r, e), abs=1e-9)


def test_snr_decreases_with_perturbation_power():
    x = unit_frame(seed=3)
    noise = np.random.default_rng(4).standard_normal(x.shape)
    values = [snr_db(x, x + s * noise) for s in np.logspace(-8, 1, 25)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_evaluate_examples():
    plan = BandPlan(((40, 6), (200, 6)))
    x, support = gen_multiband(1024, plan, seed=5)
    exact = evaluate(x, support, x)
    assert exact.perfect and exact.support_precision == 1 and exact.support_recall == 1
    assert exact.residual_power == 0

    empty = evaluate(x, support, np.zeros_like(x))
    assert empty.support_recall == 0 and empty.support_precision == 1 and not empty.perfect

    X = forward_transform(x)
    half = X.copy()
    lower = SupportSet(1024, tuple(range(200, 206)) + tuple(range(1024 - 205, 1024 - 199)))
    half[list(lower)] = 0
    report = evaluate(x, support, inverse_transform(half))
    assert report.support_recall == 0.5 and report.support_precision == 1


def test_evaluate_flags_false_bins():
    x, support = gen_multiband(256, BandPlan(((10, 4),)), seed=1)
    X = forward_transform(x)
    X[[50, 206]] = np.abs(X).max()
    report = evaluate(x, support, inverse_transform(X))
    assert report.support_recall == 1
    assert report.support_precision == pytest.approx(8 / 10)


def test_report_serialization():
    x, support = gen_multiband(256, BandPlan(((10, 4),)), seed=1)
    report = evaluate(x, support, 0.5 * x)
    data = json.loads(report.to_json())
    assert set(data) == {"snr_db", "perfect", "support_precision", "support_recall", "residual_power"}
    assert EvalReport(**data) == report
    fields = report.csv_row().split(",")
    assert len(fields) == len(EvalReport.CSV_HEADER.split(","))
    assert fields[1] == "false" and float(fields[0]) == report.snr_db


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.01, 0.05, 0.3]), st.integers(1, 3))
def test_reference_is_perfect_on_generated_signals(seed, frac, n_bands):
    x, support = gen_multiband(2048, random_band_plan(2048, frac, n_bands, seed), seed)
    assert evaluate(x, support, x).perfect
