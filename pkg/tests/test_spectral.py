import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from tsqpde.exceptions import DegenerateBranchError, InsufficientDataError, NoSignalError, ShapeError
from tsqpde.spectral import (MatrixPencilEstimator, Mode, PencilConfig, SpectralEstimate, TimeSeries, collect_series,
                             combine_signal, estimate_gap, gap_trace, model_values, pencil_initial_guess, refine_fit,
                             shot_threshold)

GAP = 0.254


def _series(modes, n=50, dt=0.05):
    steps = np.arange(1, n + 1)
    return TimeSeries(dt, steps, model_values(modes, steps, dt))


def test_combine_signal_recovers_branch_product():
    a0sq = 0.3
    for t in (0.0, 0.7, 2.1):
        a0 = a0sq * np.exp(-1j * -1.0 * t)
        a1 = (1 - a0sq) * np.exp(-1j * (GAP - 1.0) * t)
        m = [abs(a0 + np.exp(1j * th) * a1) ** 2 for th in (0, np.pi / 2, np.pi, 3 * np.pi / 2)]
        assert combine_signal(*m, a0sq) == pytest.approx(np.exp(-1j * GAP * t), abs=1e-12)
    with pytest.raises(DegenerateBranchError):
        combine_signal(1, 1, 1, 1, 1.0)


def test_single_mode_exact():
    ts = _series([Mode(1.0, GAP, 0.0)])
    gap, est = estimate_gap(ts)
    assert abs(gap - GAP) < 1e-8
    assert abs(est.alpha) < 1e-8


def test_decay_does_not_move_frequency():
    clean = _series([Mode(0.8, GAP, 0.0), Mode(0.2, 1.3, 0.0)])
    damped = _series([Mode(0.8, GAP, 0.3), Mode(0.2, 1.3, 0.3)])
    g0, _ = estimate_gap(clean)
    g1, est = estimate_gap(damped)
    assert abs(g1 - g0) < 1e-8
    assert est.alpha == pytest.approx(0.3, abs=1e-8)


@settings(max_examples=60)
@given(st.integers(0, 100_000), st.integers(1, 3))
def test_pencil_recovers_damped_sums(seed, k):
    r = np.random.default_rng(seed)
    freqs = np.sort(r.uniform(-3, 3, k))
    if k > 1 and np.min(np.diff(freqs)) < 0.3:
        freqs = np.linspace(-2.5, 2.5, k)
    modes = [Mode(complex(r.uniform(0.2, 1) * np.exp(1j * r.uniform(0, 2 * np.pi))), float(f), float(r.uniform(0, 0.5)))
             for f in freqs]
    est = pencil_initial_guess(_series(modes, n=40))
    assert len(est.modes) == k
    got = sorted(est.modes, key=lambda m: m.frequency)
    for a, b in zip(got, sorted(modes, key=lambda m: m.frequency)):
        assert a.frequency == pytest.approx(b.frequency, abs=1e-6)
        assert a.decay == pytest.approx(b.decay, abs=1e-6)
        assert a.amplitude == pytest.approx(b.amplitude, abs=1e-6)


@settings(max_examples=30)
@given(st.integers(0, 100_000), st.booleans())
def test_refine_never_increases_residual(seed, shared):
    r = np.random.default_rng(seed)
    modes = [Mode(0.9, GAP, 0.05), Mode(0.1, 0.9, 0.05)]
    ts = _series(modes, n=30)
    ts = TimeSeries(ts.dt, ts.steps, ts.values + 0.01 * (r.standard_normal(30) + 1j * r.standard_normal(30)))
    guess = pencil_initial_guess(ts, PencilConfig(num_modes=2))
    out = refine_fit(ts, guess, shared_decay=shared)
    assert out.residual <= guess.residual + 1e-15


def test_dominant_tie_prefers_smaller_frequency():
    est = SpectralEstimate([Mode(1.0, 2.0, 0.0), Mode(0.999, -0.5, 0.0), Mode(0.5, 0.1, 0.0)], 0.0)
    assert est.dominant().frequency == -0.5
    with pytest.raises(NoSignalError):
        SpectralEstimate([], 0.0).dominant()


def test_insufficient_and_invalid_data():
    with pytest.raises(InsufficientDataError):
        pencil_initial_guess(_series([Mode(1.0, GAP, 0.0)], n=1))
    with pytest.raises(InsufficientDataError):
        PencilConfig(l=30).resolve(40)
    with pytest.raises(NoSignalError):
        pencil_initial_guess(TimeSeries(0.1, np.arange(1, 11), np.zeros(10)))
    with pytest.raises(ValueError):
        TimeSeries(0.1, np.array([1, 3, 2]), np.ones(3))
    with pytest.raises(ShapeError):
        TimeSeries(0.1, np.arange(1, 4), np.ones(4))
    with pytest.raises(ValueError):
        TimeSeries(-0.1, np.arange(1, 4), np.ones(3))
    with pytest.raises(ValueError):
        pencil_initial_guess(TimeSeries(0.1, np.array([1, 2, 4, 5, 6]), np.ones(5)))


def test_series_and_spectrum_files(tmp_path):
    ts = _series([Mode(1.0, GAP, 0.0)], n=12)
    ts.metadata["shots"] = 100
    ts.write(tmp_path / "ts.tsv")
    back = TimeSeries.read(tmp_path / "ts.tsv")
    np.testing.assert_array_equal(back.values, ts.values)
    np.testing.assert_array_equal(back.steps, ts.steps)
    assert back.dt == ts.dt and back.metadata["shots"] == "100"
    _, est = estimate_gap(ts)
    est.write(tmp_path / "spec.tsv")
    lines = (tmp_path / "spec.tsv").read_text().splitlines()
    assert lines[2] == "weight\tdelta\talpha\tre_amp\tim_amp"


def test_collect_series_early_stop():
    vals = iter([0.6, 0.6, 0.5, 0.5] + [0.5] * 40)

    def measure(r):
        m = next(vals)
        return m, 0.5, 1 - m, 0.5

    ts = collect_series(measure, 0.1, max_steps=20, stop_threshold=0.1, window=3)
    assert len(ts) == 5
    assert ts.metadata["stop_reason"] == "no_signal"
    full = collect_series(lambda r: (1.0, 0.5, 0.0, 0.5), 0.1, max_steps=6)
    assert len(full) == 6 and full.metadata["stop_reason"] == "max_steps"
    assert shot_threshold(10_000) == pytest.approx(0.04)
    assert shot_threshold(None) is None


def test_gap_trace():
    ts = _series([Mode(1.0, GAP, 0.0)], n=12)
    rows = gap_trace(ts, GAP)
    assert [r for r, _ in rows] == list(range(4, 13))
    assert max(abs(v) for _, v in rows) < 1e-8


def test_estimator_interface():
    ts = _series([Mode(0.7, GAP, 0.0), Mode(0.3, -1.1, 0.0)], n=30)
    est = MatrixPencilEstimator(dt=0.05)
    assert clone(est).get_params()["rank_threshold"] == 1e-10
    est.fit(ts.steps, ts.values)
    assert est.gap_ == pytest.approx(GAP, abs=1e-8)
    np.testing.assert_allclose(est.predict(ts.steps), ts.values, atol=1e-8)
    assert est.score(ts) > -1e-14
    with pytest.raises(AttributeError):
        MatrixPencilEstimator().predict([1, 2])
    with pytest.raises(ValueError):
        MatrixPencilEstimator().fit([1, 2, 3])


def test_shot_series_use_scaled_threshold():
    ts = _series([Mode(0.9, GAP, 0.05), Mode(0.1, 1.1, 0.05)])
    assert PencilConfig.for_series(ts).rank_threshold == 1e-10
    noisy = TimeSeries(ts.dt, ts.steps, ts.values, metadata={"shots": "10000"})
    assert PencilConfig.for_series(noisy).rank_threshold == pytest.approx(0.01)
    r = np.random.default_rng(3)
    noisy.values = ts.values + 0.005 * (r.standard_normal(50) + 1j * r.standard_normal(50))
    gap, est = estimate_gap(noisy)
    raw, est_raw = estimate_gap(noisy, PencilConfig())
    assert est.rank <= 2 < est_raw.rank
    assert abs(gap - GAP) < abs(raw - GAP)
