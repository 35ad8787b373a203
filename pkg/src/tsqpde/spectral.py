"""Time-series assembly and harmonic retrieval.

The signal model is ``s_r = sum_J c_J exp(-(i Delta_J + alpha_J) r dt)`` for
step indices ``r``.  A matrix pencil gives the initial modes; a damped
least-squares fit then refines all retained modes jointly.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator

from .exceptions import DegenerateBranchError, InsufficientDataError, NoSignalError
from .validation import check_complex_series, check_fitted, check_positive, check_steps

__all__ = [
    "combine_signal",
    "TimeSeries",
    "Mode",
    "SpectralEstimate",
    "PencilConfig",
    "collect_series",
    "pencil_initial_guess",
    "refine_fit",
    "estimate_gap",
    "gap_trace",
    "MatrixPencilEstimator",
    "EARLY_STOP_WINDOW",
]

log = logging.getLogger(__name__)

EARLY_STOP_WINDOW = 3


def combine_signal(m0: float, mhalf: float, mpi: float, m3half: float, a0sq: float) -> complex:
    """``s = (m(0) - m(pi) - i [m(pi/2) - m(3pi/2)]) / (4 a0^2 (1 - a0^2))``."""
    denom = 4.0 * a0sq * (1.0 - a0sq)
    if not 0.0 < a0sq < 1.0 or denom <= 0.0:
        raise DegenerateBranchError(f"branch weight {a0sq} leaves no interference term")
    return complex(m0 - mpi, -(mhalf - m3half)) / denom


@dataclass
class TimeSeries:
    dt: float
    steps: np.ndarray
    values: np.ndarray
    a0sq: float = 0.5
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        check_positive(self.dt, "dt")
        self.values = check_complex_series(self.values, "values", min_length=0)
        self.steps = check_steps(self.steps, self.values.size)
        if self.steps.size and self.steps[0] < 1:
            raise ValueError("steps start at 1")

    def __len__(self):
        return int(self.values.size)

    @property
    def times(self) -> np.ndarray:
        return self.steps * self.dt

    def head(self, n: int) -> "TimeSeries":
        return TimeSeries(self.dt, self.steps[:n], self.values[:n], self.a0sq, dict(self.metadata))

    def write(self, path) -> None:
        """Tab-separated ``step t re im`` with ``# key=value`` header lines."""
        with open(path, "w", newline="") as fh:
            fh.write(f"# dt={self.dt!r}\n# a0sq={self.a0sq!r}\n")
            for k in sorted(self.metadata):
                fh.write(f"# {k}={self.metadata[k]}\n")
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(["step", "t", "re", "im"])
            for r, t, v in zip(self.steps, self.times, self.values):
                w.writerow([int(r), repr(float(t)), repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def read(cls, path) -> "TimeSeries":
        meta: dict = {}
        rows = []
        with open(path) as fh:
            for line in fh:
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition("=")
                    meta[key.strip()] = val.strip()
                elif line.strip() and not line.startswith("step"):
                    rows.append(line.split("\t"))
        dt = float(meta.pop("dt"))
        a0sq = float(meta.pop("a0sq", 0.5))
        steps = np.array([int(r[0]) for r in rows], dtype=int)
        vals = np.array([float(r[2]) + 1j * float(r[3]) for r in rows])
        return cls(dt, steps, vals, a0sq, meta)


@dataclass(frozen=True)
class Mode:
    amplitude: complex
    frequency: float  # Delta
    decay: float  # alpha

    @property
    def weight(self) -> float:
        return abs(self.amplitude)


@dataclass
class SpectralEstimate:
    modes: list[Mode]
    residual: float
    converged: bool = True
    rank: int = 0

    @property
    def alpha(self) -> float:
        return self.dominant().decay if self.modes else 0.0

    def dominant(self, tie: float = 0.01) -> Mode:
        """Largest-weight mode; weights within ``tie`` (relative) go to the smaller ``|Delta|``."""
        if not self.modes:
            raise NoSignalError("no modes were retained")
        top = max(m.weight for m in self.modes)
        close = [m for m in self.modes if m.weight >= (1 - tie) * top]
        return min(close, key=lambda m: abs(m.frequency))

    def as_rows(self) -> list[tuple[float, float, float, float, float]]:
        return [(m.weight, m.frequency, m.decay, m.amplitude.real, m.amplitude.imag) for m in self.modes]

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# residual={self.residual!r}\n# converged={self.converged}\n")
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(["weight", "delta", "alpha", "re_amp", "im_amp"])
            for row in self.as_rows():
                w.writerow([repr(float(x)) for x in row])


@dataclass(frozen=True)
class PencilConfig:
    """Hankel pencil shape.  ``l=None`` uses ``l = n // 2`` and ``rows = l + 1``."""

    l: int | None = None
    rows: int | None = None
    num_modes: int | None = None
    rank_threshold: float = 1e-10

    def resolve(self, n: int) -> tuple[int, int]:
        l = self.l if self.l is not None else n // 2
        rows = self.rows if self.rows is not None else l + 1
        if l < 1 or rows < 2 or l + rows - 1 > n:
            raise InsufficientDataError(f"pencil with l={l}, rows={rows} needs {l + rows - 1} samples, have {n}")
        return l, rows

    @classmethod
    def for_series(cls, ts: "TimeSeries") -> "PencilConfig":
        """Default pencil for ``ts``: relative rank threshold ``1/sqrt(shots)`` for sampled data."""
        try:
            shots = int(float(ts.metadata.get("shots") or 0))
        except (TypeError, ValueError):
            shots = 0
        return cls(rank_threshold=1.0 / np.sqrt(shots)) if shots > 0 else cls()


def model_values(modes: list[Mode], steps: np.ndarray, dt: float) -> np.ndarray:
    t = np.asarray(steps) * dt
    out = np.zeros(t.shape, dtype=np.complex128)
    for m in modes:
        out += m.amplitude * np.exp(-(1j * m.frequency + m.decay) * t)
    return out


def _residual(ts: TimeSeries, modes: list[Mode]) -> float:
    return float(np.sum(np.abs(ts.values - model_values(modes, ts.steps, ts.dt)) ** 2))


def _fit_amplitudes(ts: TimeSeries, lam: np.ndarray) -> np.ndarray:
    z = lam[None, :] ** ts.steps[:, None]
    c, *_ = np.linalg.lstsq(z, ts.values, rcond=None)
    return c


def pencil_initial_guess(ts: TimeSeries, cfg: PencilConfig = PencilConfig()) -> SpectralEstimate:
    """Matrix-pencil modes.

    The Hankel data matrix ``Y[i, j] = s_{i + j}`` has ``rows`` rows and ``l``
    columns; ``A0`` drops its last row and ``A1`` its first.  ``A0`` is
    truncated by SVD at ``rank_threshold`` (relative), and the reduced
    eigenproblem ``S^-1 U^dagger A1 V`` yields ``lambda = exp(-(i Delta + alpha) dt)``.
    """
    if np.any(np.diff(ts.steps) != 1):
        raise ValueError("the pencil needs consecutive step indices")
    l, rows = cfg.resolve(len(ts))
    s = ts.values
    y = np.array([[s[i + j] for j in range(l)] for i in range(rows)])
    a0, a1 = y[:-1], y[1:]
    u, sv, vh = np.linalg.svd(a0, full_matrices=False)
    if sv[0] == 0:
        raise NoSignalError("the series is identically zero")
    r = int(np.sum(sv > cfg.rank_threshold * sv[0]))
    if cfg.num_modes is not None:
        r = min(r, cfg.num_modes)
    r = max(r, 1)
    red = (u[:, :r].conj().T @ a1 @ vh[:r].conj().T) / sv[:r, None]
    lam = np.linalg.eigvals(red)
    lam = lam[np.abs(lam) > 0]
    c = _fit_amplitudes(ts, lam)
    modes = [Mode(complex(cj), float(-np.angle(lj) / ts.dt), float(-np.log(abs(lj)) / ts.dt)) for cj, lj in zip(c, lam)]
    modes.sort(key=lambda m: -m.weight)
    return SpectralEstimate(modes, _residual(ts, modes), True, r)


def refine_fit(ts: TimeSeries, guess: SpectralEstimate, shared_decay: bool = True, max_iter: int = 500,
               gtol: float = 1e-12) -> SpectralEstimate:
    """Joint least-squares refinement of all modes.

    Parameters are the complex amplitudes, the frequencies and either one
    decay rate shared by all modes (``shared_decay``, the depolarizing
    picture) or one per mode.  A Levenberg-Marquardt solve starts from
    ``guess``; if it does not lower the residual, ``guess`` is returned with
    ``converged=False``.
    """
    if not guess.modes:
        raise NoSignalError("nothing to refine")
    k = len(guess.modes)
    t = ts.times
    y = ts.values
    if shared_decay:
        decays0 = np.array([guess.alpha])
    else:
        decays0 = np.array([m.decay for m in guess.modes])

    def unpack(p):
        re, im, freq = p[:k], p[k:2 * k], p[2 * k:3 * k]
        dec = p[3 * k:]
        dec = np.full(k, dec[0]) if shared_decay else dec
        return re + 1j * im, freq, dec

    def resid(p):
        amp, freq, dec = unpack(p)
        model = (amp[None, :] * np.exp(-(1j * freq[None, :] + dec[None, :]) * t[:, None])).sum(axis=1)
        d = y - model
        return np.concatenate([d.real, d.imag])

    p0 = np.concatenate([
        [m.amplitude.real for m in guess.modes],
        [m.amplitude.imag for m in guess.modes],
        [m.frequency for m in guess.modes],
        decays0,
    ])
    n_res = 2 * t.size
    method = "lm" if n_res >= p0.size else "trf"
    try:
        sol = least_squares(resid, p0, method=method, xtol=1e-15, ftol=1e-15, gtol=gtol, max_nfev=max_iter * (p0.size + 1))
        p, ok = sol.x, sol.status > 0
    except (ValueError, np.linalg.LinAlgError) as exc:
        log.debug("refinement failed: %s", exc)
        p, ok = p0, False
    amp, freq, dec = unpack(p)
    modes = [Mode(complex(a), float(f), float(d)) for a, f, d in zip(amp, freq, dec)]
    modes.sort(key=lambda m: -m.weight)
    res = _residual(ts, modes)
    if not np.isfinite(res) or res > guess.residual:
        return replace(guess, converged=False)
    return SpectralEstimate(modes, res, bool(ok), guess.rank)


def estimate_gap(ts: TimeSeries, cfg: PencilConfig | None = None, refine: bool = True,
                 shared_decay: bool = True) -> tuple[float, SpectralEstimate]:
    """Frequency of the dominant mode after pencil + refinement.

    Without ``cfg`` the pencil threshold follows the series' shot count.
    """
    cfg = cfg or PencilConfig.for_series(ts)
    est = pencil_initial_guess(ts, cfg)
    if refine:
        est = refine_fit(ts, est, shared_decay=shared_decay)
    return est.dominant().frequency, est


def gap_trace(ts: TimeSeries, reference: float | None = None, cfg: PencilConfig | None = None,
              min_samples: int = 4, refine: bool = True) -> list[tuple[int, float]]:
    """Gap estimate (minus ``reference`` if given) using samples up to each step."""
    out = []
    for n in range(min_samples, len(ts) + 1):
        try:
            g, _ = estimate_gap(ts.head(n), cfg, refine)
        except (InsufficientDataError, NoSignalError):
            continue
        out.append((int(ts.steps[n - 1]), g - reference if reference is not None else g))
    return out


def collect_series(measure: Callable[[int], tuple[float, float, float, float]], dt: float, max_steps: int = 50,
                   stop_threshold: float | None = None, a0sq: float = 0.5, window: int = EARLY_STOP_WINDOW,
                   metadata: dict | None = None) -> TimeSeries:
    """Measure steps ``1..max_steps`` until the signal disappears.

    ``measure(r)`` returns ``(m(0), m(pi/2), m(pi), m(3pi/2))`` at step ``r``.
    With a ``stop_threshold`` the run ends after ``window`` consecutive steps
    with ``|s| < stop_threshold``; the sub-threshold samples are kept.
    """
    steps, vals = [], []
    below = 0
    reason = "max_steps"
    for r in range(1, max_steps + 1):
        m0, mh, mp, m3 = measure(r)
        s = combine_signal(m0, mh, mp, m3, a0sq)
        steps.append(r)
        vals.append(s)
        if stop_threshold is not None:
            below = below + 1 if abs(s) < stop_threshold else 0
            if below >= window:
                reason = "no_signal"
                break
    meta = dict(metadata or {})
    meta["stop_reason"] = reason
    return TimeSeries(dt, np.array(steps, dtype=int), np.array(vals), a0sq, meta)


def shot_threshold(shots: int | None) -> float | None:
    """Early-stop threshold ``4 / sqrt(shots)``; None in exact mode."""
    return None if shots is None else 4.0 / np.sqrt(shots)


class MatrixPencilEstimator(BaseEstimator):
    """Estimator facade: ``fit`` on a ``TimeSeries`` (or steps + values), ``predict`` model values.

    Fitted attributes: ``estimate_``, ``gap_``, ``alpha_``, ``modes_``.
    """

    def __init__(self, dt: float = 0.05, rank_threshold: float = 1e-10, num_modes: int | None = None, refine: bool = True,
                 shared_decay: bool = True):
        self.dt = dt
        self.rank_threshold = rank_threshold
        self.num_modes = num_modes
        self.refine = refine
        self.shared_decay = shared_decay

    def _series(self, X, y=None) -> TimeSeries:
        if isinstance(X, TimeSeries):
            return X
        steps = np.asarray(X).reshape(-1)
        if y is None:
            raise ValueError("pass a TimeSeries or (steps, values)")
        return TimeSeries(self.dt, steps, check_complex_series(y, "y", 2))

    def fit(self, X, y=None):
        ts = self._series(X, y)
        cfg = PencilConfig(num_modes=self.num_modes, rank_threshold=self.rank_threshold)
        self.gap_, self.estimate_ = estimate_gap(ts, cfg, self.refine, self.shared_decay)
        self.alpha_ = self.estimate_.alpha
        self.modes_ = list(self.estimate_.modes)
        self.dt_ = ts.dt
        return self

    def predict(self, X):
        check_fitted(self, "estimate_")
        steps = X.steps if isinstance(X, TimeSeries) else np.asarray(X).reshape(-1)
        return model_values(self.modes_, steps, self.dt_)

    def score(self, X, y=None) -> float:
        """Negative mean squared deviation on the given samples."""
        ts = self._series(X, y)
        return -float(np.mean(np.abs(ts.values - self.predict(ts)) ** 2))
