"""Measurement-side reductions: flux calibration, decay detection, lifetimes."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

DEBOUNCE = 3
SPREAD_LIMIT = 0.05
# minimum separation of the two trace levels, in units of the within-level spread
BIMODAL_SEPARATION = 5.0


class CalibrationQualityWarning(UserWarning):
    """Jump spacings on different branches disagree by more than the limit."""


class AmbiguousTraceWarning(UserWarning):
    """A trace has no clear two-level structure."""


# flux calibration ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JumpBranch:
    """Jump voltages (V) of one sweep, in the order they were met.

    ``direction`` is +1 for increasing voltage, -1 for decreasing.
    """

    direction: int
    jump_voltages: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.jump_voltages, float)
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if v.ndim != 1 or v.size < 2:
            raise ValueError("each branch needs at least two jumps to estimate a period")
        if np.any(np.diff(v) * self.direction <= 0):
            raise ValueError("jump voltages must be ordered along the sweep direction")
        object.__setattr__(self, "jump_voltages", v)


@dataclass(frozen=True, eq=False)
class CalibrationInput:
    branches: tuple

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        dirs = {b.direction for b in self.branches}
        if dirs != {1, -1}:
            raise ValueError("calibration needs at least one branch in each direction")


@dataclass(frozen=True)
class CalibrationResult:
    volts_per_phi0: float
    zero_offset_volts: float
    period_se: float
    offset_se: float
    spacing_spread: float
    warnings: tuple = ()

    def flux_of(self, voltage):
        return (np.asarray(voltage, float) - self.zero_offset_volts) / self.volts_per_phi0

    def to_dict(self):
        return {
            "volts_per_phi0": self.volts_per_phi0,
            "zero_offset_volts": self.zero_offset_volts,
            "period_se": self.period_se,
            "offset_se": self.offset_se,
            "spacing_spread": self.spacing_spread,
            "warnings": list(self.warnings),
        }


def find_jump_voltages(voltage, frequency, min_step):
    """Voltages where the resonance snaps back up by more than ``min_step`` GHz.

    Each jump is placed midway between the two samples that bracket it.
    """
    v = np.asarray(voltage, float)
    f = np.asarray(frequency, float)
    if v.shape != f.shape or v.ndim != 1:
        raise ValueError("voltage and frequency must be 1-D arrays of equal length")
    idx = np.flatnonzero(np.diff(f) > min_step)
    return 0.5 * (v[idx] + v[idx + 1])


def calibrate_flux(data):
    """Voltage period of the flux jumps and the voltage of zero flux.

    The period is the pooled mean spacing of same-direction jumps.  The
    zero offset is the midpoint of the first jump of the increasing and the
    decreasing sweeps, which sit symmetrically about zero flux.  Standard
    errors use the jitter estimated from residuals of a common-slope line
    through every branch.
    """
    if not isinstance(data, CalibrationInput):
        data = CalibrationInput(data)
    spans = []
    gaps = []
    xs, ys, groups = [], [], []
    for g, br in enumerate(data.branches):
        v = br.jump_voltages
        spans.append(abs(v[-1] - v[0]))
        gaps.append(v.size - 1)
        xs.append(np.arange(v.size) * br.direction)
        ys.append(v)
        groups.append(np.full(v.size, g))
    period = float(np.sum(spans) / np.sum(gaps))

    x = np.concatenate(xs)
    y = np.concatenate(ys)
    grp = np.concatenate(groups)
    xc = x - np.array([x[grp == g].mean() for g in grp])
    yc = y - np.array([y[grp == g].mean() for g in grp])
    sxx = float(np.sum(xc * xc))
    slope = float(np.sum(xc * yc) / sxx)
    resid = yc - slope * xc
    dof = x.size - len(data.branches) - 1
    sigma = float(np.sqrt(np.sum(resid**2) / dof)) if dof > 0 else np.nan
    period_se = sigma * np.sqrt(2 * len(spans)) / np.sum(gaps) if dof > 0 else np.nan

    firsts = {1: [], -1: []}
    for br in data.branches:
        firsts[br.direction].append(br.jump_voltages[0])
    up, down = np.mean(firsts[1]), np.mean(firsts[-1])
    offset = 0.5 * (up + down)
    offset_se = 0.5 * sigma * np.sqrt(1 / len(firsts[1]) + 1 / len(firsts[-1]))

    spacing = [abs(s) / n for s, n in zip(spans, gaps)]
    spread = float((max(spacing) - min(spacing)) / period)
    notes = []
    if spread > SPREAD_LIMIT:
        msg = f"jump spacings differ by {100 * spread:.1f}% between branches"
        notes.append(msg)
        warnings.warn(msg, CalibrationQualityWarning, stacklevel=2)
    return CalibrationResult(period, float(offset), float(period_se), float(offset_se), spread,
                             tuple(notes))


# single-shot traces --------------------------------------------------------


@dataclass(frozen=True)
class MeasurementProtocol:
    """Reference and readout settings of a lifetime run (GHz, flux quanta)."""

    f_ref: float
    phi_ref: float
    delta_phi: float
    f_rout: float
    threshold: float | None = None

    def __post_init__(self):
        if self.f_ref == self.f_rout:
            raise ValueError("f_ref and f_rout must differ")
        if not self.delta_phi > 0:
            raise ValueError("delta_phi must be positive")


@dataclass(frozen=True, eq=False)
class ShotTrace:
    times: np.ndarray
    s21: np.ndarray
    delta_phi: float | None = None
    run_id: str | None = None

    def __post_init__(self):
        t = np.asarray(self.times, float)
        s = np.asarray(self.s21, float)
        if t.ndim != 1 or t.shape != s.shape or t.size < 2:
            raise ValueError("times and s21 must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "s21", s)

    @property
    def window(self):
        return float(self.times[-1] - self.times[0])


@dataclass(frozen=True)
class LifetimeSample:
    duration: float
    censored: bool


def two_level_split(values):
    """Two-means split of ``values``.

    Returns ``(threshold, low_mean, high_mean, separation)`` where the
    separation is the gap between the means over the pooled within-level
    standard deviation (``inf`` for noise-free levels).
    """
    v = np.sort(np.asarray(values, float))
    lo, hi = v[0], v[-1]
    if lo == hi:
        return float(lo), float(lo), float(hi), 0.0
    thr = 0.5 * (lo + hi)
    for _ in range(100):
        a, b = v[v <= thr], v[v > thr]
        new = 0.5 * (a.mean() + b.mean())
        if new == thr:
            break
        thr = new
    a, b = v[v <= thr], v[v > thr]
    within = np.sqrt((np.sum((a - a.mean()) ** 2) + np.sum((b - b.mean()) ** 2)) / v.size)
    sep = np.inf if within == 0 else (b.mean() - a.mean()) / within
    return float(thr), float(a.mean()), float(b.mean()), float(sep)


def detect_decay(trace, protocol, debounce=DEBOUNCE):
    """Time until the readout transmission first rises through the threshold.

    A decay into the lower valley brings the resonance onto the readout
    frequency, so transmission goes from the low to the high level.  The
    crossing must persist for ``debounce`` consecutive samples.  Without a
    crossing the sample is censored at the trace window.
    """
    if debounce < 1:
        raise ValueError("debounce must be at least 1")
    s = trace.s21
    thr = protocol.threshold
    thr_fit, low, high, sep = two_level_split(s)
    bimodal = sep >= BIMODAL_SEPARATION and np.sum(s > thr_fit) >= debounce
    if thr is None:
        if not bimodal:
            warnings.warn(f"trace {trace.run_id!r} shows no two-level structure",
                          AmbiguousTraceWarning, stacklevel=2)
            return LifetimeSample(trace.window, True)
        thr = thr_fit
    elif bimodal and not low < thr < high:
        raise ValueError(f"threshold {thr} is not between the trace levels {low:.4g} and {high:.4g}")

    above = s > thr
    if debounce > 1:
        run = np.convolve(above.astype(int), np.ones(debounce, int), mode="valid") == debounce
    else:
        run = above
    hits = np.flatnonzero(run)
    if hits.size == 0:
        return LifetimeSample(trace.window, True)
    return LifetimeSample(float(trace.times[hits[0]] - trace.times[0]), False)


@dataclass(frozen=True, eq=False)
class LifetimeHistogram:
    edges: np.ndarray
    counts: np.ndarray
    censored_count: int
    total: int

    @property
    def censored_fraction(self):
        return self.censored_count / self.total

    def rows(self):
        return [(lo, hi, int(c)) for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts)]


def lifetime_histogram(samples, bins=10, window=None):
    """Histogram of decay times with censored samples counted separately.

    ``bins`` is a count of equal-width bins over ``[0, window]`` or an
    explicit edge array.  ``window`` defaults to the longest duration.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("need at least one sample")
    dur = np.array([s.duration for s in samples], float)
    cens = np.array([s.censored for s in samples], bool)
    if np.ndim(bins) == 0:
        top = float(window if window is not None else dur.max())
        edges = np.linspace(0.0, top if top > 0 else 1.0, int(bins) + 1)
    else:
        edges = np.asarray(bins, float)
    counts, _ = np.histogram(dur[~cens], bins=edges)
    return LifetimeHistogram(edges, counts, int(cens.sum()), len(samples))


@dataclass(frozen=True)
class NoiseModel:
    """Two transmission levels with additive Gaussian noise."""

    low: float = 0.2
    high: float = 1.0
    sigma: float = 0.02


def synthesize_traces(rate, window, n, noise=NoiseModel(), dt=1.0, seed=0):
    """Traces that switch from the low to the high level at exponential times.

    All decay times are drawn before any noise, so the decay times for a
    given seed do not depend on the noise model or the sampling.
    """
    if rate < 0:
        raise ValueError("rate must be non-negative")
    if not (window > 0 and dt > 0):
        raise ValueError("window and dt must be positive")
    rng = np.random.default_rng(seed)
    decay = rng.exponential(1 / rate, n) if rate > 0 else np.full(n, np.inf)
    times = np.arange(int(round(window / dt)) + 1) * dt
    out = []
    for i, td in enumerate(decay):
        level = np.where(times >= td, noise.high, noise.low)
        s = level + noise.sigma * rng.standard_normal(times.size)
        out.append(ShotTrace(times, s, run_id=f"synthetic-{i}"))
    return out
