"""Ear-canal channel response estimation and the log-magnitude feature built from it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dsp import ProbeSignal
from .errors import DegenerateFeatureError, DegenerateProbeError, ShapeError

DEFAULT_REGULARIZATION = 1e-3
LOG_FLOOR = -12.0
MIN_FEATURE_BINS = 8


def band_bins(band: tuple[float, float], bin_hz: float) -> np.ndarray:
    """DFT bin indices whose centre frequencies lie in the closed band."""
    f_low, f_high = band
    lo = math.ceil(f_low / bin_hz - 1e-9)
    hi = math.floor(f_high / bin_hz + 1e-9)
    return np.arange(lo, hi + 1)


@dataclass(frozen=True, eq=False)
class ChannelResponse:
    band: tuple[float, float]
    bin_hz: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128)
        if not np.all(np.isfinite(values)):
            raise ShapeError("channel response contains non-finite values")
        expected = len(band_bins(self.band, self.bin_hz))
        if len(values) != expected:
            raise ShapeError(f"{len(values)} bins given, band {self.band} at {self.bin_hz} Hz needs {expected}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def frequencies(self) -> np.ndarray:
        return band_bins(self.band, self.bin_hz) * self.bin_hz

    def scaled(self, factor: float) -> ChannelResponse:
        return ChannelResponse(self.band, self.bin_hz, self.values * factor)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    band: tuple[float, float]
    bin_hz: float

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "band", (float(self.band[0]), float(self.band[1])))
        object.__setattr__(self, "bin_hz", float(self.bin_hz))

    def __len__(self):
        return len(self.values)

    def compatible_with(self, other: FeatureVector) -> bool:
        return self.band == other.band and self.bin_hz == other.bin_hz and len(self) == len(other)

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self.compatible_with(other) and np.array_equal(self.values, other.values)

    __hash__ = None


def estimate_response(frame, probe: ProbeSignal, regularization: float = DEFAULT_REGULARIZATION) -> ChannelResponse:
    """Regularized spectral division of one chirp-period frame by the probe.

    ``H = R conj(P) / (|P|^2 + eps * max|P|^2)`` on the in-band DFT bins.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 1 or len(frame) != probe.period:
        raise ShapeError(f"frame length {frame.shape} does not match probe period {probe.period}")
    if not regularization > 0:
        raise ValueError(f"regularization must be > 0, got {regularization}")
    cfg = probe.config
    bin_hz = cfg.sample_rate / probe.period
    band = (cfg.f_start, cfg.f_end)
    k = band_bins(band, bin_hz)
    P = probe.spectrum()[k]
    power = np.abs(P) ** 2
    peak = power.max() if len(power) else 0.0
    if not peak > 0:
        raise DegenerateProbeError("probe has no energy in its own band")
    R = np.fft.rfft(frame)[k]
    H = R * np.conj(P) / (power + regularization * peak)
    return ChannelResponse(band, bin_hz, H)


def estimate_mean_response(frames, probe: ProbeSignal, regularization: float = DEFAULT_REGULARIZATION) -> ChannelResponse:
    """Response of the frame average; equals the mean of per-frame estimates (linearity)."""
    frames = [np.asarray(f, dtype=np.float64) for f in frames]
    if not frames:
        raise ShapeError("no frames to average")
    return estimate_response(np.mean(frames, axis=0), probe, regularization)


def log_magnitude_feature(magnitudes) -> np.ndarray:
    logmag = _floored_log(np.abs(np.asarray(magnitudes)))
    centered = logmag - logmag.mean()
    norm = np.linalg.norm(centered)
    if norm <= 1e-12 * max(1.0, np.abs(logmag).max()):
        raise DegenerateFeatureError("log-magnitude has zero variance")
    return centered / norm


def _floored_log(mag: np.ndarray) -> np.ndarray:
    out = np.full(mag.shape, LOG_FLOOR, dtype=np.float64)
    nz = mag > 0
    out[nz] = np.maximum(np.log10(mag[nz]), LOG_FLOOR)
    return out


def to_feature(H: ChannelResponse) -> FeatureVector:
    """Mean-removed, unit-norm in-band log10 magnitude (phase discarded)."""
    if len(H.values) < MIN_FEATURE_BINS:
        raise ShapeError(f"need at least {MIN_FEATURE_BINS} bins, got {len(H.values)}")
    return FeatureVector(log_magnitude_feature(H.values), H.band, H.bin_hz)


def similarity(a: FeatureVector, b: FeatureVector) -> float:
    """Pearson correlation of two compatible feature vectors."""
    if not a.compatible_with(b):
        raise ShapeError(
            f"incompatible features: band {a.band}/{b.band}, bin {a.bin_hz}/{b.bin_hz}, len {len(a)}/{len(b)}")
    x = a.values - a.values.mean()
    y = b.values - b.values.mean()
    denom = np.linalg.norm(x) * np.linalg.norm(y)
    if denom == 0:
        raise DegenerateFeatureError("correlation undefined for a constant vector")
    return float(np.clip(np.dot(x, y) / denom, -1.0, 1.0))
