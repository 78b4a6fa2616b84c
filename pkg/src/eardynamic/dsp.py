"""Waveform primitives: probe chirp, band separation, chirp-period framing, WAV I/O."""

from __future__ import annotations

import enum
import wave
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import signal

from .errors import ConfigurationError, EmptyInputError

DEFAULT_SAMPLE_RATE = 48000
PCM_SCALE = 32768.0


def _frozen(x: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    x.flags.writeable = False
    return x


@dataclass(frozen=True)
class ProbeConfig:
    f_start: float = 16000.0
    f_end: float = 23000.0
    chirp_duration: float = 0.010
    guard_gap: float = 0.002
    sample_rate: int = DEFAULT_SAMPLE_RATE
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ConfigurationError(f"sample_rate must be positive, got {self.sample_rate}")
        nyquist = self.sample_rate / 2
        if not 0 < self.f_start:
            raise ConfigurationError(f"f_start must be > 0, got {self.f_start}")
        if not self.f_start < self.f_end:
            raise ConfigurationError(f"f_start ({self.f_start}) must be < f_end ({self.f_end})")
        if not self.f_end < nyquist:
            raise ConfigurationError(f"f_end ({self.f_end}) must be < sample_rate/2 ({nyquist})")
        if not self.chirp_duration > 0:
            raise ConfigurationError(f"chirp_duration must be > 0, got {self.chirp_duration}")
        if not self.guard_gap >= 0:
            raise ConfigurationError(f"guard_gap must be >= 0, got {self.guard_gap}")
        if not 0 < self.amplitude <= 1:
            raise ConfigurationError(f"amplitude must be in (0, 1], got {self.amplitude}")

    @property
    def chirp_samples(self) -> int:
        return int(round(self.chirp_duration * self.sample_rate))

    @property
    def period_samples(self) -> int:
        return int(round((self.chirp_duration + self.guard_gap) * self.sample_rate))


@dataclass(frozen=True, eq=False)
class ProbeSignal:
    """One chirp period: the sweep followed by guard-gap silence."""

    config: ProbeConfig
    samples: np.ndarray

    @property
    def period(self) -> int:
        return len(self.samples)

    def spectrum(self) -> np.ndarray:
        return np.fft.rfft(self.samples)

    def repeated(self, n_periods: int) -> np.ndarray:
        return np.tile(self.samples, n_periods)


class ChannelRole(enum.Enum):
    MIXED = "mixed"
    INAUDIBLE_ONLY = "inaudible"
    AUDIBLE_ONLY = "audible"


@dataclass(frozen=True, eq=False)
class Recording:
    sample_rate: int
    samples: np.ndarray
    channel_role: ChannelRole = ChannelRole.MIXED

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen(self.samples))

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class BandSplitConfig:
    cutoff: float = 15000.0
    stopband_attenuation: float = 60.0
    transition_width: float = 1000.0

    def __post_init__(self):
        if not self.cutoff > 0:
            raise ConfigurationError(f"cutoff must be > 0, got {self.cutoff}")
        if not self.stopband_attenuation > 0:
            raise ConfigurationError("stopband_attenuation must be > 0 dB")
        if not self.transition_width > 0:
            raise ConfigurationError("transition_width must be > 0 Hz")


@dataclass(frozen=True)
class Frame:
    start: int
    samples: np.ndarray = field(repr=False, compare=False)


def synthesize_probe(config: ProbeConfig) -> ProbeSignal:
    """Linear chirp from ``f_start`` to ``f_end`` starting at zero phase, then silence."""
    n_chirp = config.chirp_samples
    t = np.arange(n_chirp) / config.sample_rate
    sweep_rate = (config.f_end - config.f_start) / config.chirp_duration
    phase = 2.0 * np.pi * (config.f_start * t + 0.5 * sweep_rate * t * t)
    samples = np.zeros(config.period_samples)
    samples[:n_chirp] = config.amplitude * np.sin(phase)
    return ProbeSignal(config, _frozen(samples))


@lru_cache(maxsize=16)
def highpass_taps(cfg: BandSplitConfig, sample_rate: int) -> np.ndarray:
    """Odd-length Kaiser-window linear-phase high-pass design."""
    nyquist = sample_rate / 2
    if not cfg.cutoff < nyquist:
        raise ConfigurationError(f"cutoff ({cfg.cutoff}) must be < sample_rate/2 ({nyquist})")
    if cfg.cutoff + cfg.transition_width / 2 >= nyquist or cfg.cutoff - cfg.transition_width / 2 <= 0:
        raise ConfigurationError("transition band does not fit between 0 and sample_rate/2")
    numtaps, beta = signal.kaiserord(cfg.stopband_attenuation, cfg.transition_width / nyquist)
    numtaps |= 1  # type I: required for a high-pass with a delta complement
    taps = signal.firwin(numtaps, cfg.cutoff, window=("kaiser", beta), pass_zero=False, fs=sample_rate)
    return _frozen(taps)


def split_bands(rec: Recording, cfg: BandSplitConfig = BandSplitConfig()) -> tuple[Recording, Recording]:
    """High-pass / complementary low-pass split, delay-compensated to the input timeline.

    The low-pass branch is ``delta - highpass`` so the two outputs sum to the
    input exactly.
    """
    if rec.channel_role is not ChannelRole.MIXED:
        raise ConfigurationError(f"split_bands expects a MIXED recording, got {rec.channel_role.name}")
    taps = highpass_taps(cfg, rec.sample_rate)
    delay = (len(taps) - 1) // 2
    x = rec.samples
    if len(x) == 0:
        high = np.zeros(0)
    else:
        high = signal.oaconvolve(x, taps)[delay:delay + len(x)]
    low = x - high
    return (
        Recording(rec.sample_rate, high, ChannelRole.INAUDIBLE_ONLY),
        Recording(rec.sample_rate, low, ChannelRole.AUDIBLE_ONLY),
    )


def frame_chirp_periods(rec: Recording, probe: ProbeSignal) -> list[Frame]:
    if rec.channel_role is not ChannelRole.INAUDIBLE_ONLY:
        raise ConfigurationError(f"framing expects an INAUDIBLE_ONLY recording, got {rec.channel_role.name}")
    if rec.sample_rate != probe.config.sample_rate:
        raise ConfigurationError(
            f"recording sample rate {rec.sample_rate} != probe sample rate {probe.config.sample_rate}")
    period = probe.period
    n_frames = len(rec.samples) // period
    if n_frames == 0:
        raise EmptyInputError(f"recording has {len(rec.samples)} samples, shorter than one period ({period})")
    return [Frame(i * period, rec.samples[i * period:(i + 1) * period]) for i in range(n_frames)]


def read_wav(path) -> Recording:
    with wave.open(str(path), "rb") as wf:
        if wf.getnchannels() != 1:
            raise ConfigurationError(f"{path}: expected mono WAV, got {wf.getnchannels()} channels")
        if wf.getsampwidth() != 2:
            raise ConfigurationError(f"{path}: expected 16-bit PCM, got {8 * wf.getsampwidth()}-bit")
        rate = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2")
    return Recording(rate, pcm.astype(np.float64) / PCM_SCALE, ChannelRole.MIXED)


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    scaled = np.round(np.asarray(samples, dtype=np.float64) * PCM_SCALE)
    return np.clip(scaled, -32768, 32767).astype("<i2")


def write_wav(path, rec: Recording) -> None:
    pcm = to_pcm16(rec.samples)
    with wave.open(str(Path(path)), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(rec.sample_rate))
        wf.writeframes(pcm.tobytes())
