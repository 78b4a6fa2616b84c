"""Synthetic ear canals: population sampling, tube-lattice reflections, session synthesis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dsp import ChannelRole, ProbeSignal, Recording
from .errors import ModelError
from .motion import HeadPosture, synthetic_trace
from .phonemes import (CATEGORIES, EXCLUDED_EXAMPLES, PHONEME_TABLE, DeformationCategory, PhonemeSegment,
                       categorize_phoneme)

SPEED_OF_SOUND = 343.0
N_SECTIONS = 8
CROSSFADE = 0.020

LENGTH_RANGE = (14.20e-3, 29.36e-3)
AREA_RANGE = (25e-6, 70e-6)
VOLUME_RANGE = (372e-9, 1400e-9)
VOLUME_CHANGE_RANGE = (-10e-9, 25e-9)
MAX_DIAMETER_CHANGE = 2.5e-3
PORT_AREA_RANGE = (8e-6, 16e-6)

DEFORMATION_KINDS = ("compress", "expand", "none")
DEFORMATION_PROBS = (0.25, 0.67, 0.08)

# Relative jaw travel per category; scales the subject's net volume change.
JAW_OPENING = {
    DeformationCategory.C1_TongueForwardJawSlight: 0.3,
    DeformationCategory.C2_TongueLowerJawWide: 1.0,
    DeformationCategory.C3_TongueBackRaiseJawSlight: 0.3,
    DeformationCategory.C4_TongueBackJawModerate: 0.6,
    DeformationCategory.C5_TongueRaisedFricativeJawWide: 1.0,
    DeformationCategory.C6_TongueRaisedJawSlight: 0.3,
    DeformationCategory.C7_TongueFricativeJawSlight: 0.3,
}

PATTERN_AMPLITUDE = 0.15
SUBJECT_PATTERN_AMPLITUDE = 0.08
POSTURE_AMPLITUDE = 0.05
_PATTERN_SEED = 20210901


def _orthonormal_zero_mean(n_vectors: int, dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    basis = [np.ones(dim) / math.sqrt(dim)]
    out = []
    while len(out) < n_vectors:
        v = rng.normal(size=dim)
        for b in basis:
            v = v - np.dot(v, b) * b
        v /= np.linalg.norm(v)
        basis.append(v)
        out.append(v)
    return np.array(out)


# Fixed per-category shape directions: orthonormal, zero-mean, so categories
# are separable by construction.
CATEGORY_PATTERNS = _orthonormal_zero_mean(len(CATEGORIES), N_SECTIONS, _PATTERN_SEED)
CATEGORY_PATTERNS = CATEGORY_PATTERNS / np.abs(CATEGORY_PATTERNS).max(axis=1, keepdims=True)
POSTURE_PATTERNS = {
    p: v / np.abs(v).max()
    for p, v in zip([p for p in HeadPosture if p is not HeadPosture.FORWARD],
                    _orthonormal_zero_mean(4, N_SECTIONS, _PATTERN_SEED + 1))
}


@dataclass(frozen=True, eq=False)
class EarCanalModel:
    length: float
    section_areas: np.ndarray
    eardrum_reflection: float
    wall_loss: float
    entrance_area: float | None = None  # earbud port; None means matched to section 0

    def __post_init__(self):
        areas = np.array(self.section_areas, dtype=np.float64)
        areas.flags.writeable = False
        object.__setattr__(self, "section_areas", areas)
        if not self.length > 0:
            raise ModelError(f"canal length must be positive, got {self.length}")
        if np.any(areas <= 0):
            raise ModelError("section areas must be positive")
        if not 0 < self.eardrum_reflection < 1:
            raise ModelError(f"eardrum reflection must be in (0, 1), got {self.eardrum_reflection}")
        if not 0 < self.wall_loss <= 1:
            raise ModelError(f"wall loss must be in (0, 1], got {self.wall_loss}")
        if self.entrance_area is not None and not self.entrance_area > 0:
            raise ModelError(f"entrance area must be positive, got {self.entrance_area}")

    @property
    def n_sections(self) -> int:
        return len(self.section_areas)

    @property
    def volume(self) -> float:
        return float(np.sum(self.section_areas) * self.length / self.n_sections)

    def diameters(self, areas=None) -> np.ndarray:
        a = self.section_areas if areas is None else np.asarray(areas)
        return np.sqrt(4.0 * a / math.pi)


@dataclass(frozen=True, eq=False)
class DeformationProfile:
    kind: str
    volume_change: float  # m^3, net change at full jaw opening
    shape_scale: float
    deltas: np.ndarray  # (7, K) fractional area change per category

    def for_category(self, category: DeformationCategory) -> np.ndarray:
        if category is DeformationCategory.EXCLUDED:
            return np.zeros(self.deltas.shape[1])
        return self.deltas[category.index - 1]


@dataclass(frozen=True, eq=False)
class SimSubject:
    id: str
    canal: EarCanalModel
    deformation: DeformationProfile
    posture_offsets: dict = field(repr=False)
    rng_seed: int = 0

    def areas(self, category: DeformationCategory | None, posture: HeadPosture = HeadPosture.FORWARD,
              deformation: bool = True) -> np.ndarray:
        delta = np.array(self.posture_offsets[posture])
        if deformation and category is not None:
            delta = delta + self.deformation.for_category(category)
        return self.canal.section_areas * (1.0 + delta)


def subject_seed(population_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([population_seed, index]).generate_state(1)[0])


def _sample_canal(rng: np.random.Generator) -> EarCanalModel:
    while True:
        length = rng.normal(22.0e-3, 3.0e-3)
        if not LENGTH_RANGE[0] <= length <= LENGTH_RANGE[1]:
            continue
        mean_area = rng.uniform(32e-6, 60e-6)
        walk = np.cumsum(rng.normal(0.0, 0.12, N_SECTIONS))
        walk -= walk.mean()
        areas = mean_area * np.exp(walk)
        if np.any(areas < AREA_RANGE[0]) or np.any(areas > AREA_RANGE[1]):
            continue
        volume = areas.sum() * length / N_SECTIONS
        if not VOLUME_RANGE[0] <= volume <= VOLUME_RANGE[1]:
            continue
        return EarCanalModel(
            length=float(length),
            section_areas=areas,
            eardrum_reflection=float(rng.uniform(0.55, 0.9)),
            wall_loss=float(rng.uniform(0.97, 0.995)),
            entrance_area=float(rng.uniform(*PORT_AREA_RANGE)),
        )


def _volume_neutral(delta: np.ndarray, areas: np.ndarray) -> np.ndarray:
    return delta - np.dot(areas, delta) / areas.sum()


def _sample_deformation(rng: np.random.Generator, canal: EarCanalModel) -> DeformationProfile:
    kind = DEFORMATION_KINDS[rng.choice(3, p=DEFORMATION_PROBS)]
    if kind == "compress":
        volume_change = -rng.uniform(3e-9, 10e-9)
    elif kind == "expand":
        volume_change = rng.uniform(5e-9, 25e-9)
    else:
        volume_change = 0.0
    areas = canal.section_areas
    scale = rng.uniform(0.6, 1.0)
    rows = []
    for i, category in enumerate(CATEGORIES):
        own = rng.normal(0.0, 1.0, N_SECTIONS)
        own = SUBJECT_PATTERN_AMPLITUDE * own / np.abs(own).max()
        shape = _volume_neutral(scale * (PATTERN_AMPLITUDE * CATEGORY_PATTERNS[i] + own), areas)
        uniform = JAW_OPENING[category] * volume_change / canal.volume
        rows.append(shape + uniform)
    deltas = np.array(rows)
    deltas.flags.writeable = False
    return DeformationProfile(kind, float(volume_change), float(scale), deltas)


def _sample_posture_offsets(rng: np.random.Generator) -> dict:
    offsets = {HeadPosture.FORWARD: np.zeros(N_SECTIONS)}
    for posture, pattern in POSTURE_PATTERNS.items():
        own = rng.normal(0.0, 0.5, N_SECTIONS)
        offsets[posture] = POSTURE_AMPLITUDE * (pattern + own - own.mean())
    for v in offsets.values():
        v.flags.writeable = False
    return offsets


def make_subject(population_seed: int, index: int) -> SimSubject:
    seed = subject_seed(population_seed, index)
    rng = np.random.default_rng(seed)
    canal = _sample_canal(rng)
    deformation = _sample_deformation(rng, canal)
    offsets = _sample_posture_offsets(rng)
    return SimSubject(f"s{index:03d}", canal, deformation, offsets, seed)


def sample_population(n: int, seed: int) -> list[SimSubject]:
    """``n`` subjects, each regenerable from ``(seed, index)`` alone."""
    if n < 1:
        raise ValueError(f"population size must be >= 1, got {n}")
    return [make_subject(seed, i) for i in range(n)]


def lattice_reflection(areas, eardrum_reflection: float, wall_loss: float, n_steps: int,
                       entrance_area: float | None = None) -> np.ndarray:
    """Entrance reflection of a concatenated-tube lattice in section-time units.

    Step ``n`` is ``n`` one-way section delays after a unit pulse arrives at
    the entrance. Pressure-wave scattering with
    ``r_k = (A_k - A_{k+1}) / (A_k + A_{k+1})``; the entrance junction joins the
    earbud port (``entrance_area``, matched when ``None``) to section 0 and
    the eardrum reflects with ``eardrum_reflection``.
    """
    a = [float(x) for x in areas]
    K = len(a)
    r = [(a[k] - a[k + 1]) / (a[k] + a[k + 1]) for k in range(K - 1)]
    r0 = 0.0 if entrance_area is None else (entrance_area - a[0]) / (entrance_area + a[0])
    g = float(wall_loss)
    fwd = [0.0] * K  # entered section k at its left end one step ago
    bwd = [0.0] * K  # entered section k at its right end one step ago
    out = np.zeros(n_steps)
    for n in range(n_steps):
        fa = [g * x for x in fwd]
        ba = [g * x for x in bwd]
        pulse = 1.0 if n == 0 else 0.0
        out[n] = r0 * pulse + (1.0 - r0) * ba[0]
        new_f = [0.0] * K
        new_b = [0.0] * K
        new_f[0] = (1.0 + r0) * pulse - r0 * ba[0]
        for j, rj in enumerate(r):
            new_f[j + 1] = (1.0 + rj) * fa[j] - rj * ba[j + 1]
            new_b[j] = rj * fa[j] + (1.0 - rj) * ba[j + 1]
        new_b[K - 1] = eardrum_reflection * fa[K - 1]
        fwd, bwd = new_f, new_b
    return out


def section_delay(length: float, n_sections: int) -> float:
    return length / n_sections / SPEED_OF_SOUND


def impulse_response(canal: EarCanalModel, deformed_areas=None, sample_rate: int = 48000,
                     n_taps: int = 64) -> np.ndarray:
    """Sampled entrance reflection; lattice arrivals are rendered band-limited at their exact delays."""
    areas = canal.section_areas if deformed_areas is None else np.asarray(deformed_areas, dtype=np.float64)
    if len(areas) != canal.n_sections:
        raise ModelError(f"expected {canal.n_sections} areas, got {len(areas)}")
    if np.any(~np.isfinite(areas)) or np.any(areas <= 0):
        raise ModelError("deformed areas must be positive and finite")
    min_taps = 2 * round(canal.length / SPEED_OF_SOUND * sample_rate)
    if n_taps < min_taps:
        raise ModelError(f"n_taps={n_taps} cannot hold the eardrum echo (need >= {min_taps})")
    step = section_delay(canal.length, canal.n_sections) * sample_rate
    n_steps = int(math.ceil(n_taps / step)) + 1
    lattice = lattice_reflection(areas, canal.eardrum_reflection, canal.wall_loss, n_steps, canal.entrance_area)
    return render_arrivals(lattice, step, n_taps)


def render_arrivals(amplitudes, step: float, n_taps: int) -> np.ndarray:
    """Band-limited placement of arrivals at times ``n * step`` samples.

    Each arrival contributes a sinc centred on its exact delay; an arrival on
    an integer delay reduces to a single tap.
    """
    amplitudes = np.asarray(amplitudes, dtype=np.float64)
    delays = np.arange(len(amplitudes)) * step
    m = np.arange(n_taps)[:, None]
    return np.sinc(m - delays[None, :]) @ amplitudes


def _trapezoid(t: np.ndarray, a: float, b: float, width: float, first: bool, last: bool) -> np.ndarray:
    rise = np.ones_like(t) if first else np.clip((t - a) / width + 0.5, 0.0, 1.0)
    fall = np.zeros_like(t) if last else np.clip((t - b) / width + 0.5, 0.0, 1.0)
    return rise - fall


def deformation_track(subject: SimSubject, script, posture: HeadPosture, times: np.ndarray,
                      lead: float = 0.0, deformation: bool = True) -> np.ndarray:
    """Per-time section areas with linear cross-fades of ``CROSSFADE`` centred on boundaries.

    The trapezoid weights telescope, so they form a partition of unity.
    """
    entries = []
    t0 = 0.0
    if lead > 0:
        entries.append((None, 0.0, lead))
        t0 = lead
    for category, duration in script:
        if not duration > 0:
            raise ModelError(f"script durations must be > 0, got {duration}")
        if category is not None and not isinstance(category, DeformationCategory):
            raise ModelError(f"unknown category {category!r}")
        entries.append((category, t0, t0 + duration))
        t0 += duration
    if not entries:
        return np.tile(subject.areas(None, posture), (len(times), 1))
    out = np.zeros((len(times), subject.canal.n_sections))
    for i, (category, a, b) in enumerate(entries):
        w = _trapezoid(times, a, b, CROSSFADE, i == 0, i == len(entries) - 1)
        if np.any(w):
            cat = None if category is DeformationCategory.EXCLUDED else category
            out += w[:, None] * subject.areas(cat, posture, deformation)
    return out


def synthesize_reflection(subject: SimSubject, probe: ProbeSignal, script, posture: HeadPosture = HeadPosture.FORWARD,
                          snr_db: float | None = 30.0, seed: int = 0, lead: float = 0.0,
                          deformation: bool = True, n_taps: int = 64) -> Recording:
    """Reflection of a back-to-back probe train from a deforming canal, plus white noise.

    ``script`` is a sequence of ``(category, duration)``; ``None`` or
    ``EXCLUDED`` entries leave the canal undeformed. ``lead`` seconds of
    undeformed canal precede the script. With ``deformation=False`` every
    entry uses the static geometry (replica attack).
    """
    script = list(script)
    fs = probe.config.sample_rate
    total = lead + sum(d for _, d in script)
    if script == [] and lead == 0:
        raise ModelError("nothing to synthesize: empty script and no lead")
    period = probe.period
    n_periods = int(math.ceil(total * fs / period - 1e-9))
    centres = (np.arange(n_periods) * period + period / 2) / fs
    track = deformation_track(subject, script, posture, centres, lead, deformation)

    cache: dict[bytes, np.ndarray] = {}
    out = np.zeros(n_periods * period + n_taps - 1)
    for i in range(n_periods):
        areas = track[i]
        key = areas.tobytes()
        ir = cache.get(key)
        if ir is None:
            ir = impulse_response(subject.canal, areas, fs, n_taps)
            cache[key] = ir
        out[i * period:i * period + period + n_taps - 1] += np.convolve(probe.samples, ir)
    clean = out[:n_periods * period]
    if snr_db is not None:
        rng = np.random.default_rng(seed)
        rms = math.sqrt(float(np.mean(clean ** 2)))
        clean = clean + rng.normal(0.0, rms * 10 ** (-snr_db / 20.0), clean.shape)
    return Recording(fs, clean, ChannelRole.INAUDIBLE_ONLY)


# --- whole sessions -------------------------------------------------------

LEAD_SILENCE = 0.24
PHONEME_DURATION = (0.13, 0.20)
FILLER_DURATION = (0.04, 0.07)
SPEECH_LEVEL = 0.08
PROBE_LEVEL = 0.5


@dataclass(frozen=True)
class SimSession:
    recording: Recording
    segments: list
    trace: list
    categories: tuple


def session_seed(population_seed: int, subject_index: int, role: str, index: int) -> int:
    role_code = {"enroll": 1, "test": 2, "attack": 3}[role]
    return int(np.random.SeedSequence([population_seed, subject_index, role_code, index]).generate_state(1)[0])


def make_script(rng: np.random.Generator, categories) -> list:
    """Annotated segments: one categorized phoneme per category, each followed by an excluded filler.

    Times start after ``LEAD_SILENCE`` of unannotated silence.
    """
    t = LEAD_SILENCE
    segments = []
    for category in categories:
        labels = PHONEME_TABLE[category]
        d = round(float(rng.uniform(*PHONEME_DURATION)), 3)
        segments.append(PhonemeSegment(labels[rng.integers(len(labels))], round(t, 3), round(t + d, 3)))
        t += d
        d = round(float(rng.uniform(*FILLER_DURATION)), 3)
        filler = EXCLUDED_EXAMPLES[rng.integers(len(EXCLUDED_EXAMPLES))]
        segments.append(PhonemeSegment(filler, round(t, 3), round(t + d, 3)))
        t += d
    return segments


def synthesize_speech(segments, n_samples: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    """Voiced-sounding harmonic bursts below 4 kHz standing in for the audible channel."""
    out = np.zeros(n_samples)
    f0 = rng.uniform(100.0, 220.0)
    for seg in segments:
        a, b = round(seg.start * sample_rate), min(round(seg.end * sample_rate), n_samples)
        if b <= a:
            continue
        t = np.arange(b - a) / sample_rate
        harmonics = np.arange(1, int(4000 // f0) + 1)
        amps = rng.uniform(0.2, 1.0, len(harmonics)) / harmonics
        phases = rng.uniform(0, 2 * np.pi, len(harmonics))
        burst = (amps[:, None] * np.sin(2 * np.pi * f0 * harmonics[:, None] * t + phases[:, None])).sum(axis=0)
        burst *= np.hanning(b - a) * SPEECH_LEVEL / max(np.abs(burst).max(), 1e-12)
        out[a:b] += burst
    return out


def synthesize_session(subject: SimSubject, probe: ProbeSignal, categories, posture: HeadPosture,
                       snr_db: float, seed: int, deformation: bool = True) -> SimSession:
    """Mixed recording (reflection + speech), phoneme annotations and an IMU trace for one session."""
    rng = np.random.default_rng(seed)
    segments = make_script(rng, categories)
    script = []
    for seg in segments:
        cat = categorize_phoneme(seg.label)
        script.append((None if cat is DeformationCategory.EXCLUDED else cat, seg.end - seg.start))
    lead = segments[0].start if segments else LEAD_SILENCE
    reflection = synthesize_reflection(subject, probe, script, posture, snr_db,
                                       seed=int(rng.integers(2**32)), lead=lead, deformation=deformation)
    n = len(reflection.samples)
    speech = synthesize_speech(segments, n, probe.config.sample_rate, rng)
    mixed = Recording(probe.config.sample_rate, reflection.samples + speech, ChannelRole.MIXED)
    trace = synthetic_trace(posture, n / probe.config.sample_rate, jitter=0.02, rng=rng)
    return SimSession(mixed, segments, trace, tuple(categories))
