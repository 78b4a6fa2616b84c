"""Recording + annotations + IMU trace -> keyed channel-response features."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .auth import TemplateKey, select_template_key
from .channel import DEFAULT_REGULARIZATION, FeatureVector, estimate_mean_response, to_feature
from .dsp import BandSplitConfig, ChannelRole, ProbeConfig, ProbeSignal, Recording, frame_chirp_periods, \
    split_bands, synthesize_probe
from .errors import DegenerateFeatureError, InsufficientDataError, InvalidTraceError
from .motion import HeadPosture, MotionState, classify_posture
from .phonemes import align_segments, static_frames

log = logging.getLogger(__name__)

MIN_STATIC_FRAMES = 3


@dataclass(frozen=True)
class SessionFeatures:
    features: tuple[tuple[TemplateKey, FeatureVector], ...]
    motion: MotionState | None
    dropped_segments: int
    static_frame_count: int

    def speech(self) -> list[tuple[TemplateKey, FeatureVector]]:
        return [(k, f) for k, f in self.features if not k.is_static]

    def static(self) -> list[tuple[TemplateKey, FeatureVector]]:
        return [(k, f) for k, f in self.features if k.is_static]

    def first_categories(self, n: int) -> list[tuple[TemplateKey, FeatureVector]]:
        """Speech features restricted to the first ``n`` distinct categories in time order."""
        seen = []
        out = []
        for key, feat in self.speech():
            if key.category not in seen:
                if len(seen) == n:
                    continue
                seen.append(key.category)
            out.append((key, feat))
        return out


def default_probe(sample_rate: int) -> ProbeSignal:
    return synthesize_probe(ProbeConfig(sample_rate=sample_rate))


def extract_session_features(recording: Recording, segments, trace, probe: ProbeSignal | None = None,
                             band_split: BandSplitConfig = BandSplitConfig(),
                             regularization: float = DEFAULT_REGULARIZATION,
                             min_static_frames: int = MIN_STATIC_FRAMES) -> SessionFeatures:
    """Split, frame, estimate and key one session.

    Each categorized segment yields one feature from the mean response over
    its frames. Unannotated frames yield a STATIC feature, but only when the
    IMU trace is usable; without a trace speech keys fall back to FORWARD.
    """
    probe = probe if probe is not None else default_probe(recording.sample_rate)
    if recording.channel_role is ChannelRole.MIXED:
        inaudible, _ = split_bands(recording, band_split)
    else:
        inaudible = recording
    frames = frame_chirp_periods(inaudible, probe)
    starts = [f.start for f in frames]
    fs = recording.sample_rate
    aligned, dropped = align_segments(segments, starts, probe.period, fs)

    try:
        state = classify_posture(trace)
    except (InsufficientDataError, InvalidTraceError) as exc:
        log.info("no usable IMU trace (%s); speech keys default to FORWARD", exc)
        state = None
    key_state = state if state is not None else MotionState(HeadPosture.FORWARD, False)

    features = []
    n_static = 0
    if state is not None:
        idle = static_frames(segments, starts, probe.period, fs)
        n_static = len(idle)
        if n_static >= min_static_frames:
            H = estimate_mean_response([frames[i].samples for i in idle], probe, regularization)
            try:
                features.append((select_template_key(state, False), to_feature(H)))
            except DegenerateFeatureError:
                log.warning("static window has a degenerate response; skipped")
    for seg in aligned:
        H = estimate_mean_response([frames[i].samples for i in seg.frames], probe, regularization)
        try:
            feat = to_feature(H)
        except DegenerateFeatureError:
            dropped += 1
            continue
        features.append((select_template_key(key_state, True, seg.category), feat))
    return SessionFeatures(tuple(features), state, dropped, n_static)
