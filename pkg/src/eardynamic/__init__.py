"""Ear-canal deformation authentication: probe chirps, channel responses, phoneme templates, boosting."""

from .auth import (AuthDecision, BoostedClassifier, EvalReport, TemplateKey, UserTemplate, authenticate, enroll,
                   evaluate, select_template_key, train_boosted)
from .channel import ChannelResponse, FeatureVector, estimate_response, similarity, to_feature
from .dsp import BandSplitConfig, ChannelRole, ProbeConfig, ProbeSignal, Recording, frame_chirp_periods, \
    split_bands, synthesize_probe
from .motion import HeadPosture, ImuSample, MotionState, classify_posture
from .phonemes import DeformationCategory, PhonemeSegment, align_segments, categorize_phoneme, parse_annotations
from .pipeline import extract_session_features

__version__ = "0.1.0"
