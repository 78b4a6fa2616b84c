"""Enrollment templates, boosted per-key similarity stumps, decisions and metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import FeatureVector, similarity
from .errors import (ContractError, InsufficientEnrollmentError, NoEvidenceError, ShapeError,
                     TrainingError)
from .motion import POSTURES, HeadPosture, MotionState
from .phonemes import DeformationCategory

log = logging.getLogger(__name__)

MIN_ENROLL_SAMPLES = 3
EPS_CLAMP = 1e-6
TIE_TOL = 1e-12


@dataclass(frozen=True)
class TemplateKey:
    """``category=None`` is the STATIC (no speech) key."""

    category: DeformationCategory | None
    posture: HeadPosture = HeadPosture.FORWARD

    def __post_init__(self):
        if self.category is DeformationCategory.EXCLUDED:
            raise ContractError("EXCLUDED phonemes have no template key")

    @property
    def is_static(self) -> bool:
        return self.category is None

    @property
    def category_token(self) -> str:
        return "STATIC" if self.category is None else self.category.short

    @classmethod
    def from_tokens(cls, category: str, posture: str) -> TemplateKey:
        cat = None if category == "STATIC" else DeformationCategory.from_short(category)
        return cls(cat, HeadPosture[posture])

    def sort_key(self) -> tuple[int, int]:
        return (0 if self.category is None else self.category.index, POSTURES.index(self.posture))

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    def __str__(self):
        return f"{self.category_token}/{self.posture.name}"


def static_key(posture: HeadPosture = HeadPosture.FORWARD) -> TemplateKey:
    return TemplateKey(None, posture)


@dataclass(frozen=True)
class TemplateEntry:
    mean: FeatureVector
    n_samples: int
    mu_w: float
    sigma_w: float


@dataclass(frozen=True)
class UserTemplate:
    user_id: str
    band: tuple[float, float]
    bin_hz: float
    entries: dict = field(default_factory=dict)
    skipped_keys: int = field(default=0, compare=False)

    def keys(self) -> list[TemplateKey]:
        return sorted(self.entries)

    def score(self, key: TemplateKey, feature: FeatureVector) -> float:
        return similarity(feature, self.entries[key].mean)


@dataclass(frozen=True)
class WeakClassifier:
    key: TemplateKey
    threshold: float

    def predict(self, sim: float) -> int:
        return 1 if sim >= self.threshold else -1


@dataclass(frozen=True)
class BoostRound:
    weak: WeakClassifier
    alpha: float
    error: float


@dataclass(frozen=True)
class BoostedClassifier:
    rounds: tuple[BoostRound, ...]

    @property
    def offset(self) -> float:
        """Half the total vote weight; the margin on a {0, 1} vote convention."""
        return 0.5 * sum(r.alpha for r in self.rounds)

    @property
    def keys(self) -> set[TemplateKey]:
        return {r.weak.key for r in self.rounds}


@dataclass(frozen=True)
class AuthDecision:
    accept: bool
    score: float
    segments_used: int
    template_keys_used: tuple[TemplateKey, ...]


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    recall: float
    precision: float
    f1: float
    roc: list
    auc: float
    counts: dict

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy, "recall": self.recall, "precision": self.precision, "f1": self.f1,
            "auc": self.auc, "roc": [list(p) for p in self.roc], "counts": dict(self.counts),
        }


def select_template_key(state: MotionState, has_speech: bool,
                        category: DeformationCategory | None = None) -> TemplateKey:
    """Speaking selects the category template, silence the STATIC one; posture always from the IMU."""
    if has_speech and category is None:
        raise ContractError("speech segment without a deformation category")
    if not has_speech and category is not None:
        raise ContractError("category given for a non-speech window")
    return TemplateKey(category if has_speech else None, state.posture)


def enroll(user_id: str, samples) -> UserTemplate:
    """Per-key mean feature (renormalized) with within-class similarity statistics."""
    groups: dict[TemplateKey, list[FeatureVector]] = {}
    for key, feat in samples:
        groups.setdefault(key, []).append(feat)
    if not groups:
        raise InsufficientEnrollmentError("no enrollment samples")
    first = next(iter(groups.values()))[0]
    entries = {}
    skipped = 0
    for key in sorted(groups):
        feats = groups[key]
        for f in feats:
            if not f.compatible_with(first):
                raise ShapeError(f"enrollment feature for {key} does not match band {first.band}")
        if len(feats) < MIN_ENROLL_SAMPLES:
            skipped += 1
            log.warning("skipping key %s: %d samples < %d", key, len(feats), MIN_ENROLL_SAMPLES)
            continue
        stacked = np.array([f.values for f in feats])
        mean = stacked.mean(axis=0)
        mean -= mean.mean()
        norm = np.linalg.norm(mean)
        if norm <= 1e-12:
            raise InsufficientEnrollmentError(f"enrollment samples for {key} cancel out")
        mean_fv = FeatureVector(mean / norm, first.band, first.bin_hz)
        sims = np.array([similarity(f, mean_fv) for f in feats])
        entries[key] = TemplateEntry(mean_fv, len(feats), float(sims.mean()), float(sims.std()))
    if not entries:
        raise InsufficientEnrollmentError(f"every key has fewer than {MIN_ENROLL_SAMPLES} samples")
    return UserTemplate(user_id, first.band, first.bin_hz, entries, skipped)


def candidate_thresholds(sims) -> np.ndarray:
    values = np.unique(np.asarray(sims, dtype=np.float64))
    return (values[:-1] + values[1:]) / 2.0


def _best_stump(keys_order, key_idx, sims, y, w):
    """Lowest weighted error over all (key, threshold) stumps; ties keep the earlier candidate.

    Samples of other keys abstain and count half an error each.
    """
    best = None
    total = w.sum()
    for k, key in enumerate(keys_order):
        mask = key_idx == k
        if not mask.any():
            continue
        s, yk, wk = sims[mask], y[mask], w[mask]
        outside = total - wk.sum()
        for theta in candidate_thresholds(s):
            wrong = wk[(s >= theta) != (yk > 0)].sum()
            err = wrong + 0.5 * outside
            if best is None or err < best[0] - TIE_TOL:
                best = (err, key, float(theta))
    return best


def train_boosted(template: UserTemplate, positives, negatives, n_rounds: int | None = None) -> BoostedClassifier:
    """Discrete adaptive boosting over per-key similarity stumps.

    A stump votes only on samples with its own key and abstains (vote 0)
    elsewhere, so its weighted error charges half of every abstention.
    ``n_rounds`` defaults to one round per key present in the data.
    """
    positives, negatives = list(positives), list(negatives)
    if not positives or not negatives:
        raise TrainingError("boosting needs at least one positive and one negative sample")
    samples = [(k, f, 1.0) for k, f in positives] + [(k, f, -1.0) for k, f in negatives]
    for key, _, _ in samples:
        if key not in template.entries:
            raise ContractError(f"training sample key {key} is not enrolled")
    keys_order = sorted({k for k, _, _ in samples})
    index = {k: i for i, k in enumerate(keys_order)}
    key_idx = np.array([index[k] for k, _, _ in samples])
    sims = np.array([template.score(k, f) for k, f, _ in samples])
    y = np.array([lab for _, _, lab in samples])
    if n_rounds is None:
        n_rounds = len(keys_order)
    w = np.full(len(samples), 1.0 / len(samples))
    rounds = []
    for _ in range(n_rounds):
        best = _best_stump(keys_order, key_idx, sims, y, w)
        if best is None:
            break
        raw_err, key, theta = best
        if raw_err >= 0.5 - TIE_TOL:
            break
        err = min(max(raw_err, EPS_CLAMP), 0.5 - EPS_CLAMP)
        alpha = 0.5 * math.log((1.0 - err) / err)
        rounds.append(BoostRound(WeakClassifier(key, theta), alpha, err))
        h = np.where(key_idx == index[key], np.where(sims >= theta, 1.0, -1.0), 0.0)
        w = w * np.exp(-alpha * y * h)
        w /= w.sum()
        if raw_err <= EPS_CLAMP:
            break
    if not rounds:
        raise TrainingError("no stump does better than chance on the training data")
    return BoostedClassifier(tuple(rounds))


def training_error(template: UserTemplate, classifier: BoostedClassifier, positives, negatives) -> float:
    samples = [(k, f, 1.0) for k, f in positives] + [(k, f, -1.0) for k, f in negatives]
    wrong = 0
    for key, feat, label in samples:
        s = template.score(key, feat)
        score = sum(r.alpha * r.weak.predict(s) for r in classifier.rounds if r.weak.key == key)
        wrong += (1.0 if score >= 0 else -1.0) != label
    return wrong / len(samples)


def boosting_bound(classifier: BoostedClassifier) -> float:
    return float(np.prod([2.0 * math.sqrt(r.error * (1.0 - r.error)) for r in classifier.rounds]))


def authenticate(template: UserTemplate, classifier: BoostedClassifier, session) -> AuthDecision:
    """Boosted margin ``sum_t alpha_t * mean vote_t`` over the session's matching features."""
    session = list(session)
    if not session:
        raise ContractError("empty session")
    sims: dict[TemplateKey, list[float]] = {}
    for key, feat in session:
        if key in template.entries:
            sims.setdefault(key, []).append(template.score(key, feat))
    score = 0.0
    used = set()
    for rnd in classifier.rounds:
        values = sims.get(rnd.weak.key)
        if not values:
            continue
        used.add(rnd.weak.key)
        score += rnd.alpha * float(np.mean([rnd.weak.predict(s) for s in values]))
    if not used:
        raise NoEvidenceError("no session feature matches a trained template key")
    n_segments = sum(len(sims[k]) for k in used)
    return AuthDecision(score >= 0.0, score, n_segments, tuple(sorted(used)))


def roc_curve(genuine, impostor) -> list[tuple[float, float, float]]:
    """(threshold, TAR, FAR) with accept iff score >= threshold, thresholds ascending.

    The first and last thresholds sit below and above every score, giving
    the (1, 1) and (0, 0) endpoints.
    """
    g = np.sort(np.asarray(genuine, dtype=np.float64))
    im = np.sort(np.asarray(impostor, dtype=np.float64))
    levels = np.unique(np.concatenate([g, im]))
    span = max(1.0, float(levels[-1] - levels[0]))
    thresholds = np.concatenate([[levels[0] - span], levels, [levels[-1] + span]])
    g_acc = len(g) - np.searchsorted(g, thresholds, side="left")
    i_acc = len(im) - np.searchsorted(im, thresholds, side="left")
    return [(float(t), int(a) / len(g), int(b) / len(im)) for t, a, b in zip(thresholds, g_acc, i_acc)]


def _auc(genuine, impostor) -> float:
    """Trapezoid area under the ROC; integer arithmetic makes ties count exactly 1/2."""
    g = np.sort(np.asarray(genuine, dtype=np.float64))
    im = np.sort(np.asarray(impostor, dtype=np.float64))
    levels = np.unique(np.concatenate([g, im]))
    thresholds = np.concatenate([levels, [np.inf]])
    g_acc = [int(len(g) - np.searchsorted(g, t, side="left")) for t in thresholds]
    i_acc = [int(len(im) - np.searchsorted(im, t, side="left")) for t in thresholds]
    twice_area = sum((i_acc[k] - i_acc[k + 1]) * (g_acc[k] + g_acc[k + 1]) for k in range(len(thresholds) - 1))
    return twice_area / (2 * len(g) * len(im))


def evaluate(genuine_scores, impostor_scores, decision_threshold: float = 0.0) -> EvalReport:
    """Confusion metrics at one threshold (genuine = positive class) plus the full ROC."""
    genuine = np.asarray(list(genuine_scores), dtype=np.float64)
    impostor = np.asarray(list(impostor_scores), dtype=np.float64)
    if genuine.size == 0 or impostor.size == 0:
        raise ContractError("evaluation needs non-empty genuine and impostor score lists")
    tp = int(np.sum(genuine >= decision_threshold))
    fn = genuine.size - tp
    fp = int(np.sum(impostor >= decision_threshold))
    tn = impostor.size - fp
    accuracy = (tp + tn) / (genuine.size + impostor.size)
    recall = tp / (tp + fn)
    precision = tp / (tp + fp) if tp + fp else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    counts = {"tp": tp, "fn": fn, "fp": fp, "tn": tn,
              "genuine": int(genuine.size), "impostor": int(impostor.size)}
    return EvalReport(accuracy, recall, precision, f1, roc_curve(genuine, impostor),
                      _auc(genuine, impostor), counts)


def tar_at_far(report: EvalReport, max_far: float) -> float:
    return max((tar for _, tar, far in report.roc if far <= max_far), default=0.0)
