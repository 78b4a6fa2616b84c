"""Population evaluation: per-user enrollment, boosting, genuine/impostor/attack scoring."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .auth import (BoostedClassifier, EvalReport, UserTemplate, authenticate, enroll, evaluate,
                   tar_at_far, train_boosted)
from .errors import ContractError, NoEvidenceError
from .motion import HeadPosture
from .phonemes import CATEGORIES
from .pipeline import SessionFeatures, extract_session_features
from .sim import sample_population, session_seed, synthesize_session

log = logging.getLogger(__name__)

DEFAULT_SWEEP = (1, 2, 3, 4, 5)


@dataclass
class SubjectData:
    """Extracted features for one subject's enrollment, test and (optional) attack sessions."""

    user_id: str
    enroll: list[SessionFeatures]
    test: list[SessionFeatures]
    attack: list[SessionFeatures] = field(default_factory=list)

    def enrollment_samples(self):
        return [kf for s in self.enroll for kf in s.features]


@dataclass
class UserModel:
    template: UserTemplate
    classifier: BoostedClassifier


@dataclass(frozen=True)
class PopulationReport:
    report: EvalReport
    sweep: dict[int, float]
    per_user_accuracy: dict[str, float]
    attack_far: float | None
    attack_frr: float | None
    tar_at_far_05: float
    no_evidence: int

    def to_dict(self) -> dict:
        out = self.report.to_dict()
        out["phoneme_sweep"] = {str(p): acc for p, acc in sorted(self.sweep.items())}
        out["per_user_accuracy"] = dict(sorted(self.per_user_accuracy.items()))
        out["tar_at_far_0.05"] = self.tar_at_far_05
        out["no_evidence_sessions"] = self.no_evidence
        if self.attack_far is not None:
            out["attack"] = {"far": self.attack_far, "genuine_frr": self.attack_frr}
        return out


def train_user(subject: SubjectData, others, n_rounds: int | None = None) -> UserModel:
    """Template from the subject's enrollment; negatives are every other subject's enrollment features."""
    template = enroll(subject.user_id, subject.enrollment_samples())
    negatives = [(k, f) for o in others for k, f in o.enrollment_samples() if k in template.entries]
    positives = [(k, f) for k, f in subject.enrollment_samples() if k in template.entries]
    return UserModel(template, train_boosted(template, positives, negatives, n_rounds))


def session_score(model: UserModel, features) -> float | None:
    """Boosted margin, or None when nothing in the session matches a trained key."""
    features = list(features)
    if not features:
        return None
    try:
        return authenticate(model.template, model.classifier, features).score
    except NoEvidenceError:
        return None


def _floor_score(model: UserModel) -> float:
    # A session with no usable evidence is scored as a unanimous reject.
    return -sum(r.alpha for r in model.classifier.rounds)


def _scores(model: UserModel, sessions, select) -> tuple[list[float], int]:
    out, missing = [], 0
    for s in sessions:
        score = session_score(model, select(s))
        if score is None:
            missing += 1
            score = _floor_score(model)
        out.append(score)
    return out, missing


def evaluate_population(subjects: list[SubjectData], sweep=DEFAULT_SWEEP,
                        n_rounds: int | None = None) -> PopulationReport:
    """Leave-sessions-out evaluation: every subject's test sessions are genuine for that subject
    and impostor for every other subject. Speech features only; the sweep keeps the first ``p``
    categories of each test session.
    """
    if len(subjects) < 2:
        raise ContractError("evaluation needs at least two subjects")
    sweep = tuple(sorted(set(sweep)))
    if not sweep or sweep[0] < 1:
        raise ContractError("phoneme sweep values must be >= 1")
    models = {}
    for i, subj in enumerate(subjects):
        models[subj.user_id] = train_user(subj, subjects[:i] + subjects[i + 1:], n_rounds)

    full = max(sweep)
    per_p = {p: [] for p in sweep}
    all_gen, all_imp = [], []
    per_user = {}
    no_evidence = 0
    atk_scores, atk_gen = [], []
    for i, subj in enumerate(subjects):
        model = models[subj.user_id]
        others = [o for j, o in enumerate(subjects) if j != i]
        for p in sweep:
            sel = (lambda s, p=p: s.first_categories(p))
            gen, m1 = _scores(model, subj.test, sel)
            imp, m2 = _scores(model, [s for o in others for s in o.test], sel)
            rep = evaluate(gen, imp)
            per_p[p].append(rep.accuracy)
            if p == full:
                all_gen += gen
                all_imp += imp
                per_user[subj.user_id] = rep.accuracy
                no_evidence += m1 + m2
                if subj.attack:
                    atk, _ = _scores(model, subj.attack, sel)
                    atk_scores += atk
                    atk_gen += gen
    report = evaluate(all_gen, all_imp)
    sweep_acc = {p: float(np.mean(v)) for p, v in per_p.items()}
    attack_far = attack_frr = None
    if atk_scores:
        attack_far = float(np.mean(np.asarray(atk_scores) >= 0.0))
        attack_frr = float(np.mean(np.asarray(atk_gen) < 0.0))
    return PopulationReport(report, sweep_acc, per_user, attack_far, attack_frr,
                            tar_at_far(report, 0.05), no_evidence)


# ---- simulated populations ---------------------------------------------------------------

@dataclass(frozen=True)
class SimulationPlan:
    n_subjects: int
    seed: int
    snr_db: float = 30.0
    phonemes_per_session: int = 5
    n_enroll: int = 3
    n_test: int = 4
    n_attack: int = 0
    posture: HeadPosture = HeadPosture.FORWARD

    def __post_init__(self):
        if self.n_subjects < 2:
            raise ContractError("need at least two subjects (impostors come from other subjects)")
        if not 1 <= self.phonemes_per_session <= len(CATEGORIES):
            raise ContractError(f"phonemes per session must be in [1, {len(CATEGORIES)}]")
        if self.n_enroll < 3:
            raise ContractError("need at least three enrollment sessions")


def test_categories(rng: np.random.Generator, p: int):
    """``p`` distinct categories in random order."""
    return tuple(CATEGORIES[i] for i in rng.permutation(len(CATEGORIES))[:p])


def plan_sessions(plan: SimulationPlan, index: int):
    """(role, k, categories, seed) for every session of subject ``index``; enrollment covers all categories."""
    out = []
    for k in range(plan.n_enroll):
        out.append(("enroll", k, CATEGORIES, session_seed(plan.seed, index, "enroll", k)))
    for role, n in (("test", plan.n_test), ("attack", plan.n_attack)):
        for k in range(n):
            seed = session_seed(plan.seed, index, role, k)
            cats = test_categories(np.random.default_rng(seed), plan.phonemes_per_session)
            out.append((role, k, cats, seed))
    return out


def simulate_subject_sessions(plan: SimulationPlan, index: int, probe):
    """Yield (role, k, SimSession) for one subject; attack sessions have deformation disabled."""
    subject = sample_population(plan.n_subjects, plan.seed)[index]
    for role, k, cats, seed in plan_sessions(plan, index):
        yield role, k, synthesize_session(subject, probe, cats, plan.posture, plan.snr_db, seed,
                                          deformation=(role != "attack"))


def _simulate_features(args) -> SubjectData:
    plan, index, probe = args
    data = SubjectData(f"S{index:03d}", [], [], [])
    for role, _, sess in simulate_subject_sessions(plan, index, probe):
        feats = extract_session_features(sess.recording, sess.segments, sess.trace, probe)
        getattr(data, role).append(feats)
    return data


def simulate_features(plan: SimulationPlan, probe, jobs: int = 1) -> list[SubjectData]:
    """In-memory feature extraction for a simulated population (no files written)."""
    args = [(plan, i, probe) for i in range(plan.n_subjects)]
    if jobs <= 1:
        return [_simulate_features(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_simulate_features, args))
