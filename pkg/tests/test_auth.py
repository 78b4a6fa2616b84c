import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from authkit import BAND, BIN, basis, feature_with_similarity, key, make_template, oracle_boost
from eardynamic.auth import (TemplateKey, UserTemplate, authenticate, boosting_bound, enroll, evaluate,
                             roc_curve, select_template_key, tar_at_far, train_boosted, training_error)
from eardynamic.channel import ChannelResponse, FeatureVector, to_feature
from eardynamic.errors import (ContractError, InsufficientEnrollmentError, NoEvidenceError, ShapeError,
                               TrainingError)
from eardynamic.motion import HeadPosture, MotionState
from eardynamic.phonemes import DeformationCategory as C

# Toy datasets: (key index, similarity, label).
TOY_SEPARABLE = [(1, 0.9, 1), (1, 0.8, 1), (1, 0.3, -1), (1, 0.2, -1)]
TOY_TWO_KEYS = [(1, 0.9, 1), (1, 0.7, 1), (1, 0.4, -1), (2, 0.95, 1), (2, 0.5, -1), (2, 0.2, -1)]
TOY_NOISY = [(0, 0.92, 1), (0, 0.85, 1), (0, 0.88, -1), (0, 0.4, -1),
             (3, 0.7, 1), (3, 0.65, -1), (3, 0.75, 1), (3, 0.1, -1), (3, 0.72, -1),
             (5, 0.3, 1), (5, 0.35, 1), (5, 0.5, -1)]


def build(dataset, seed=0):
    keys = sorted({key(i) for i, _, _ in dataset})
    template, dirs = make_template(keys, seed)
    pos, neg, raw = [], [], []
    for i, s, y in dataset:
        f = feature_with_similarity(dirs, key(i), s)
        (pos if y > 0 else neg).append((key(i), f))
        raw.append((key(i), template.score(key(i), f), y))
    return template, pos, neg, raw


def samples_in_training_order(template, pos, neg):
    return ([(k, template.score(k, f), 1) for k, f in pos] + [(k, template.score(k, f), -1) for k, f in neg])


@pytest.mark.parametrize("dataset", [TOY_SEPARABLE, TOY_TWO_KEYS, TOY_NOISY], ids=["separable", "two-keys", "noisy"])
def test_rounds_match_exhaustive_oracle(dataset):
    template, pos, neg, _ = build(dataset)
    clf = train_boosted(template, pos, neg, n_rounds=10)
    expected = oracle_boost(samples_in_training_order(template, pos, neg), 10)
    assert len(clf.rounds) == len(expected)
    for r, (k, theta, eps, alpha) in zip(clf.rounds, expected):
        assert r.weak.key == k
        assert r.weak.threshold == theta
        assert r.error == pytest.approx(eps, abs=1e-12)
        assert r.alpha == pytest.approx(alpha, abs=1e-9)
    assert training_error(template, clf, pos, neg) <= boosting_bound(clf) + 1e-12


def test_separable_single_round():
    template, pos, neg, _ = build(TOY_SEPARABLE)
    clf = train_boosted(template, pos, neg)
    assert len(clf.rounds) == 1
    r = clf.rounds[0]
    assert r.error == 1e-6
    assert r.weak.threshold == pytest.approx(0.55)
    assert training_error(template, clf, pos, neg) == 0


def test_two_keys_zero_error_within_three_rounds():
    template, pos, neg, _ = build(TOY_TWO_KEYS)
    clf = train_boosted(template, pos, neg, n_rounds=3)
    assert len(clf.rounds) <= 3
    assert training_error(template, clf, pos, neg) == 0
    # No single stump is perfect: the first round's error is above zero.
    assert clf.rounds[0].error > 1e-6


def test_default_rounds_one_per_key():
    template, pos, neg, _ = build(TOY_NOISY)
    clf = train_boosted(template, pos, neg)
    assert len(clf.rounds) <= 3


def test_invariants_alpha_eps():
    template, pos, neg, _ = build(TOY_NOISY)
    for r in train_boosted(template, pos, neg, 20).rounds:
        assert r.alpha > 0 and 0 < r.error < 0.5
    assert train_boosted(template, pos, neg, 5) == train_boosted(template, pos, neg, 5)


@given(st.lists(st.tuples(st.integers(0, 3), st.floats(-0.99, 0.99), st.sampled_from([-1, 1])),
                min_size=2, max_size=30), st.integers(1, 12))
def test_bound_holds(dataset, n_rounds):
    labels = {y for _, _, y in dataset}
    if labels != {-1, 1}:
        return
    template, pos, neg, _ = build(dataset)
    try:
        clf = train_boosted(template, pos, neg, n_rounds)
    except TrainingError:
        return
    assert training_error(template, clf, pos, neg) <= boosting_bound(clf) + 1e-12
    expected = oracle_boost(samples_in_training_order(template, pos, neg), n_rounds)
    assert [(r.weak.key, r.weak.threshold) for r in clf.rounds] == [(k, t) for k, t, _, _ in expected]


def test_training_errors():
    template, pos, neg, _ = build(TOY_SEPARABLE)
    with pytest.raises(TrainingError):
        train_boosted(template, pos, [])
    with pytest.raises(ContractError):
        train_boosted(template, pos, [(key(4), neg[0][1])])


class TestSelectKey:
    def test_examples(self):
        assert select_template_key(MotionState(HeadPosture.FORWARD, False), False) == TemplateKey(None)
        assert select_template_key(MotionState(HeadPosture.LEFT, True), True, C.C2_TongueLowerJawWide) == \
            TemplateKey(C.C2_TongueLowerJawWide, HeadPosture.LEFT)
        assert select_template_key(MotionState(HeadPosture.UP, False), False) == TemplateKey(None, HeadPosture.UP)

    def test_contract(self):
        with pytest.raises(ContractError):
            select_template_key(MotionState(HeadPosture.UP, False), True)
        with pytest.raises(ContractError):
            TemplateKey(C.EXCLUDED)

    def test_all_keys_valid(self):
        keys = {TemplateKey(c, p) for c in [None, *list(C)[1:]] for p in HeadPosture}
        assert len(keys) == 40
        assert all(TemplateKey.from_tokens(k.category_token, k.posture.name) == k for k in keys)


class TestEnroll:
    def fv(self, v):
        return FeatureVector(v, BAND, BIN)

    def test_identical(self):
        (x,) = basis(1, 1)
        t = enroll("a", [(key(1), self.fv(x))] * 3)
        e = t.entries[key(1)]
        assert np.allclose(e.mean.values, x)
        assert e.mu_w == pytest.approx(1.0) and e.sigma_w == pytest.approx(0.0, abs=1e-12)

    def test_x_negx_x(self):
        (x,) = basis(2, 1)
        t = enroll("a", [(key(1), self.fv(x)), (key(1), self.fv(-x)), (key(1), self.fv(x))])
        e = t.entries[key(1)]
        assert np.allclose(e.mean.values, x)
        assert e.mu_w == pytest.approx(1 / 3)
        assert e.sigma_w == pytest.approx(math.sqrt(8) / 3)

    def test_two_samples(self):
        (x,) = basis(3, 1)
        with pytest.raises(InsufficientEnrollmentError):
            enroll("a", [(key(1), self.fv(x))] * 2)

    def test_skip_count(self):
        x, y = basis(4)
        t = enroll("a", [(key(1), self.fv(x))] * 3 + [(key(2), self.fv(y))] * 2)
        assert t.keys() == [key(1)] and t.skipped_keys == 1

    def test_mean_unit_zero_mean(self, rng):
        feats = [(key(3), to_feature(ChannelResponse(BAND, BIN, rng.uniform(0.1, 1, 85)))) for _ in range(5)]
        m = enroll("a", feats).entries[key(3)].mean.values
        assert abs(np.linalg.norm(m) - 1) < 1e-12 and abs(m.mean()) < 1e-12

    def test_shape_mismatch(self):
        (x,) = basis(5, 1)
        with pytest.raises(ShapeError):
            enroll("a", [(key(1), self.fv(x))] * 3 + [(key(1), FeatureVector(x[:10], BAND, BIN))])


class TestAuthenticate:
    def setup_model(self, seed=0):
        r = np.random.default_rng(seed)
        bases = {k: r.uniform(0.2, 1.0, 85) for k in (key(0), key(1), key(2))}
        other = {k: r.uniform(0.2, 1.0, 85) for k in bases}

        def sample(table, k):
            return ChannelResponse(BAND, BIN, table[k] * (1 + 0.01 * r.normal(size=85)))

        pos = [(k, to_feature(sample(bases, k))) for k in bases for _ in range(3)]
        neg = [(k, to_feature(sample(other, k))) for k in bases for _ in range(3)]
        template = enroll("u", pos)
        return template, train_boosted(template, pos, neg), pos, neg, bases, sample

    def test_enrollment_session_accepts(self):
        template, clf, pos, _, _, _ = self.setup_model()
        d = authenticate(template, clf, pos)
        assert d.accept and d.score > 0 and d.segments_used >= 1

    def test_impostor_session_rejects(self):
        template, clf, _, neg, _, _ = self.setup_model()
        assert not authenticate(template, clf, neg).accept

    def test_no_evidence(self):
        template, clf, pos, _, _, _ = self.setup_model()
        with pytest.raises(NoEvidenceError):
            authenticate(template, clf, [(key(6), pos[0][1])])
        with pytest.raises(ContractError):
            authenticate(template, clf, [])

    @given(st.floats(1e-3, 1e3), st.integers(0, 50))
    def test_decision_scale_invariant(self, alpha, seed):
        template, clf, _, _, bases, sample = self.setup_model(seed % 5)
        r = np.random.default_rng(seed)
        for _ in range(3):
            H = [(k, ChannelResponse(BAND, BIN, bases[k] * r.uniform(0.5, 1.5, 85))) for k in bases]
            a = authenticate(template, clf, [(k, to_feature(h)) for k, h in H])
            b = authenticate(template, clf, [(k, to_feature(h.scaled(alpha))) for k, h in H])
            assert a.accept == b.accept


class TestEvaluate:
    def test_perfect(self):
        r = evaluate([1, 1], [-1, -1], 0.0)
        assert (r.accuracy, r.recall, r.precision, r.f1, r.auc) == (1, 1, 1, 1, 1)

    def test_identical_lists(self):
        assert evaluate([0.1, 0.5, 0.5, 0.9], [0.1, 0.5, 0.5, 0.9]).auc == 0.5

    def test_uniform_random(self):
        r = np.random.default_rng(99)
        assert 0.45 <= evaluate(r.uniform(size=1000), r.uniform(size=1000)).auc <= 0.55

    def test_empty(self):
        with pytest.raises(ContractError):
            evaluate([], [1.0])

    def test_no_accepts_precision(self):
        r = evaluate([-1.0], [-2.0])
        assert r.precision == 0 and r.f1 == 0 and r.accuracy == 0.5

    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=40), st.lists(st.floats(-5, 5), min_size=1, max_size=40))
    def test_roc_valid_and_auc_matches_rank_oracle(self, g, im):
        roc = roc_curve(g, im)
        th = [p[0] for p in roc]
        assert th == sorted(th)
        assert all(a[1] >= b[1] and a[2] >= b[2] for a, b in zip(roc, roc[1:]))
        assert roc[0][1:] == (1.0, 1.0) and roc[-1][1:] == (0.0, 0.0)
        # Mann-Whitney: P(g > i) + 0.5 P(g == i).
        wins = sum((x > y) + 0.5 * (x == y) for x in g for y in im)
        auc = evaluate(g, im).auc
        assert 0 <= auc <= 1
        assert auc == pytest.approx(wins / (len(g) * len(im)), abs=1e-12)

    def test_tar_at_far(self):
        r = evaluate([3, 2, 1], [0, -1, 2.5])
        assert tar_at_far(r, 0.0) == pytest.approx(1 / 3)
        assert tar_at_far(r, 0.34) == 1.0
