"""Command-line entry point: simulate -> enroll -> auth -> evaluate.

Exit codes: 0 accept/success, 1 reject, 2 usage, 3 data, 4 no evidence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .auth import authenticate
from .dsp import ProbeConfig, read_wav, synthesize_probe, write_wav
from .errors import EarDynamicError, NoEvidenceError
from .evaluation import DEFAULT_SWEEP, SimulationPlan, SubjectData, evaluate_population, plan_sessions, \
    train_user
from .motion import HeadPosture, format_imu_trace, parse_imu_trace
from .phonemes import format_annotations, parse_annotations
from .pipeline import extract_session_features
from .sim import PROBE_LEVEL, sample_population, synthesize_session
from .store import MANIFEST_VERSION, load_dataset, load_template, save_template, write_manifest

EXIT_OK, EXIT_REJECT, EXIT_USAGE, EXIT_DATA, EXIT_NO_EVIDENCE = 0, 1, 2, 3, 4

# Reference per-user means from the original human-subject study, printed for context only.
REFERENCE_METRICS = {"accuracy": 0.9304, "recall": 0.9738, "precision": 0.9502, "f1": 0.9684}

log = logging.getLogger("eardynamic")


class UsageError(Exception):
    pass


def _probe_from_manifest(manifest: dict):
    return synthesize_probe(ProbeConfig(**manifest["probe"]))


# ---- simulate ----------------------------------------------------------------------------

def _simulate_subject(args):
    plan, index, probe, out = args
    subject = sample_population(plan.n_subjects, plan.seed)[index]
    sid = f"S{index:03d}"
    sdir = out / sid
    sdir.mkdir(parents=True, exist_ok=True)
    sessions = {}
    for role, k, cats, seed in plan_sessions(plan, index):
        sess = synthesize_session(subject, probe, cats, plan.posture, plan.snr_db, seed,
                                  deformation=(role != "attack"))
        stem = f"{role}_{k:02d}"
        write_wav(sdir / f"{stem}.wav", sess.recording)
        (sdir / f"{stem}.phn.tsv").write_text(format_annotations(sess.segments), encoding="utf-8")
        (sdir / f"{stem}.imu.tsv").write_text(format_imu_trace(sess.trace), encoding="utf-8")
        sessions.setdefault(role, []).append({
            "recording": f"{sid}/{stem}.wav", "annotations": f"{sid}/{stem}.phn.tsv",
            "imu": f"{sid}/{stem}.imu.tsv", "seed": seed, "categories": [c.short for c in cats]})
    return {"id": sid, "index": index, "seed": subject.rng_seed, "sessions": sessions}


def cmd_simulate(ns) -> int:
    if ns.subjects < 2:
        raise UsageError("--subjects must be >= 2 (impostors come from other subjects)")
    if not 1 <= ns.phonemes_per_session <= 7:
        raise UsageError("--phonemes-per-session must be in [1, 7]")
    if ns.enroll_sessions < 3:
        raise UsageError("--enroll-sessions must be >= 3")
    plan = SimulationPlan(ns.subjects, ns.seed, ns.snr_db, ns.phonemes_per_session, ns.enroll_sessions,
                          ns.test_sessions, ns.attack_sessions, HeadPosture[ns.posture])
    out = Path(ns.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe_file = out / ".write-test"
        probe_file.write_text("")
        probe_file.unlink()
    except OSError as exc:
        raise UsageError(f"cannot write to {out}: {exc.strerror or exc}") from None
    config = ProbeConfig(amplitude=PROBE_LEVEL)
    probe = synthesize_probe(config)
    jobs = [(plan, i, probe, out) for i in range(plan.n_subjects)]
    if ns.jobs > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            subjects = list(pool.map(_simulate_subject, jobs))
    else:
        subjects = [_simulate_subject(j) for j in jobs]
    manifest = {
        "version": MANIFEST_VERSION, "population_seed": plan.seed, "sample_rate": config.sample_rate,
        "probe": dataclasses.asdict(config),
        "simulator": {"snr_db": plan.snr_db, "phonemes_per_session": plan.phonemes_per_session,
                      "n_enroll": plan.n_enroll, "n_test": plan.n_test, "n_attack": plan.n_attack,
                      "posture": plan.posture.name},
        "subjects": subjects,
    }
    write_manifest(out / "manifest.json", manifest)
    print(f"wrote {len(subjects)} subjects to {out}")
    return EXIT_OK


# ---- shared dataset -> features ------------------------------------------------------------

def _subject_features(args) -> SubjectData:
    subj, probe = args
    data = SubjectData(subj.subject_id, [], [], [])
    for role in ("enroll", "test", "attack"):
        for s in subj.sessions.get(role, []):
            getattr(data, role).append(extract_session_features(s.recording, s.segments, s.trace, probe))
    return data


def _dataset_features(manifest_path, jobs: int = 1) -> list[SubjectData]:
    ds = load_dataset(manifest_path)
    probe = _probe_from_manifest(ds.manifest)
    args = [(s, probe) for s in ds.subjects]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_subject_features, args))
    return [_subject_features(a) for a in args]


# ---- enroll / auth -----------------------------------------------------------------------

def cmd_enroll(ns) -> int:
    subjects = _dataset_features(ns.manifest, ns.jobs)
    mine = [s for s in subjects if s.user_id == ns.user]
    if not mine:
        raise EarDynamicError(f"user {ns.user!r} not in manifest")
    subj = mine[0]
    if len(subj.enroll) < 3:
        raise EarDynamicError(f"user {ns.user!r} has {len(subj.enroll)} enrollment sessions, need >= 3")
    others = [s for s in subjects if s.user_id != ns.user]
    if not others:
        raise EarDynamicError("manifest has no other subjects to draw negatives from")
    model = train_user(subj, others, ns.rounds)
    Path(ns.out).write_bytes(save_template(model.template, model.classifier))
    print(f"enrolled {ns.user}: {len(model.template.entries)} keys, {len(model.classifier.rounds)} rounds")
    return EXIT_OK


def cmd_auth(ns) -> int:
    tf = load_template(Path(ns.template).read_bytes())
    if tf.classifier is None:
        raise EarDynamicError(f"{ns.template} has no trained classifier")
    rec = read_wav(ns.recording)
    segments = parse_annotations(Path(ns.annotations).read_text(encoding="utf-8"))
    trace = parse_imu_trace(Path(ns.imu).read_text(encoding="utf-8"))
    probe = synthesize_probe(ProbeConfig(f_start=tf.template.band[0], f_end=tf.template.band[1],
                                         sample_rate=rec.sample_rate))
    feats = extract_session_features(rec, segments, trace, probe)
    if not feats.features:
        print("no evidence: no usable segments and no static window")
        return EXIT_NO_EVIDENCE
    try:
        decision = authenticate(tf.template, tf.classifier, feats.features)
    except NoEvidenceError as exc:
        print(f"no evidence: {exc}")
        return EXIT_NO_EVIDENCE
    verdict = "ACCEPT" if decision.accept else "REJECT"
    keys = ",".join(str(k) for k in decision.template_keys_used)
    print(f"{verdict} score={decision.score:.6f} segments={decision.segments_used} keys={keys}")
    return EXIT_OK if decision.accept else EXIT_REJECT


# ---- evaluate ----------------------------------------------------------------------------

def parse_sweep(text: str) -> tuple[int, ...]:
    """``1..5`` or ``1,3,5``."""
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split(".."))
            values = tuple(range(lo, hi + 1))
        else:
            values = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad sweep {text!r}; use e.g. 1..5") from None
    if not values or min(values) < 1 or max(values) > 7:
        raise argparse.ArgumentTypeError(f"sweep values must lie in [1, 7], got {text!r}")
    return values


def cmd_evaluate(ns) -> int:
    subjects = _dataset_features(ns.manifest, ns.jobs)
    if len(subjects) < 2:
        raise EarDynamicError("evaluation needs at least two subjects")
    for s in subjects:
        if len(s.enroll) < 3 or not s.test:
            raise EarDynamicError(f"subject {s.user_id} needs >= 3 enrollment and >= 1 test session")
    result = evaluate_population(subjects, ns.phoneme_sweep, ns.rounds)
    out = Path(ns.out)
    report = result.to_dict()
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    roc_path = Path(ns.roc) if ns.roc else out.with_suffix(".roc.tsv")
    roc_path.write_text("".join(f"{t:.17g}\t{tar:.17g}\t{far:.17g}\n" for t, tar, far in result.report.roc),
                        encoding="utf-8")
    r = result.report
    print(f"accuracy {r.accuracy:.4f}  recall {r.recall:.4f}  precision {r.precision:.4f}  "
          f"f1 {r.f1:.4f}  auc {r.auc:.4f}  TAR@FAR<=0.05 {result.tar_at_far_05:.4f}")
    print("phonemes  accuracy")
    for p, acc in sorted(result.sweep.items()):
        print(f"{p:8d}  {acc:.4f}")
    if result.attack_far is not None:
        print(f"attack FAR {result.attack_far:.4f}  genuine FRR {result.attack_frr:.4f}")
    print("reference (human-subject per-user means): " +
          "  ".join(f"{k} {v:.4f}" for k, v in REFERENCE_METRICS.items()))
    return EXIT_OK


# ---- entry -------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eardynamic", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write a simulated dataset and manifest")
    s.add_argument("--subjects", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--snr-db", type=float, default=30.0)
    s.add_argument("--phonemes-per-session", type=int, default=5)
    s.add_argument("--enroll-sessions", type=int, default=3)
    s.add_argument("--test-sessions", type=int, default=4)
    s.add_argument("--attack-sessions", type=int, default=2)
    s.add_argument("--posture", choices=[h.name for h in HeadPosture], default="FORWARD")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("enroll", help="build a template and boosted classifier for one user")
    e.add_argument("--user", required=True)
    e.add_argument("--manifest", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--rounds", type=int, default=None)
    e.add_argument("--jobs", type=int, default=1)
    e.set_defaults(func=cmd_enroll)

    a = sub.add_parser("auth", help="authenticate one session against a template")
    a.add_argument("--template", required=True)
    a.add_argument("--recording", required=True)
    a.add_argument("--annotations", required=True)
    a.add_argument("--imu", required=True)
    a.set_defaults(func=cmd_auth)

    v = sub.add_parser("evaluate", help="population evaluation with a phoneme-count sweep")
    v.add_argument("--manifest", required=True)
    v.add_argument("--phoneme-sweep", type=parse_sweep, default=DEFAULT_SWEEP)
    v.add_argument("--out", required=True)
    v.add_argument("--roc", default=None, help="ROC TSV path (default: REPORT with .roc.tsv suffix)")
    v.add_argument("--rounds", type=int, default=None)
    v.add_argument("--jobs", type=int, default=1)
    v.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return ns.func(ns)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EarDynamicError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
