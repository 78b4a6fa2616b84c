"""Template/classifier text format and simulated-dataset manifests."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .auth import BoostedClassifier, BoostRound, TemplateEntry, TemplateKey, UserTemplate, WeakClassifier
from .channel import FeatureVector
from .dsp import Recording, read_wav
from .errors import AnnotationParseError, AnnotationValidationError, ContractError, DatasetError, \
    InvalidTraceError, TemplateLoadError
from .motion import ImuSample, parse_imu_trace
from .phonemes import PhonemeSegment, parse_annotations

log = logging.getLogger(__name__)

FORMAT_VERSION = "v1"
HEADER = f"EARDYN-TEMPLATE {FORMAT_VERSION}"
MANIFEST_VERSION = 1


def _g(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class TemplateFile:
    template: UserTemplate
    classifier: BoostedClassifier | None = None
    format_version: str = FORMAT_VERSION


def save_template(template: UserTemplate, classifier: BoostedClassifier | None = None) -> bytes:
    if any(c.isspace() for c in template.user_id) or not template.user_id:
        raise ContractError(f"user id {template.user_id!r} must be non-empty without whitespace")
    lines = [HEADER, f"user {template.user_id}",
             f"band {_g(template.band[0])} {_g(template.band[1])} {_g(template.bin_hz)}"]
    for key in template.keys():
        e = template.entries[key]
        lines.append(f"entry {key.category_token} {key.posture.name} {e.n_samples} {_g(e.mu_w)} {_g(e.sigma_w)}")
        lines.append(" ".join(_g(v) for v in e.mean.values))
    if classifier is not None:
        lines.append(f"boost {len(classifier.rounds)}")
        for r in classifier.rounds:
            k = r.weak.key
            lines.append(f"round {k.category_token} {k.posture.name} {_g(r.weak.threshold)} {_g(r.alpha)} {_g(r.error)}")
    return ("\n".join(lines) + "\n").encode("utf-8")


class _Lines:
    def __init__(self, text: str):
        self.lines = text.split("\n")
        if self.lines and self.lines[-1] == "":
            self.lines.pop()
        self.pos = 0

    def done(self) -> bool:
        return self.pos >= len(self.lines)

    def next(self, what: str) -> tuple[int, list[str]]:
        if self.done():
            raise TemplateLoadError(f"truncated file: expected {what}", self.pos + 1)
        self.pos += 1
        return self.pos, self.lines[self.pos - 1].split()

    def peek(self) -> list[str]:
        return self.lines[self.pos].split()


def _float(token: str, lineno: int) -> float:
    try:
        v = float(token)
    except ValueError:
        raise TemplateLoadError(f"not a number: {token!r}", lineno) from None
    if not math.isfinite(v):
        raise TemplateLoadError(f"non-finite value {token!r}", lineno)
    return v


def _int(token: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise TemplateLoadError(f"not an integer: {token!r}", lineno) from None


def _key(cat: str, posture: str, lineno: int) -> TemplateKey:
    try:
        return TemplateKey.from_tokens(cat, posture)
    except (KeyError, ValueError) as exc:
        raise TemplateLoadError(f"bad template key {cat} {posture}: {exc}", lineno) from None


def _expect(fields: list[str], tag: str, n: int, lineno: int):
    if not fields or fields[0] != tag:
        raise TemplateLoadError(f"expected '{tag}' line, got {' '.join(fields)[:40]!r}", lineno)
    if len(fields) != n:
        raise TemplateLoadError(f"'{tag}' line needs {n - 1} fields, got {len(fields) - 1}", lineno)


def load_template(data: bytes | str) -> TemplateFile:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    src = _Lines(text)
    lineno, fields = src.next("header")
    if len(fields) != 2 or fields[0] != "EARDYN-TEMPLATE":
        raise TemplateLoadError("missing EARDYN-TEMPLATE header", lineno)
    if fields[1] != FORMAT_VERSION:
        raise TemplateLoadError(f"unsupported format version {fields[1]!r} (expected {FORMAT_VERSION})", lineno)
    lineno, fields = src.next("user line")
    _expect(fields, "user", 2, lineno)
    user = fields[1]
    lineno, fields = src.next("band line")
    _expect(fields, "band", 4, lineno)
    band = (_float(fields[1], lineno), _float(fields[2], lineno))
    bin_hz = _float(fields[3], lineno)

    entries = {}
    while not src.done() and src.peek()[:1] == ["entry"]:
        lineno, fields = src.next("entry line")
        _expect(fields, "entry", 6, lineno)
        key = _key(fields[1], fields[2], lineno)
        if key in entries:
            raise TemplateLoadError(f"duplicate entry {key}", lineno)
        n = _int(fields[3], lineno)
        mu, sigma = _float(fields[4], lineno), _float(fields[5], lineno)
        lineno, values = src.next(f"feature values for {key}")
        if not values:
            raise TemplateLoadError(f"empty feature line for {key}", lineno)
        vec = [_float(v, lineno) for v in values]
        if entries:
            expected = len(next(iter(entries.values())).mean)
            if len(vec) != expected:
                raise TemplateLoadError(f"feature for {key} has {len(vec)} values, expected {expected}", lineno)
        entries[key] = TemplateEntry(FeatureVector(vec, band, bin_hz), n, mu, sigma)
    if not entries:
        raise TemplateLoadError("template has no entries", src.pos + 1)

    classifier = None
    if not src.done():
        lineno, fields = src.next("boost line")
        _expect(fields, "boost", 2, lineno)
        n_rounds = _int(fields[1], lineno)
        rounds = []
        for _ in range(n_rounds):
            lineno, fields = src.next(f"round {len(rounds) + 1} of {n_rounds}")
            _expect(fields, "round", 6, lineno)
            key = _key(fields[1], fields[2], lineno)
            if key not in entries:
                raise TemplateLoadError(f"round key {key} has no template entry", lineno)
            theta, alpha, eps = (_float(f, lineno) for f in fields[3:6])
            rounds.append(BoostRound(WeakClassifier(key, theta), alpha, eps))
        classifier = BoostedClassifier(tuple(rounds))
        if not src.done():
            raise TemplateLoadError("unexpected content after classifier section", src.pos + 1)
    return TemplateFile(UserTemplate(user, band, bin_hz, entries), classifier, FORMAT_VERSION)


# ---- datasets -----------------------------------------------------------------------------

@dataclass(frozen=True)
class SessionFiles:
    recording: str
    annotations: str
    imu: str


@dataclass(frozen=True)
class LoadedSession:
    recording: Recording
    segments: list[PhonemeSegment]
    trace: list[ImuSample]


@dataclass
class LoadedSubject:
    subject_id: str
    seed: int
    sessions: dict[str, list[LoadedSession]] = field(default_factory=dict)


@dataclass
class Dataset:
    manifest: dict
    subjects: list[LoadedSubject]
    root: Path


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_manifest(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DatasetError(f"manifest {path} not found") from None
    except json.JSONDecodeError as exc:
        raise DatasetError(f"manifest {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict) or data.get("version") != MANIFEST_VERSION:
        raise DatasetError(f"manifest {path} has unsupported version {data.get('version') if isinstance(data, dict) else None!r}")
    subjects = data.get("subjects")
    if not isinstance(subjects, list) or not subjects:
        raise DatasetError(f"manifest {path} lists no subjects")
    return data


def _load_session(root: Path, files: dict) -> LoadedSession:
    rec = read_wav(root / files["recording"])
    segments = parse_annotations((root / files["annotations"]).read_text(encoding="utf-8"))
    trace = parse_imu_trace((root / files["imu"]).read_text(encoding="utf-8"))
    if segments and segments[-1].end > rec.duration:
        raise DatasetError(f"annotation end {segments[-1].end:.3f} s beyond recording end {rec.duration:.3f} s")
    return LoadedSession(rec, segments, trace)


def load_dataset(manifest_path) -> Dataset:
    """Parse and cross-check every referenced file; errors list the offending subject ids."""
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    root = manifest_path.parent
    expected_rate = manifest.get("sample_rate")
    subjects, bad, reasons = [], [], []
    for entry in manifest["subjects"]:
        sid = str(entry.get("id", "?"))
        subj = LoadedSubject(sid, int(entry.get("seed", 0)))
        try:
            for role, sessions in sorted(entry.get("sessions", {}).items()):
                loaded = []
                for files in sessions:
                    sess = _load_session(root, files)
                    if expected_rate is not None and sess.recording.sample_rate != expected_rate:
                        raise DatasetError(f"sample rate {sess.recording.sample_rate} != {expected_rate}")
                    loaded.append(sess)
                subj.sessions[role] = loaded
        except FileNotFoundError as exc:
            bad.append(sid)
            reasons.append(f"{sid}: missing file {exc.filename}")
            continue
        except (DatasetError, AnnotationParseError, AnnotationValidationError, InvalidTraceError,
                ValueError) as exc:
            bad.append(sid)
            reasons.append(f"{sid}: {exc}")
            continue
        subjects.append(subj)
    if bad:
        raise DatasetError("invalid dataset: " + "; ".join(reasons), bad)
    return Dataset(manifest, subjects, root)
