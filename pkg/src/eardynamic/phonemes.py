"""Phoneme annotations, deformation categories, and alignment to chirp frames."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .errors import AnnotationParseError, AnnotationValidationError


class DeformationCategory(enum.Enum):
    EXCLUDED = 0
    C1_TongueForwardJawSlight = 1
    C2_TongueLowerJawWide = 2
    C3_TongueBackRaiseJawSlight = 3
    C4_TongueBackJawModerate = 4
    C5_TongueRaisedFricativeJawWide = 5
    C6_TongueRaisedJawSlight = 6
    C7_TongueFricativeJawSlight = 7

    @property
    def index(self) -> int:
        return self.value

    @property
    def short(self) -> str:
        return "EXCLUDED" if self is DeformationCategory.EXCLUDED else f"C{self.value}"

    @classmethod
    def from_short(cls, token: str) -> DeformationCategory:
        for cat in cls:
            if cat.short == token:
                return cat
        raise ValueError(f"unknown category token {token!r}")


CATEGORIES = tuple(c for c in DeformationCategory if c is not DeformationCategory.EXCLUDED)

# Labels are kept exactly as printed (case-sensitive, bracketed).
PHONEME_TABLE: dict[DeformationCategory, tuple[str, ...]] = {
    DeformationCategory.C1_TongueForwardJawSlight: ("[i:]", "[I]", "[I@]", "[eI]", "[@]", "[e@]", "[3:]"),
    DeformationCategory.C2_TongueLowerJawWide: ("[æ]", "[ai]", "[6]", "[A]", "[O:]", "[au]"),
    DeformationCategory.C3_TongueBackRaiseJawSlight: ("[U]", "[u:]", "[U@]"),
    DeformationCategory.C4_TongueBackJawModerate: ("[oU]", "[OI]", "[e]", "[2]"),
    DeformationCategory.C5_TongueRaisedFricativeJawWide: ("[tS]", "[tr]", "[ts]", "[dZ]", "[dr]", "[dz]"),
    DeformationCategory.C6_TongueRaisedJawSlight: ("[f]", "[s]", "[S]", "[h]", "[v]", "[z]", "[Z]", "[r]"),
    DeformationCategory.C7_TongueFricativeJawSlight: ("[T]", "[D]", "[l]"),
}

_LOOKUP = {label: cat for cat, labels in PHONEME_TABLE.items() for label in labels}

# Plosives and nasals with minimal articulator travel; used by the simulator as fillers.
EXCLUDED_EXAMPLES = ("[p]", "[b]", "[t]", "[d]", "[k]", "[g]", "[m]", "[n]")


def categorize_phoneme(label: str) -> DeformationCategory:
    return _LOOKUP.get(label, DeformationCategory.EXCLUDED)


@dataclass(frozen=True)
class PhonemeSegment:
    label: str
    start: float
    end: float

    def __post_init__(self):
        if not self.label:
            raise AnnotationValidationError("empty phoneme label")
        if not 0 <= self.start < self.end:
            raise AnnotationValidationError(
                f"segment {self.label} needs 0 <= start < end, got [{self.start}, {self.end})")

    @property
    def category(self) -> DeformationCategory:
        return categorize_phoneme(self.label)


@dataclass(frozen=True)
class CategorizedSegment:
    segment: PhonemeSegment
    category: DeformationCategory
    frames: tuple[int, ...]


_TIME = re.compile(r"^\d+\.\d{3,}$")


def parse_annotations(text: str) -> list[PhonemeSegment]:
    """Parse ``start<TAB>end<TAB>label`` lines; ``#`` lines and blank lines are skipped."""
    segments = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise AnnotationParseError(f"expected 3 tab-separated fields, got {len(fields)}", lineno)
        start_s, end_s, label = (f.strip() for f in fields)
        for name, value in (("start", start_s), ("end", end_s)):
            if not _TIME.match(value):
                raise AnnotationParseError(f"{name} time {value!r} is not a decimal with >= 3 fractional digits",
                                           lineno)
        if not label:
            raise AnnotationParseError("empty label", lineno)
        try:
            segments.append(PhonemeSegment(label, float(start_s), float(end_s)))
        except AnnotationValidationError as exc:
            raise AnnotationParseError(str(exc), lineno) from None
    segments.sort(key=lambda s: (s.start, s.end))
    for prev, cur in zip(segments, segments[1:]):
        if cur.start < prev.end:
            raise AnnotationValidationError(
                f"segments overlap: {prev.label} [{prev.start}, {prev.end}) and {cur.label} [{cur.start}, {cur.end})")
    return segments


def format_annotations(segments) -> str:
    lines = [f"{s.start:.6f}\t{s.end:.6f}\t{s.label}" for s in segments]
    return "".join(line + "\n" for line in lines)


def _sample_span(segment: PhonemeSegment, sample_rate: float) -> tuple[int, int]:
    return round(segment.start * sample_rate), round(segment.end * sample_rate)


def align_segments(segments, frame_starts, period: int, sample_rate: float):
    """Attach every chirp frame lying fully inside each non-excluded segment.

    Returns ``(aligned, dropped)`` where ``dropped`` counts categorized
    segments that covered no complete frame.
    """
    frame_starts = list(frame_starts)
    aligned = []
    dropped = 0
    for seg in segments:
        category = categorize_phoneme(seg.label)
        if category is DeformationCategory.EXCLUDED:
            continue
        lo, hi = _sample_span(seg, sample_rate)
        frames = tuple(i for i, s in enumerate(frame_starts) if s >= lo and s + period <= hi)
        if not frames:
            dropped += 1
            continue
        aligned.append(CategorizedSegment(seg, category, frames))
    return aligned, dropped


def static_frames(segments, frame_starts, period: int, sample_rate: float) -> tuple[int, ...]:
    """Frames that overlap no annotated segment at all (silence)."""
    spans = [_sample_span(s, sample_rate) for s in segments]
    return tuple(
        i for i, s in enumerate(frame_starts)
        if all(s + period <= lo or s >= hi for lo, hi in spans)
    )
