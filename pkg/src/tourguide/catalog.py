"""Model-course catalog, top-2 course selection, and decided-spot extraction.

Selection is backend-first: the conversation so far plus a catalog digest
go to the model, which must answer with exactly two course ids. A
deterministic lexical scorer takes over when the backend misformats twice,
so a malformed reply never kills a session. Spot extraction is stricter:
after one augmented retry it fails, because later phases cannot proceed
without exactly two resolvable spots.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

from .knowledge import SpotDirectory, normalize_spot_name
from .llm import BackendError, LLMGateway
from .prompts import PromptEngine

if TYPE_CHECKING:
    from .session import DialogueTurn

logger = logging.getLogger(__name__)

MAX_HERO_IMAGES = 4


class SelectionError(Exception):
    pass


class CatalogTooSmallError(SelectionError):
    pass


class ParseFailure(SelectionError):
    """Backend output did not yield exactly two known, distinct entries."""


class ExtractionError(SelectionError):
    """Spot extraction failed twice; the session cannot continue."""


@dataclass(frozen=True)
class ModelCourse:
    """A pre-authored itinerary paired with the customer archetype it suits."""

    course_id: str
    title: str
    summary: str
    persona: str
    spots: tuple[str, ...]
    hero_images: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.spots) < 2:
            raise ValueError(f"course {self.course_id!r} needs at least two spots")
        if not 1 <= len(self.hero_images) <= MAX_HERO_IMAGES:
            raise ValueError(f"course {self.course_id!r} needs 1..{MAX_HERO_IMAGES} hero images")

    def digest_line(self) -> str:
        return f"{self.course_id}: {self.summary}（{'−'.join(self.spots)}）"


@dataclass(frozen=True)
class CourseCatalog:
    courses: tuple[ModelCourse, ...]

    def __post_init__(self) -> None:
        ids = [c.course_id for c in self.courses]
        if len(set(ids)) != len(ids):
            raise ValueError("course ids must be unique")

    @classmethod
    def from_file(cls, path: str | Path) -> "CourseCatalog":
        return cls(tuple(_parse_course_records(Path(path).read_text(encoding="utf-8"))))

    def __len__(self) -> int:
        return len(self.courses)

    def __iter__(self):
        return iter(self.courses)

    def by_id(self, course_id: str) -> ModelCourse:
        for course in self.courses:
            if course.course_id == course_id:
                return course
        raise KeyError(course_id)

    def digest(self) -> list[str]:
        return [course.digest_line() for course in self.courses]

    def validate_spots(self, directory: SpotDirectory) -> None:
        """Every course spot must resolve; call once at load time."""
        for course in self.courses:
            for name in course.spots:
                directory.get(name)


@dataclass(frozen=True)
class SpotDecision:
    """The two spots the customer settled on, in decision order."""

    spots: tuple[str, str]
    source_turn_index: int

    def __post_init__(self) -> None:
        if self.spots[0] == self.spots[1]:
            raise ValueError("decided spots must be distinct")


# ---------------------------------------------------------------------------
# Deterministic fallback scoring

_ASCII_TOKEN_RE = re.compile(r"[a-z0-9]{2,}")
_CJK_RUN_RE = re.compile(r"[ぁ-ゟ゠-ヿ一-鿿々ー]+")
_HIRAGANA_RE = re.compile(r"[ぁ-ゟ]")


def _content_bearing(gram: str) -> bool:
    # Hiragana-only grams are grammatical glue (たい, です…); content words
    # carry at least one kanji or katakana character.
    return bool(_HIRAGANA_RE.sub("", gram))


def course_keywords(course: ModelCourse) -> frozenset[str]:
    """Lexical fingerprint of a course: ASCII word tokens plus content-bearing
    CJK bigrams drawn from title, summary, and persona."""
    text = f"{course.title} {course.summary} {course.persona}"
    keywords: set[str] = set(_ASCII_TOKEN_RE.findall(text.lower()))
    for run in _CJK_RUN_RE.findall(text):
        grams = [run] if len(run) == 1 else [run[i : i + 2] for i in range(len(run) - 1)]
        keywords.update(g for g in grams if _content_bearing(g))
    return frozenset(keywords)


def customer_text(history: Sequence["DialogueTurn"]) -> str:
    return " ".join(turn.text for turn in history if turn.speaker == "customer")


def fallback_score(course: ModelCourse, history: Sequence["DialogueTurn"]) -> int:
    """Count of distinct course keywords occurring in the customer's turns."""
    haystack = customer_text(history).lower()
    return sum(1 for kw in course_keywords(course) if kw in haystack)


def select_by_scoring(
    history: Sequence["DialogueTurn"], catalog: CourseCatalog
) -> tuple[ModelCourse, ModelCourse]:
    """Deterministic top-2: highest keyword-hit count, catalog order on ties."""
    ranked = sorted(
        enumerate(catalog.courses),
        key=lambda pair: (-fallback_score(pair[1], history), pair[0]),
    )
    return ranked[0][1], ranked[1][1]


# ---------------------------------------------------------------------------
# Backend-output parsing

def _last_nonempty_line(text: str) -> str:
    for line in reversed(text.splitlines()):
        if line.strip():
            return line.strip()
    return ""


def parse_two_ids(backend_output: str, catalog: CourseCatalog) -> tuple[str, str]:
    """Extract exactly two known, distinct course ids, ranked order preserved."""
    line = _last_nonempty_line(backend_output)
    tokens = [t for t in re.split(r"[,、\s]+", line) if t]
    if len(tokens) != 2:
        raise ParseFailure(f"expected 2 course ids, got {len(tokens)}: {line!r}")
    known = {c.course_id for c in catalog.courses}
    for token in tokens:
        if token not in known:
            raise ParseFailure(f"unknown course id: {token!r}")
    if tokens[0] == tokens[1]:
        raise ParseFailure(f"duplicate course id: {tokens[0]!r}")
    return tokens[0], tokens[1]


def parse_two_spots(backend_output: str, directory: SpotDirectory) -> tuple[str, str]:
    """Extract exactly two distinct resolvable spot names (canonical form)."""
    line = _last_nonempty_line(backend_output)
    tokens = [normalize_spot_name(t) for t in re.split(r"[、,/・]+", line)]
    tokens = [t for t in tokens if t]
    if len(tokens) != 2:
        raise ParseFailure(f"expected 2 spot names, got {len(tokens)}: {line!r}")
    resolved = []
    for token in tokens:
        spot = directory.resolve(token)
        if spot is None:
            raise ParseFailure(f"unknown spot name: {token!r}")
        resolved.append(spot.name)
    if resolved[0] == resolved[1]:
        raise ParseFailure(f"duplicate spot: {resolved[0]!r}")
    return resolved[0], resolved[1]


# ---------------------------------------------------------------------------

class CourseSelector:
    """Backend-driven selection/extraction over one session's gateway."""

    def __init__(
        self,
        catalog: CourseCatalog,
        gateway: LLMGateway,
        prompt_engine: PromptEngine,
        spot_directory: SpotDirectory,
    ) -> None:
        self._catalog = catalog
        self._gateway = gateway
        self._prompts = prompt_engine
        self._spots = spot_directory

    def select_top2(self, history: Sequence["DialogueTurn"]) -> tuple[ModelCourse, ModelCourse]:
        """Pick the two best-suited courses for this customer.

        Backend call with strict parsing, one retry, then the deterministic
        scorer. Always returns two distinct courses or raises
        CatalogTooSmallError.
        """
        if len(self._catalog) < 2:
            raise CatalogTooSmallError("course selection needs at least 2 courses")
        digest = self._catalog.digest()
        for attempt in range(2):
            try:
                prompt = self._prompts.build_course_selection_prompt(history, digest)
                raw = self._gateway.complete_text(prompt.text)
                first, second = parse_two_ids(raw, self._catalog)
                return self._catalog.by_id(first), self._catalog.by_id(second)
            except (ParseFailure, BackendError) as exc:
                logger.warning("course selection attempt %d failed: %s", attempt + 1, exc)
        logger.info("course selection fell back to lexical scoring")
        return select_by_scoring(history, self._catalog)

    def extract_spots(self, history: Sequence["DialogueTurn"]) -> SpotDecision:
        """Extract the two decided spots from the finished selection phase.

        The first failure retries once with an augmented instruction; the
        second raises ExtractionError (the session must fail rather than
        continue with a corrupt decision).
        """
        last_error: Exception | None = None
        for strict in (False, True):
            try:
                prompt = self._prompts.build_spot_extraction_prompt(history, strict=strict)
                raw = self._gateway.complete_text(prompt.text)
                names = parse_two_spots(raw, self._spots)
                source = history[-1].index if history else 0
                return SpotDecision(spots=names, source_turn_index=source)
            except (ParseFailure, BackendError) as exc:
                last_error = exc
                logger.warning("spot extraction (strict=%s) failed: %s", strict, exc)
        raise ExtractionError(f"spot extraction failed after retry: {last_error}")


def _parse_course_records(text: str) -> Iterable[ModelCourse]:
    from .knowledge import _parse_blocks, _one  # same structured-text format

    for record in _parse_blocks(text):
        yield ModelCourse(
            course_id=_one(record, "id"),
            title=_one(record, "title"),
            summary=_one(record, "summary"),
            persona=_one(record, "persona"),
            spots=tuple(s.strip() for s in _one(record, "spots").split(",") if s.strip()),
            hero_images=tuple(s.strip() for s in _one(record, "images").split(",") if s.strip()),
        )
