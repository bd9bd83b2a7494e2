"""Viewer display rules: spot cards, course-list priority, action cues.

The monitor shows at most four spot cards. Spot mentions fill free slots
in first-occurrence order; once full, only the fourth slot churns. A
mentioned course title preempts spot cards with the course's image list.
All transitions are pure functions so they can be replayed and checked
against an independent simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

from .catalog import CourseCatalog, ModelCourse
from .knowledge import SpotDirectory, SpotInfo
from .phases import (
    BOW_ON_ENTRY,
    BOW_ON_EXIT,
    ActionCue,
    Phase,
    TransitionDecision,
)

MAX_SLOTS = 4


class DisplayMode(str, Enum):
    SPOT_SLOTS = "spot-slots"
    COURSE_LIST = "course-list"


@dataclass(frozen=True)
class SpotCard:
    spot: SpotInfo
    shown_since_turn: int


@dataclass(frozen=True)
class DisplayState:
    """What the viewer shows after a given turn.

    Slots persist underneath course-list mode so reverting resumes them.
    `show_maps` is set for the decided-spot confirmation panels.
    """

    mode: DisplayMode = DisplayMode.SPOT_SLOTS
    slots: tuple[SpotCard, ...] = ()
    course: ModelCourse | None = None
    turn_index: int = 0
    show_maps: bool = False

    def __post_init__(self) -> None:
        if len(self.slots) > MAX_SLOTS:
            raise ValueError(f"at most {MAX_SLOTS} slots may be filled")

    def slot_names(self) -> tuple[str, ...]:
        return tuple(card.spot.name for card in self.slots)


class NameIndex:
    """Substring mention matching over known surface forms.

    Japanese has no word delimiters, so matching is longest-match
    substring search; overlapping candidates resolve to the longer one,
    and results come back deduplicated in first-occurrence order.
    """

    def __init__(self, surface_to_key: dict[str, str]) -> None:
        self._surfaces = dict(surface_to_key)

    @classmethod
    def for_spots(cls, directory: SpotDirectory) -> "NameIndex":
        return cls({surface: spot.name for surface, spot in directory.names_and_aliases().items()})

    @classmethod
    def for_courses(cls, catalog: CourseCatalog) -> "NameIndex":
        return cls({course.title: course.course_id for course in catalog})

    def find_mentions(self, text: str) -> list[str]:
        matches: list[tuple[int, int, str]] = []  # (start, -length, key)
        for surface, key in self._surfaces.items():
            pos = text.find(surface)
            if pos >= 0:
                matches.append((pos, -len(surface), key))
        matches.sort()
        chosen: list[tuple[int, int, str]] = []
        for start, neg_len, key in matches:
            end = start - neg_len
            if any(start < c_end and c_start < end for c_start, c_end, _ in chosen):
                continue
            chosen.append((start, end, key))
        seen: set[str] = set()
        ordered: list[str] = []
        for _, _, key in chosen:
            if key not in seen:
                seen.add(key)
                ordered.append(key)
        return ordered

    def find_first(self, text: str) -> str | None:
        mentions = self.find_mentions(text)
        return mentions[0] if mentions else None


def update(
    state: DisplayState,
    system_utterance: str,
    spot_index: NameIndex,
    course_index: NameIndex,
    *,
    spot_directory: SpotDirectory,
    catalog: CourseCatalog,
) -> DisplayState:
    """Apply one system utterance (full post-stream text, sign stripped).

    Course-title priority first; otherwise spot mentions fill slots. New
    spots append while fewer than four cards are shown; afterwards each
    new spot replaces the fourth card only, never the first three. Unknown
    names are ignored. Course-list mode persists until an utterance
    mentions spots but no course title.
    """
    turn = state.turn_index + 1
    course_id = course_index.find_first(system_utterance)
    if course_id is not None:
        return replace(
            state,
            mode=DisplayMode.COURSE_LIST,
            course=catalog.by_id(course_id),
            turn_index=turn,
        )

    mentions = spot_index.find_mentions(system_utterance)
    if not mentions:
        return replace(state, turn_index=turn)

    slots = list(state.slots)
    shown = {card.spot.name for card in slots}
    for name in mentions:
        if name in shown:
            continue
        card = SpotCard(spot=spot_directory.get(name), shown_since_turn=turn)
        if len(slots) < MAX_SLOTS:
            slots.append(card)
        else:
            shown.discard(slots[MAX_SLOTS - 1].spot.name)
            slots[MAX_SLOTS - 1] = card
        shown.add(name)
    return replace(
        state,
        mode=DisplayMode.SPOT_SLOTS,
        course=None,
        slots=tuple(slots),
        turn_index=turn,
    )


def reset_for_phase(
    state: DisplayState,
    phase: Phase,
    decided_spots: Sequence[SpotInfo] = (),
) -> DisplayState:
    """Phase-entry display intent.

    The schedule phase pins exactly the decided spots with map panels; the
    closing phase keeps that confirmation view; every other phase starts
    with an empty board.
    """
    if phase is Phase.SCHEDULE_PROPOSAL:
        cards = tuple(SpotCard(spot, shown_since_turn=state.turn_index) for spot in decided_spots)
        return DisplayState(
            mode=DisplayMode.SPOT_SLOTS,
            slots=cards,
            turn_index=state.turn_index,
            show_maps=True,
        )
    if phase is Phase.CONFIRMATION_CLOSING:
        return state
    return DisplayState(turn_index=state.turn_index)


def action_cues(decision: TransitionDecision | None, phase: Phase) -> list[ActionCue]:
    """Bow with the opening greeting and at session close; nothing else.

    `decision=None` means initial session entry (there is no transition
    that leads into phase 1).
    """
    if decision is TransitionDecision.CLOSE:
        return [BOW_ON_EXIT]
    if decision is None and phase is Phase.ICE_BREAKER:
        return [BOW_ON_ENTRY]
    return []
