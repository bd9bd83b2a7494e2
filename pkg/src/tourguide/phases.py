"""Scenario phases, transition decisions, action cues, and the end sign.

The whole conversation is a fixed five-phase scenario. Each phase owns a
prompt template, a turn cap, and optional entry hooks/cues; phases advance
either because the model emitted the end sign or because the cap was hit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum, IntEnum

END_SIGN = "[END]"

_SIGN_RE = re.compile(re.escape(END_SIGN))
_WS_RUN_RE = re.compile(r"\s+")


class Phase(IntEnum):
    """The five scenario phases, ordinals 1..5 in conversation order."""

    ICE_BREAKER = 1
    INQUIRY = 2
    COURSE_SPOT_SELECTION = 3
    SCHEDULE_PROPOSAL = 4
    CONFIRMATION_CLOSING = 5

    @property
    def label(self) -> str:
        return _PHASE_LABELS[self]

    @property
    def is_last(self) -> bool:
        return self is Phase.CONFIRMATION_CLOSING

    def successor(self) -> "Phase":
        if self.is_last:
            raise ValueError("the closing phase has no successor")
        return Phase(self.value + 1)


_PHASE_LABELS = {
    Phase.ICE_BREAKER: "Introduction & Ice Breaker",
    Phase.INQUIRY: "Inquiry",
    Phase.COURSE_SPOT_SELECTION: "Course & Spot Selection",
    Phase.SCHEDULE_PROPOSAL: "Schedule Proposal",
    Phase.CONFIRMATION_CLOSING: "Confirmation & Closing",
}


class TransitionDecision(str, Enum):
    """Outcome of the end-of-turn transition check."""

    STAY = "stay"
    ADVANCE_BY_SIGN = "advance_by_sign"
    ADVANCE_BY_CAP = "advance_by_cap"
    CLOSE = "close"

    @property
    def advances(self) -> bool:
        return self in (TransitionDecision.ADVANCE_BY_SIGN, TransitionDecision.ADVANCE_BY_CAP)


class CueKind(str, Enum):
    BOW = "bow"
    NONE = "none"


class CueTiming(str, Enum):
    PHASE_ENTRY = "phase_entry"
    PHASE_EXIT = "phase_exit"


@dataclass(frozen=True)
class ActionCue:
    """Abstract physical-action request attached to a phase boundary."""

    kind: CueKind
    timing: CueTiming


BOW_ON_ENTRY = ActionCue(CueKind.BOW, CueTiming.PHASE_ENTRY)
BOW_ON_EXIT = ActionCue(CueKind.BOW, CueTiming.PHASE_EXIT)

# Hook identifiers executed when a phase is entered, in order.
HOOK_SELECT_COURSES = "run-course-selection"
HOOK_EXTRACT_SPOTS = "extract-spots"
HOOK_FETCH_ROUTE = "fetch-route"
HOOK_BUILD_SCHEDULE = "build-schedule"


@dataclass(frozen=True)
class PhaseConfig:
    """Per-phase behavior: prompt, cap, sign enablement, entry effects."""

    phase: Phase
    max_turns: int
    prompt_template_id: str
    end_sign_enabled: bool = True
    entry_actions: tuple[ActionCue, ...] = ()
    entry_hooks: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.max_turns < 1:
            raise ValueError(f"max_turns must be >= 1, got {self.max_turns}")


def default_phase_configs(
    caps: tuple[int, int, int, int, int] = (3, 5, 10, 6, 2),
) -> dict[Phase, PhaseConfig]:
    """Build the default scenario table, optionally overriding per-phase caps."""
    return {
        Phase.ICE_BREAKER: PhaseConfig(
            phase=Phase.ICE_BREAKER,
            max_turns=caps[0],
            prompt_template_id="ice_breaker",
            entry_actions=(BOW_ON_ENTRY,),
        ),
        Phase.INQUIRY: PhaseConfig(
            phase=Phase.INQUIRY,
            max_turns=caps[1],
            prompt_template_id="inquiry",
        ),
        Phase.COURSE_SPOT_SELECTION: PhaseConfig(
            phase=Phase.COURSE_SPOT_SELECTION,
            max_turns=caps[2],
            prompt_template_id="course_introduction",
            entry_hooks=(HOOK_SELECT_COURSES,),
        ),
        Phase.SCHEDULE_PROPOSAL: PhaseConfig(
            phase=Phase.SCHEDULE_PROPOSAL,
            max_turns=caps[3],
            prompt_template_id="schedule_proposal",
            entry_hooks=(HOOK_EXTRACT_SPOTS, HOOK_FETCH_ROUTE, HOOK_BUILD_SCHEDULE),
        ),
        Phase.CONFIRMATION_CLOSING: PhaseConfig(
            phase=Phase.CONFIRMATION_CLOSING,
            max_turns=caps[4],
            prompt_template_id="closing",
        ),
    }


def check_transition(llm_output: str, turns_in_phase: int, config: PhaseConfig) -> TransitionDecision:
    """Decide how the phase ends after the turn just completed.

    The sign wins over the cap when both hold (goal achievement is the
    stronger condition). In the closing phase either trigger closes the
    session instead of advancing.
    """
    sign = config.end_sign_enabled and END_SIGN in llm_output
    capped = turns_in_phase >= config.max_turns
    if config.phase.is_last:
        return TransitionDecision.CLOSE if (sign or capped) else TransitionDecision.STAY
    if sign:
        return TransitionDecision.ADVANCE_BY_SIGN
    if capped:
        return TransitionDecision.ADVANCE_BY_CAP
    return TransitionDecision.STAY


def strip_end_sign(text: str) -> str:
    """Remove every end-sign occurrence from text that will be spoken.

    Whitespace runs are collapsed to a single space and the ends trimmed,
    so removals never leave doubled spacing: "A[END]B" -> "AB",
    "A [END] B" -> "A B", "[END]" -> "".
    """
    cleaned = _SIGN_RE.sub("", text)
    return _WS_RUN_RE.sub(" ", cleaned).strip()
