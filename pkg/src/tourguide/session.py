"""Session state and the per-turn orchestration loop.

One turn = one customer utterance plus one system response. advance()
appends both, runs the speech pipeline, decides the phase transition,
executes entry hooks (course selection, spot extraction, routing,
scheduling), and derives the viewer display state. All mutation of a
session goes through its engine; the service layer serializes calls.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime, time, timezone
from enum import Enum

from . import display as display_rules
from .catalog import CourseCatalog, CourseSelector, ModelCourse, SelectionError, SpotDecision
from .display import DisplayState, NameIndex
from .knowledge import KnowledgeError, KnowledgeHub, RoutePlan, Schedule, SpotInfo
from .llm import LLMGateway, SpeechSegment
from .phases import (
    END_SIGN,
    ActionCue,
    Phase,
    PhaseConfig,
    TransitionDecision,
    check_transition,
    default_phase_configs,
    strip_end_sign,
)
from .prompts import PromptContext, PromptEngine
from .transcript import TranscriptRecord

logger = logging.getLogger(__name__)

# Spoken when the model's whole output was the end sign.
PHASE_CLOSERS: dict[Phase, str] = {
    Phase.ICE_BREAKER: "それでは、ご希望を伺っていきますね。",
    Phase.INQUIRY: "ありがとうございます。おすすめのコースをご紹介しますね。",
    Phase.COURSE_SPOT_SELECTION: "かしこまりました。それでは当日の予定を立てていきましょう。",
    Phase.SCHEDULE_PROPOSAL: "それでは最後に、内容のご確認をお願いします。",
    Phase.CONFIRMATION_CLOSING: "本日はご来店ありがとうございました。良いご旅行を！",
}


class Speaker(str, Enum):
    SYSTEM = "system"
    CUSTOMER = "customer"


class SessionStatus(str, Enum):
    ACTIVE = "active"
    CLOSED = "closed"
    FAILED = "failed"


class SessionError(Exception):
    pass


class SessionNotActiveError(SessionError):
    pass


class HookFailure(SessionError):
    """A phase-entry hook could not complete; the session has failed."""


@dataclass(frozen=True)
class DialogueTurn:
    """One utterance. For system turns `text` is the spoken (sign-free)
    form and `raw_text` the original completion."""

    speaker: Speaker
    text: str
    phase: Phase
    index: int
    raw_text: str = ""

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("turn text must be non-empty")
        if not self.raw_text:
            object.__setattr__(self, "raw_text", self.text)


@dataclass(frozen=True)
class TravelPlan:
    """The session's product: two spots, the route between, a day schedule."""

    spots: tuple[SpotInfo, SpotInfo]
    route: RoutePlan
    schedule: Schedule


@dataclass
class SessionState:
    session_id: str
    current_phase: Phase = Phase.ICE_BREAKER
    turns_in_phase: int = 0
    history: list[DialogueTurn] = field(default_factory=list)
    selected_courses: tuple[ModelCourse, ...] = ()
    decided_spots: tuple[SpotInfo, ...] = ()
    route_plan: RoutePlan | None = None
    schedule: Schedule | None = None
    final_plan: TravelPlan | None = None
    status: SessionStatus = SessionStatus.ACTIVE
    display: DisplayState = field(default_factory=DisplayState)

    def next_index(self) -> int:
        return len(self.history)


@dataclass(frozen=True)
class TurnResult:
    """Everything the service layer must deliver for one exchange.

    `phase` and `status` snapshot the session as the turn finished
    (`state` is the live, mutable session object).
    """

    segments: tuple[SpeechSegment, ...]
    display: DisplayState
    cues: tuple[ActionCue, ...]
    decision: TransitionDecision | None
    state: SessionState
    phase: Phase
    status: SessionStatus
    error: str | None = None


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class SessionEngine:
    """Drives one session over shared immutable resources plus its own gateway."""

    def __init__(
        self,
        gateway: LLMGateway,
        prompt_engine: PromptEngine,
        catalog: CourseCatalog,
        hub: KnowledgeHub,
        *,
        session_id: str = "local",
        phase_configs: dict[Phase, PhaseConfig] | None = None,
        schedule_start: time = time(10, 0),
        day_cutoff: time = time(18, 0),
        state: SessionState | None = None,
    ) -> None:
        self.gateway = gateway
        self.prompts = prompt_engine
        self.catalog = catalog
        self.hub = hub
        self.phase_configs = phase_configs or default_phase_configs()
        self.schedule_start = schedule_start
        self.day_cutoff = day_cutoff
        self.state = state or SessionState(session_id=session_id)
        self.selector = CourseSelector(catalog, gateway, prompt_engine, hub.spots)
        self.spot_index = NameIndex.for_spots(hub.spots)
        self.course_index = NameIndex.for_courses(catalog)
        self.records: list[TranscriptRecord] = []
        # Hook-call completions are transcribed in exact call order.
        gateway.tap = self._record_backend_call

    # -- transcript -------------------------------------------------------

    def _record(self, speaker: str, text: str) -> None:
        self.records.append(
            TranscriptRecord(
                index=len(self.records),
                phase=int(self.state.current_phase),
                speaker=speaker,
                text=text,
                timestamp=_now_iso(),
            )
        )

    def _record_backend_call(self, raw: str) -> None:
        self._record("backend", raw)

    # -- public API -------------------------------------------------------

    def start(self) -> TurnResult:
        """Open the session: speak the greeting, bow, count zero turns.

        The greeting is system-only; a turn is a customer/system exchange,
        so turns_in_phase stays 0 until the first reply to a customer.
        """
        state = self.state
        if state.history:
            raise SessionError("session already started")
        config = self.phase_configs[state.current_phase]
        prompt = self.prompts.render(
            config.prompt_template_id, self._context_for(state.current_phase), state.history
        )
        reply = self.gateway.speak(prompt.text)
        spoken = strip_end_sign(reply.raw_text) or PHASE_CLOSERS[state.current_phase]
        state.history.append(
            DialogueTurn(Speaker.SYSTEM, spoken, state.current_phase, state.next_index(), reply.raw_text)
        )
        self._record(Speaker.SYSTEM.value, reply.raw_text)
        state.display = display_rules.update(
            state.display, spoken, self.spot_index, self.course_index,
            spot_directory=self.hub.spots, catalog=self.catalog,
        )
        cues = display_rules.action_cues(None, state.current_phase)
        return TurnResult(
            segments=self._fallback_segments(reply.segments, spoken),
            display=state.display,
            cues=tuple(cues),
            decision=None,
            state=state,
            phase=state.current_phase,
            status=state.status,
        )

    def advance(self, customer_utterance: str) -> TurnResult:
        """Run one full exchange and any resulting phase transition.

        Backend failures leave the session state untouched and re-raise;
        hook failures mark the session failed and are reported in the
        result rather than raised, because the turn itself completed.
        """
        state = self.state
        if state.status is not SessionStatus.ACTIVE:
            raise SessionNotActiveError(f"session is {state.status.value}")
        if not customer_utterance.strip():
            raise ValueError("customer utterance must be non-empty")

        config = self.phase_configs[state.current_phase]
        state.history.append(
            DialogueTurn(
                Speaker.CUSTOMER, customer_utterance.strip(), state.current_phase, state.next_index()
            )
        )
        try:
            prompt = self.prompts.render(
                config.prompt_template_id, self._context_for(state.current_phase), state.history
            )
            reply = self.gateway.speak(prompt.text)
        except Exception:
            state.history.pop()  # keep the turn atomic
            raise
        self._record(Speaker.CUSTOMER.value, customer_utterance.strip())

        spoken = strip_end_sign(reply.raw_text) or PHASE_CLOSERS[state.current_phase]
        state.history.append(
            DialogueTurn(Speaker.SYSTEM, spoken, state.current_phase, state.next_index(), reply.raw_text)
        )
        self._record(Speaker.SYSTEM.value, reply.raw_text)
        state.turns_in_phase += 1

        segments = self._fallback_segments(reply.segments, spoken)
        state.display = display_rules.update(
            state.display, spoken, self.spot_index, self.course_index,
            spot_directory=self.hub.spots, catalog=self.catalog,
        )
        decision = check_transition(reply.raw_text, state.turns_in_phase, config)
        cues: list[ActionCue] = []

        if decision.advances:
            new_phase = state.current_phase.successor()
            state.current_phase = new_phase
            state.turns_in_phase = 0
            try:
                self._run_entry_hooks(new_phase)
            except HookFailure as exc:
                state.status = SessionStatus.FAILED
                logger.error("session %s failed: %s", state.session_id, exc)
                return TurnResult(
                    segments, state.display, tuple(cues), decision, state,
                    phase=state.current_phase, status=state.status, error=str(exc),
                )
            state.display = display_rules.reset_for_phase(
                state.display, new_phase, state.decided_spots
            )
            cues.extend(self.phase_configs[new_phase].entry_actions)
        elif decision is TransitionDecision.CLOSE:
            state.final_plan = self._assemble_plan()
            state.status = SessionStatus.CLOSED
            cues.extend(display_rules.action_cues(decision, state.current_phase))

        return TurnResult(
            segments, state.display, tuple(cues), decision, state,
            phase=state.current_phase, status=state.status,
        )

    # -- internals --------------------------------------------------------

    @staticmethod
    def _fallback_segments(
        segments: tuple[SpeechSegment, ...], spoken: str
    ) -> tuple[SpeechSegment, ...]:
        # A sign-only completion strips to nothing; speak the canned closer.
        if segments:
            return segments
        return (SpeechSegment(text=spoken, index=0, terminal=True),)

    def _context_for(self, phase: Phase) -> PromptContext:
        state = self.state
        if phase is Phase.ICE_BREAKER:
            return PromptContext({"smalltalk_hint": "旅の予定、季節の話題、京都の印象など"})
        if phase is Phase.INQUIRY:
            return PromptContext(
                {"preference_checklist": "興味の方向（寺社・自然・食・歴史）、歩く量、写真の好み、予算感"}
            )
        if phase is Phase.COURSE_SPOT_SELECTION:
            first, second = state.selected_courses
            return PromptContext(
                {
                    "course_a": f"{first.title}──{first.summary}（{'−'.join(first.spots)}）",
                    "course_b": f"{second.title}──{second.summary}（{'−'.join(second.spots)}）",
                }
            )
        if phase is Phase.SCHEDULE_PROPOSAL:
            facts = "\n".join(self.hub.spot_fact_sheet(s) for s in state.decided_spots)
            assert state.route_plan is not None and state.schedule is not None
            return PromptContext(
                {
                    "spot_facts": facts,
                    "route_narrative": state.route_plan.narrative,
                    "schedule_draft": state.schedule.describe(),
                }
            )
        summary = self._plan_summary()
        return PromptContext({"plan_summary": summary})

    def _plan_summary(self) -> str:
        state = self.state
        names = "と".join(s.name for s in state.decided_spots) or "未定"
        if state.schedule is not None:
            return (
                f"決定スポット: {names}。"
                f"開始 {state.schedule.start_time:%H:%M}、終了予定 {state.schedule.end_time:%H:%M}。"
            )
        return f"決定スポット: {names}。"

    def _run_entry_hooks(self, phase: Phase) -> None:
        state = self.state
        for hook in self.phase_configs[phase].entry_hooks:
            try:
                if hook == "run-course-selection":
                    state.selected_courses = self.selector.select_top2(state.history)
                elif hook == "extract-spots":
                    decision: SpotDecision = self.selector.extract_spots(state.history)
                    state.decided_spots = tuple(self.hub.get_spot(n) for n in decision.spots)
                elif hook == "fetch-route":
                    a, b = state.decided_spots
                    state.route_plan = self.hub.find_route(a, b)
                elif hook == "build-schedule":
                    a, b = state.decided_spots
                    assert state.route_plan is not None
                    state.schedule = self.hub.build_schedule(
                        a, b, state.route_plan, self.schedule_start, day_cutoff=self.day_cutoff
                    )
                else:
                    raise HookFailure(f"unknown entry hook: {hook!r}")
            except (SelectionError, KnowledgeError) as exc:
                raise HookFailure(f"hook {hook!r} failed: {exc}") from exc

    def _assemble_plan(self) -> TravelPlan:
        state = self.state
        if len(state.decided_spots) != 2 or state.route_plan is None or state.schedule is None:
            raise SessionError("cannot close: plan prerequisites missing")
        return TravelPlan(
            spots=(state.decided_spots[0], state.decided_spots[1]),
            route=state.route_plan,
            schedule=state.schedule,
        )


__all__ = [
    "DialogueTurn",
    "HookFailure",
    "PHASE_CLOSERS",
    "SessionEngine",
    "SessionError",
    "SessionNotActiveError",
    "SessionState",
    "SessionStatus",
    "Speaker",
    "TravelPlan",
    "TurnResult",
    "END_SIGN",
]
