"""Headless session running: scripted simulations and transcript replay.

Simulation scripts are plain text: `C:` lines are customer utterances,
`S:` lines are scripted backend completions consumed in call order
(greeting and hook calls included), `#` starts a comment. `\\n` escapes
are allowed inside completions.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .config import Resources, ServerConfig, load_resources
from .display import DisplayState
from .llm import LLMGateway, ScriptedMockBackend, SpeechSegment
from .session import SessionEngine, SessionState, TurnResult
from .transcript import TranscriptRecord, backend_script, customer_inputs, read_transcript


class ScriptError(Exception):
    pass


@dataclass(frozen=True)
class DialogueScript:
    customer_lines: tuple[str, ...]
    backend_lines: tuple[str, ...]

    @classmethod
    def parse(cls, text: str) -> "DialogueScript":
        customers: list[str] = []
        backends: list[str] = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tag, sep, rest = line.partition(":")
            if not sep or tag.strip() not in ("C", "S"):
                raise ScriptError(f"line {lineno}: expected 'C:' or 'S:' prefix: {raw!r}")
            value = rest.strip().replace("\\n", "\n")
            if not value:
                raise ScriptError(f"line {lineno}: empty script line")
            (customers if tag.strip() == "C" else backends).append(value)
        if not backends:
            raise ScriptError("script has no backend (S:) lines")
        return cls(tuple(customers), tuple(backends))

    @classmethod
    def from_file(cls, path: str | Path) -> "DialogueScript":
        return cls.parse(Path(path).read_text(encoding="utf-8"))


@dataclass
class SessionRun:
    """Everything observable from one headless session execution."""

    state: SessionState
    results: list[TurnResult]
    segments: list[SpeechSegment]
    records: list[TranscriptRecord]

    @property
    def final_display(self) -> DisplayState:
        return self.state.display

    def phase_trace(self) -> list[int]:
        """Phase ordinal observed after each exchange (greeting included)."""
        return [int(result.phase) for result in self.results]


def build_engine(
    resources: Resources,
    backend_lines: Sequence[str],
    *,
    config: ServerConfig | None = None,
    session_id: str = "sim",
) -> SessionEngine:
    config = config or ServerConfig()
    gateway = LLMGateway(
        ScriptedMockBackend(list(backend_lines)),
        punctuation=config.punctuation,
        max_retries=config.max_retries,
    )
    return SessionEngine(
        gateway,
        resources.prompts,
        resources.catalog,
        resources.hub,
        session_id=session_id,
        phase_configs=config.phase_configs(),
        schedule_start=config.schedule_start_time(),
        day_cutoff=config.day_cutoff_time(),
    )


def run_session(
    engine: SessionEngine,
    customer_lines: Sequence[str],
    *,
    stop_when_inactive: bool = True,
) -> SessionRun:
    run = SessionRun(state=engine.state, results=[], segments=[], records=engine.records)
    result = engine.start()
    run.results.append(result)
    run.segments.extend(result.segments)
    for utterance in customer_lines:
        if stop_when_inactive and engine.state.status.value != "active":
            break
        result = engine.advance(utterance)
        run.results.append(result)
        run.segments.extend(result.segments)
    return run


def simulate(
    script_path: str | Path,
    *,
    config: ServerConfig | None = None,
    resources: Resources | None = None,
) -> SessionRun:
    """Run a fully scripted dialogue headless; deterministic end to end."""
    config = config or ServerConfig()
    resources = resources or load_resources(config)
    script = DialogueScript.from_file(script_path)
    engine = build_engine(resources, script.backend_lines, config=config)
    return run_session(engine, script.customer_lines)


def replay(
    transcript_path: str | Path,
    *,
    config: ServerConfig | None = None,
    resources: Resources | None = None,
) -> SessionRun:
    """Re-execute a recorded session against the scripted mock.

    The transcript's system/backend texts become the script, its customer
    texts the inputs; the run is deterministic and must land in the same
    final phase and display state the original reached.
    """
    config = config or ServerConfig()
    resources = resources or load_resources(config)
    records = read_transcript(transcript_path)
    engine = build_engine(resources, backend_script(records), config=config, session_id="replay")
    return run_session(engine, customer_inputs(records))


def format_plan(run: SessionRun) -> str:
    """Human-readable simulation summary for the CLI."""
    state = run.state
    lines = [
        f"session: {state.session_id}",
        f"status: {state.status.value}",
        f"phase: {int(state.current_phase)} ({state.current_phase.label})",
        f"turns: {sum(1 for t in state.history if t.speaker.value == 'customer')} customer exchanges",
    ]
    if state.final_plan is not None:
        plan = state.final_plan
        lines.append(f"spots: {plan.spots[0].name} / {plan.spots[1].name}")
        lines.append(f"route: {plan.route.narrative}")
        lines.append(f"schedule: {plan.schedule.describe()}")
    else:
        lines.append("plan: (none)")
    return "\n".join(lines)
