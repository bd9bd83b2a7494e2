"""Layered prompt assembly: persona/instruction, context slots, shots, history.

Every prompt follows one fixed layout so the backend sees a stable shape:

    <persona + task instruction>
    ---
    <injected context, filled from {slot} placeholders>
    ===
    <up to two worked example dialogues>
    ===
    <ongoing history as "Shoko:" / "Customer:" lines>
    Shoko:

Templates live as plain text files; the history section and the trailing
generation cue are appended at render time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Mapping, Sequence

if TYPE_CHECKING:
    from .session import DialogueTurn

CONTEXT_RULE = "---"
SHOT_RULE = "==="
MAX_SHOTS = 2

_SLOT_RE = re.compile(r"\{([a-z0-9_]+)\}")


class PromptError(Exception):
    pass


class UnknownTemplateError(PromptError):
    def __init__(self, template_id: str) -> None:
        super().__init__(f"unknown prompt template: {template_id!r}")
        self.template_id = template_id


class UnboundSlotError(PromptError):
    def __init__(self, template_id: str, slot: str) -> None:
        super().__init__(f"template {template_id!r} has no binding for slot {slot!r}")
        self.slot = slot


class EmptyHistoryError(PromptError):
    pass


class EmptyCatalogError(PromptError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    """A parsed template file: header, context skeleton, optional shots."""

    template_id: str
    persona_block: str
    instruction_block: str
    context_block: str
    context_slots: tuple[str, ...]
    shot_block: str
    shots: tuple[str, ...]

    @classmethod
    def parse(cls, template_id: str, text: str) -> "PromptTemplate":
        lines = text.splitlines()
        try:
            ctx_at = lines.index(CONTEXT_RULE)
        except ValueError:
            raise PromptError(f"template {template_id!r} is missing the {CONTEXT_RULE!r} rule")
        rest = lines[ctx_at + 1 :]
        if SHOT_RULE in rest:
            shot_at = rest.index(SHOT_RULE)
            context_lines, shot_lines = rest[:shot_at], rest[shot_at + 1 :]
        else:
            context_lines, shot_lines = rest, []

        header = "\n".join(lines[:ctx_at]).strip("\n")
        # First paragraph is the persona; the remainder is the task instruction.
        persona, _, instruction = header.partition("\n\n")
        context_block = "\n".join(context_lines).strip("\n")
        shot_block = "\n".join(shot_lines).strip("\n")
        shots = tuple(s for s in re.split(r"\n\s*\n", shot_block) if s.strip()) if shot_block else ()
        if len(shots) > MAX_SHOTS:
            raise PromptError(f"template {template_id!r} declares {len(shots)} shots; at most {MAX_SHOTS}")

        slots: list[str] = []
        for name in _SLOT_RE.findall(text):
            if name not in slots:
                slots.append(name)
        return cls(
            template_id=template_id,
            persona_block=persona.strip("\n"),
            instruction_block=instruction.strip("\n"),
            context_block=context_block,
            context_slots=tuple(slots),
            shot_block=shot_block,
            shots=shots,
        )


@dataclass(frozen=True)
class PromptContext:
    """Slot name -> plain-text value. Providers flatten structure upstream."""

    bindings: Mapping[str, str]

    @classmethod
    def empty(cls) -> "PromptContext":
        return cls({})


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    speaker_cue: str


def escape_rules(value: str) -> str:
    """Neutralize section rules inside bound values so they cannot reorder parsing."""
    out = []
    for line in value.splitlines():
        out.append("\\" + line if line in (CONTEXT_RULE, SHOT_RULE) else line)
    return "\n".join(out)


class PromptEngine:
    """Loads the template set once; rendering is pure and thread-safe."""

    def __init__(
        self,
        template_dir: str | Path,
        *,
        system_speaker: str = "Shoko",
        customer_speaker: str = "Customer",
        max_prompt_chars: int = 6000,
    ) -> None:
        self.system_speaker = system_speaker
        self.customer_speaker = customer_speaker
        self.max_prompt_chars = max_prompt_chars
        self._templates: dict[str, PromptTemplate] = {}
        template_dir = Path(template_dir)
        for path in sorted(template_dir.glob("*.txt")):
            self._templates[path.stem] = PromptTemplate.parse(
                path.stem, path.read_text(encoding="utf-8")
            )
        if not self._templates:
            raise PromptError(f"no templates found in {template_dir}")

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise UnknownTemplateError(template_id) from None

    @property
    def template_ids(self) -> tuple[str, ...]:
        return tuple(self._templates)

    def speaker_label(self, speaker: str) -> str:
        return self.system_speaker if speaker == "system" else self.customer_speaker

    def _history_lines(self, history: Sequence["DialogueTurn"]) -> list[str]:
        return [f"{self.speaker_label(turn.speaker)}: {turn.text}" for turn in history]

    def render(
        self,
        template_id: str,
        context: PromptContext,
        history: Sequence["DialogueTurn"] = (),
    ) -> RenderedPrompt:
        """Assemble the full prompt; deterministic for identical inputs.

        When the result exceeds the character budget, the oldest history
        turns are dropped first; persona, instruction, context, and shots
        are never trimmed.
        """
        template = self.get(template_id)

        def fill(block: str) -> str:
            def sub(match: re.Match[str]) -> str:
                name = match.group(1)
                if name not in context.bindings:
                    raise UnboundSlotError(template_id, name)
                return escape_rules(str(context.bindings[name]))

            return _SLOT_RE.sub(sub, block)

        header = fill(template.persona_block)
        if template.instruction_block:
            header += "\n\n" + fill(template.instruction_block)
        body = "\n".join(
            [header, CONTEXT_RULE, fill(template.context_block), SHOT_RULE, template.shot_block, SHOT_RULE]
        )

        cue = f"{self.system_speaker}:"
        history_lines = self._history_lines(history)
        while True:
            tail = "\n".join(history_lines + [cue])
            text = body + "\n" + tail
            if len(text) <= self.max_prompt_chars or not history_lines:
                break
            history_lines.pop(0)  # oldest first
        return RenderedPrompt(text=text, speaker_cue=cue)

    def build_course_selection_prompt(
        self,
        history: Sequence["DialogueTurn"],
        catalog_digest: Sequence[str],
    ) -> RenderedPrompt:
        """Prompt the backend for exactly two course ids, machine-readable."""
        if not history:
            raise EmptyHistoryError("course selection needs at least one dialogue turn")
        if not catalog_digest:
            raise EmptyCatalogError("course selection needs a non-empty catalog digest")
        context = PromptContext({"course_digest": "\n".join(catalog_digest)})
        return self.render("course_selection", context, history)

    def build_spot_extraction_prompt(
        self,
        history: Sequence["DialogueTurn"],
        *,
        strict: bool = False,
    ) -> RenderedPrompt:
        """Prompt the backend for the two decided spot names, catalog spelling.

        `strict` augments the instruction after a failed parse.
        """
        note = (
            "前回の出力は形式が正しくありませんでした。"
            "必ずスポット名を二つだけ、読点区切りで一行に出力してください。"
            if strict
            else ""
        )
        context = PromptContext({"strict_note": note})
        return self.render("spot_extraction", context, history)
