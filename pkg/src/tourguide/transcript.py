"""Line-delimited session transcripts.

One JSON record per line: index (file sequence), phase ordinal, speaker
(system / customer / backend), text, timestamp. System and backend texts
are the raw completions (end sign included) so a transcript can refeed a
scripted backend and reproduce the session exactly; consumers that need
spoken text strip the sign themselves. The same file format is both the
persistence format and the replay input.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

SPEAKERS = ("system", "customer", "backend")


class TranscriptError(Exception):
    pass


@dataclass(frozen=True)
class TranscriptRecord:
    index: int
    phase: int
    speaker: str
    text: str
    timestamp: str

    def __post_init__(self) -> None:
        if self.speaker not in SPEAKERS:
            raise ValueError(f"unknown speaker: {self.speaker!r}")


def write_transcript(path: str | Path, records: Iterable[TranscriptRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(asdict(record), ensure_ascii=False) + "\n")


def read_transcript(path: str | Path) -> list[TranscriptRecord]:
    text = Path(path).read_text(encoding="utf-8")
    records = parse_transcript(text)
    if not records:
        raise TranscriptError(f"transcript {path} is empty")
    return records


def parse_transcript(text: str) -> list[TranscriptRecord]:
    records: list[TranscriptRecord] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            records.append(
                TranscriptRecord(
                    index=int(data["index"]),
                    phase=int(data["phase"]),
                    speaker=str(data["speaker"]),
                    text=str(data["text"]),
                    timestamp=str(data["timestamp"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise TranscriptError(f"bad transcript record at line {lineno}: {exc}") from exc
    for prev, cur in zip(records, records[1:]):
        if cur.index <= prev.index:
            raise TranscriptError(f"record indices must increase: {prev.index} -> {cur.index}")
    return records


def backend_script(records: Iterable[TranscriptRecord]) -> list[str]:
    """Completions in original call order: system replies and hook calls."""
    return [r.text for r in records if r.speaker in ("system", "backend")]


def customer_inputs(records: Iterable[TranscriptRecord]) -> list[str]:
    return [r.text for r in records if r.speaker == "customer"]
