"""Server/runtime configuration and resource wiring.

Config is a plain dataclass loadable from a JSON file with environment
overrides (TOURGUIDE_<FIELD>). Fixture paths default to the packaged data
set so everything runs offline out of the box.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields, replace
from datetime import time
from importlib import resources as importlib_resources
from pathlib import Path

from .catalog import CourseCatalog
from .knowledge import (
    FixtureRouteProvider,
    KnowledgeHub,
    NarrativeTemplates,
    SpotDirectory,
)
from .llm import DEFAULT_PUNCTUATION
from .phases import Phase, PhaseConfig, default_phase_configs
from .prompts import PromptEngine


def data_path(*parts: str) -> Path:
    """Path into the packaged fixture data."""
    return Path(importlib_resources.files("tourguide")) / "data" / Path(*parts)


@dataclass(frozen=True)
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    backend_kind: str = "scripted-mock"  # scripted-mock | echo-mock | remote
    model_id: str = "gpt-4-32k-0613"
    api_base: str = ""
    api_key_env: str = "TOURGUIDE_API_KEY"
    backend_timeout: float = 30.0
    max_retries: int = 1
    script_path: str = ""  # scripted-mock completions, one per line
    catalog_path: str = ""
    spots_path: str = ""
    routes_path: str = ""
    template_dir: str = ""
    narrative_dir: str = ""
    phase_caps: tuple[int, int, int, int, int] = (3, 5, 10, 6, 2)
    punctuation: str = DEFAULT_PUNCTUATION
    schedule_start: str = "10:00"
    day_cutoff: str = "18:00"
    log_dir: str = "logs"
    max_sessions: int = 16

    def __post_init__(self) -> None:
        if not 0 < self.port < 65536:
            raise ValueError(f"invalid port: {self.port}")
        if len(self.phase_caps) != 5 or any(c < 1 for c in self.phase_caps):
            raise ValueError(f"phase_caps needs five positive entries: {self.phase_caps}")

    @classmethod
    def from_file(cls, path: str | Path) -> "ServerConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if "phase_caps" in data:
            data["phase_caps"] = tuple(data["phase_caps"])
        return cls(**data).with_env_overrides()

    def with_env_overrides(self) -> "ServerConfig":
        overrides = {}
        for f in fields(self):
            raw = os.environ.get(f"TOURGUIDE_{f.name.upper()}")
            if raw is None:
                continue
            if f.type in ("int", int):
                overrides[f.name] = int(raw)
            elif f.type in ("float", float):
                overrides[f.name] = float(raw)
            elif f.name == "phase_caps":
                overrides[f.name] = tuple(int(x) for x in raw.split(","))
            else:
                overrides[f.name] = raw
        return replace(self, **overrides) if overrides else self

    def api_key(self) -> str:
        return os.environ.get(self.api_key_env, "")

    def phase_configs(self) -> dict[Phase, PhaseConfig]:
        return default_phase_configs(self.phase_caps)

    def schedule_start_time(self) -> time:
        return _parse_clock(self.schedule_start)

    def day_cutoff_time(self) -> time:
        return _parse_clock(self.day_cutoff)

    def resolved_paths(self) -> dict[str, Path]:
        paths = {
            "catalog": Path(self.catalog_path) if self.catalog_path else data_path("courses.txt"),
            "spots": Path(self.spots_path) if self.spots_path else data_path("spots.txt"),
            "routes": Path(self.routes_path) if self.routes_path else data_path("routes.txt"),
            "templates": Path(self.template_dir) if self.template_dir else data_path("templates"),
            "narrative": Path(self.narrative_dir) if self.narrative_dir else data_path("narrative"),
        }
        for kind, path in paths.items():
            if not path.exists():
                raise FileNotFoundError(f"{kind} path does not exist: {path}")
        return paths


def _parse_clock(text: str) -> time:
    hour, _, minute = text.partition(":")
    return time(int(hour), int(minute or 0))


@dataclass(frozen=True)
class Resources:
    """Shared immutable state: catalog, spot facts, routes, templates."""

    catalog: CourseCatalog
    hub: KnowledgeHub
    prompts: PromptEngine


def load_resources(config: ServerConfig | None = None) -> Resources:
    config = config or ServerConfig()
    paths = config.resolved_paths()
    spots = SpotDirectory.from_file(paths["spots"])
    catalog = CourseCatalog.from_file(paths["catalog"])
    catalog.validate_spots(spots)
    hub = KnowledgeHub(
        spots=spots,
        routes=FixtureRouteProvider.from_file(paths["routes"]),
        narratives=NarrativeTemplates(paths["narrative"]),
    )
    prompts = PromptEngine(paths["templates"])
    return Resources(catalog=catalog, hub=hub, prompts=prompts)
