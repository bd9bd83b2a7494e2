"""Tourist-spot facts, transit routes, day schedules, and their text forms.

Fixture providers are the default and are exhaustive over the shipped
catalog; remote adapters with identical interfaces can be swapped in via
config. Route responses are converted to natural language with external
text templates before prompt injection. Units: minutes and yen, integers.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from datetime import date, datetime, time, timedelta
from pathlib import Path
from typing import Iterable, Protocol

WALK_SPEED_M_PER_MIN = 80  # pedestrian planning convention

_PAREN_RE = re.compile(r"[（(][^（）()]*[）)]")


class KnowledgeError(Exception):
    pass


class UnknownSpotError(KnowledgeError):
    def __init__(self, name: str) -> None:
        super().__init__(f"unknown spot: {name!r}")
        self.name = name


class NoRouteError(KnowledgeError):
    pass


class ProviderUnavailableError(KnowledgeError):
    pass


class DayOverflowError(KnowledgeError):
    pass


def normalize_spot_name(text: str) -> str:
    """Trim and drop parenthesized decorations (e.g. furigana readings)."""
    return _PAREN_RE.sub("", text).strip()


@dataclass(frozen=True)
class SpotInfo:
    """Facts for one tourist spot, as the viewer and prompts need them."""

    name: str
    furigana: str
    image_ref: str
    lat: float
    lon: float
    open_hours: str
    fee_yen: int
    stay_minutes: int
    blurb: str
    aliases: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.furigana:
            raise ValueError(f"spot {self.name!r} needs a furigana reading")
        if not (-90.0 <= self.lat <= 90.0 and -180.0 <= self.lon <= 180.0):
            raise ValueError(f"spot {self.name!r} has out-of-range coordinates")
        if self.stay_minutes <= 0:
            raise ValueError(f"spot {self.name!r} needs a positive stay time")


class Mode:
    WALK = "walk"
    BUS = "bus"
    TRAIN = "train"
    TAXI = "taxi"

    ALL = (WALK, BUS, TRAIN, TAXI)
    LABELS = {WALK: "徒歩", BUS: "バス", TRAIN: "電車", TAXI: "タクシー"}


@dataclass(frozen=True)
class RouteLeg:
    """One hop; endpoints may be spots or stations and must chain."""

    origin: str
    destination: str
    mode: str
    minutes: int
    line_name: str | None = None
    fare_yen: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in Mode.ALL:
            raise ValueError(f"unknown transit mode: {self.mode!r}")
        if self.minutes <= 0:
            raise ValueError("leg minutes must be positive")


@dataclass(frozen=True)
class RoutePlan:
    legs: tuple[RouteLeg, ...]
    total_minutes: int
    narrative: str
    approximate: bool = False

    def __post_init__(self) -> None:
        if self.total_minutes != sum(leg.minutes for leg in self.legs):
            raise ValueError("total_minutes must equal the sum of leg minutes")
        for a, b in zip(self.legs, self.legs[1:]):
            if a.destination != b.origin:
                raise ValueError(f"legs do not chain: {a.destination!r} -> {b.origin!r}")


@dataclass(frozen=True)
class ScheduleEntry:
    start: time
    end: time
    activity: str


@dataclass(frozen=True)
class Schedule:
    """Timed single-day itinerary; entries are contiguous and increasing."""

    entries: tuple[ScheduleEntry, ...]

    @property
    def start_time(self) -> time:
        return self.entries[0].start

    @property
    def end_time(self) -> time:
        return self.entries[-1].end

    def describe(self) -> str:
        return "、".join(
            f"{e.start:%H:%M}〜{e.end:%H:%M} {e.activity}" for e in self.entries
        )


class SpotDirectory:
    """Canonical-name and alias lookup over the spot fixture set."""

    def __init__(self, spots: Iterable[SpotInfo]) -> None:
        self._spots: dict[str, SpotInfo] = {}
        self._index: dict[str, str] = {}
        for spot in spots:
            if spot.name in self._spots:
                raise ValueError(f"duplicate spot name: {spot.name!r}")
            self._spots[spot.name] = spot
            self._index[spot.name] = spot.name
            for alias in spot.aliases:
                self._index.setdefault(alias, spot.name)

    @classmethod
    def from_file(cls, path: str | Path) -> "SpotDirectory":
        return cls(_parse_spot_records(Path(path).read_text(encoding="utf-8")))

    def __len__(self) -> int:
        return len(self._spots)

    def __iter__(self):
        return iter(self._spots.values())

    def names_and_aliases(self) -> dict[str, SpotInfo]:
        """Every known surface form -> its spot, for mention matching."""
        return {surface: self._spots[canon] for surface, canon in self._index.items()}

    def get(self, name_or_alias: str) -> SpotInfo:
        key = normalize_spot_name(name_or_alias)
        canon = self._index.get(key)
        if canon is None:
            raise UnknownSpotError(name_or_alias)
        return self._spots[canon]

    def resolve(self, name_or_alias: str) -> SpotInfo | None:
        try:
            return self.get(name_or_alias)
        except UnknownSpotError:
            return None


class RouteProvider(Protocol):
    def find(self, origin: SpotInfo, destination: SpotInfo) -> list[RouteLeg]: ...


class FixtureRouteProvider:
    """Canned routes keyed by (origin, destination) canonical names.

    A pair marked `no-route` raises NoRouteError; a pair simply absent is
    reported as provider-unavailable so the hub can fall back to an
    approximate walking estimate.
    """

    def __init__(self, table: dict[tuple[str, str], list[RouteLeg] | None]) -> None:
        self._table = table

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureRouteProvider":
        return cls(_parse_route_records(Path(path).read_text(encoding="utf-8")))

    def find(self, origin: SpotInfo, destination: SpotInfo) -> list[RouteLeg]:
        key = (origin.name, destination.name)
        if key not in self._table:
            raise ProviderUnavailableError(f"no fixture route for {key[0]} -> {key[1]}")
        legs = self._table[key]
        if legs is None:
            raise NoRouteError(f"no route exists between {key[0]} and {key[1]}")
        return list(legs)


class FailingRouteProvider:
    """Test helper standing in for an unreachable route service."""

    def find(self, origin: SpotInfo, destination: SpotInfo) -> list[RouteLeg]:
        raise ProviderUnavailableError("route provider down")


def haversine_meters(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    r = 6_371_000.0
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = math.radians(lat2 - lat1), math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * r * math.asin(math.sqrt(a))


class NarrativeTemplates:
    """External text templates with {slot} placeholders for route rendering."""

    FILES = ("route_leg", "route_fare_clause", "route_summary", "route_identity", "route_approx_note")

    def __init__(self, template_dir: str | Path) -> None:
        self._texts: dict[str, str] = {}
        for name in self.FILES:
            path = Path(template_dir) / f"{name}.txt"
            self._texts[name] = path.read_text(encoding="utf-8").strip()

    def fill(self, name: str, **slots) -> str:
        text = self._texts[name]
        for key, value in slots.items():
            text = text.replace("{" + key + "}", str(value))
        return text


class KnowledgeHub:
    """Facade over spot facts, routing, scheduling, and narration."""

    def __init__(
        self,
        spots: SpotDirectory,
        routes: RouteProvider,
        narratives: NarrativeTemplates,
    ) -> None:
        self.spots = spots
        self._routes = routes
        self._narratives = narratives

    def get_spot(self, name_or_alias: str) -> SpotInfo:
        return self.spots.get(name_or_alias)

    def find_route(self, origin: SpotInfo, destination: SpotInfo) -> RoutePlan:
        """Route between two spots; degrades to a flagged walking estimate.

        The identity route is a zero-leg plan. When the provider is
        unavailable (or has no canned data), a straight-line walking
        estimate is returned with approximate=True instead of failing.
        """
        if origin.name == destination.name:
            return RoutePlan(legs=(), total_minutes=0, narrative=self._narratives.fill("route_identity"))
        approximate = False
        try:
            legs = tuple(self._routes.find(origin, destination))
        except ProviderUnavailableError:
            meters = haversine_meters(origin.lat, origin.lon, destination.lat, destination.lon)
            minutes = max(1, math.ceil(meters / WALK_SPEED_M_PER_MIN))
            legs = (RouteLeg(origin.name, destination.name, Mode.WALK, minutes),)
            approximate = True
        plan = RoutePlan(
            legs=legs,
            total_minutes=sum(leg.minutes for leg in legs),
            narrative="",
            approximate=approximate,
        )
        return replace(plan, narrative=self.render_route_nl(plan))

    def render_route_nl(self, plan: RoutePlan) -> str:
        """Deterministic template fill naming every leg's mode and minutes."""
        if not plan.legs:
            return self._narratives.fill("route_identity")
        sentences = []
        for leg in plan.legs:
            vehicle = Mode.LABELS[leg.mode]
            if leg.line_name:
                vehicle = f"{leg.line_name}（{vehicle}）"
            sentence = self._narratives.fill(
                "route_leg",
                origin=leg.origin,
                destination=leg.destination,
                vehicle=vehicle,
                minutes=leg.minutes,
            )
            if leg.fare_yen is not None:
                sentence += self._narratives.fill("route_fare_clause", fare=leg.fare_yen)
            sentences.append(sentence + "。")
        summary = self._narratives.fill("route_summary", total=plan.total_minutes)
        text = "".join(sentences) + summary
        if plan.approximate:
            text += self._narratives.fill("route_approx_note")
        return text

    def build_schedule(
        self,
        first: SpotInfo,
        second: SpotInfo,
        route_between: RoutePlan,
        start_time: time,
        *,
        day_cutoff: time = time(18, 0),
    ) -> Schedule:
        """Visit both spots (exact stay times) with the transit in between.

        Raises DayOverflowError when the plan runs past the cutoff.
        """
        if first.name == second.name:
            raise ValueError("schedule needs two distinct spots")
        anchor = datetime.combine(date(2000, 1, 1), start_time)
        cursor = anchor
        entries: list[ScheduleEntry] = []

        def push(minutes: int, activity: str) -> None:
            nonlocal cursor
            end = cursor + timedelta(minutes=minutes)
            entries.append(ScheduleEntry(cursor.time(), end.time(), activity))
            cursor = end

        push(first.stay_minutes, f"{first.name}を見学")
        if route_between.total_minutes > 0:
            push(route_between.total_minutes, f"移動（{first.name}→{second.name}）")
        push(second.stay_minutes, f"{second.name}を見学")

        if cursor.date() != anchor.date() or cursor.time() > day_cutoff:
            raise DayOverflowError(
                f"schedule ends at {cursor.time():%H:%M}, past the {day_cutoff:%H:%M} cutoff"
            )
        return Schedule(entries=tuple(entries))

    def spot_fact_sheet(self, spot: SpotInfo) -> str:
        """One-line plain-text fact sheet for prompt context injection."""
        fee = "無料" if spot.fee_yen == 0 else f"{spot.fee_yen}円"
        return (
            f"{spot.name}（{spot.furigana}）: {spot.blurb} "
            f"拝観・営業時間: {spot.open_hours}、料金: {fee}、目安の滞在時間: {spot.stay_minutes}分"
        )


def _parse_blocks(text: str) -> list[dict[str, list[str]]]:
    """Parse the structured-text fixture format: `key: value` lines, blank-line
    separated records, `#` comments. Repeated keys accumulate in order."""
    records: list[dict[str, list[str]]] = []
    current: dict[str, list[str]] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("#"):
            continue
        if not line:
            if current:
                records.append(current)
                current = {}
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise ValueError(f"bad fixture line (missing ':'): {raw!r}")
        current.setdefault(key.strip(), []).append(value.strip())
    if current:
        records.append(current)
    return records


def _one(record: dict[str, list[str]], key: str) -> str:
    values = record.get(key) or []
    if len(values) != 1:
        raise ValueError(f"fixture record needs exactly one {key!r}: {record}")
    return values[0]


def _parse_spot_records(text: str) -> list[SpotInfo]:
    spots = []
    for record in _parse_blocks(text):
        aliases = tuple(
            a.strip() for a in _one(record, "aliases").split(",") if a.strip()
        ) if "aliases" in record else ()
        spots.append(
            SpotInfo(
                name=_one(record, "name"),
                furigana=_one(record, "furigana"),
                image_ref=_one(record, "image"),
                lat=float(_one(record, "lat")),
                lon=float(_one(record, "lon")),
                open_hours=_one(record, "hours"),
                fee_yen=int(_one(record, "fee")),
                stay_minutes=int(_one(record, "stay")),
                blurb=_one(record, "blurb"),
                aliases=aliases,
            )
        )
    return spots


def _parse_route_records(text: str) -> dict[tuple[str, str], list[RouteLeg] | None]:
    table: dict[tuple[str, str], list[RouteLeg] | None] = {}
    for record in _parse_blocks(text):
        key = (_one(record, "from"), _one(record, "to"))
        if record.get("no-route"):
            table[key] = None
            continue
        legs = []
        for entry in record.get("leg", []):
            fields = [f.strip() for f in entry.split(",")]
            if len(fields) < 4:
                raise ValueError(f"route leg needs mode, minutes, from, to: {entry!r}")
            mode, minutes, origin, destination = fields[:4]
            line_name = fields[4] if len(fields) > 4 and fields[4] else None
            fare = int(fields[5]) if len(fields) > 5 and fields[5] else None
            legs.append(
                RouteLeg(
                    origin=origin,
                    destination=destination,
                    mode=mode,
                    minutes=int(minutes),
                    line_name=line_name,
                    fare_yen=fare,
                )
            )
        if not legs:
            raise ValueError(f"route record for {key} has no legs")
        table[key] = legs
    return table
