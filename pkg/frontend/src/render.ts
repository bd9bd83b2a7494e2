// DOM rendering for the viewer: chat log, spot cards with ruby furigana,
// course image grid, static map tiles, phase badge, connection banner.

import type { CoursePayload, SpotCardPayload } from "./protocol.js";
import type { ViewModel } from "./state.js";

export const MAX_CARDS = 4;

const CUE_LABELS: Record<string, string> = { bow: "🙇 お辞儀" };

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function rubyName(name: string, furigana: string): HTMLElement {
  // <ruby>清水寺<rt>きよみずでら</rt></ruby> — reading above the kanji
  const ruby = document.createElement("ruby");
  ruby.appendChild(document.createTextNode(name));
  const rt = document.createElement("rt");
  rt.textContent = furigana;
  ruby.appendChild(rt);
  return ruby;
}

// OSM slippy-map tile containing (lat, lon) at the given zoom.
export function tileUrlFor(lat: number, lon: number, zoom = 15): string {
  const n = 2 ** zoom;
  const x = Math.floor(((lon + 180) / 360) * n);
  const latRad = (lat * Math.PI) / 180;
  const y = Math.floor(((1 - Math.log(Math.tan(latRad) + 1 / Math.cos(latRad)) / Math.PI) / 2) * n);
  return `https://tile.openstreetmap.org/${zoom}/${x}/${y}.png`;
}

function spotCard(card: SpotCardPayload, showMap: boolean): HTMLElement {
  const figure = el("figure", "spot-card");
  const image = el("img", "spot-image");
  image.src = card.image;
  image.alt = card.name;
  figure.appendChild(image);
  const caption = el("figcaption", "spot-name");
  caption.appendChild(rubyName(card.name, card.furigana));
  figure.appendChild(caption);
  if (showMap) {
    const map = el("div", "map-panel");
    const tile = el("img", "map-tile");
    tile.src = tileUrlFor(card.lat, card.lon);
    tile.alt = `${card.name}周辺の地図`;
    map.appendChild(tile);
    map.appendChild(el("span", "map-marker", "📍"));
    figure.appendChild(map);
  }
  return figure;
}

function courseList(course: CoursePayload): HTMLElement {
  const panel = el("section", "course-list");
  panel.appendChild(el("h2", "course-title", course.title));
  const grid = el("div", "course-grid");
  for (const src of course.images.slice(0, 4)) {
    const image = el("img", "course-image");
    image.src = src;
    image.alt = course.title;
    grid.appendChild(image);
  }
  panel.appendChild(grid);
  return panel;
}

function displayPanel(vm: ViewModel): HTMLElement {
  const panel = el("section", "display-panel");
  if (vm.display.mode === "course-list" && vm.display.course) {
    panel.appendChild(courseList(vm.display.course));
    return panel;
  }
  const cards = vm.display.slots;
  if (cards.length > MAX_CARDS) {
    throw new Error(`refusing to render ${cards.length} cards; limit is ${MAX_CARDS}`);
  }
  const grid = el("div", "spot-grid");
  for (const card of cards) {
    grid.appendChild(spotCard(card, vm.display.show_maps));
  }
  panel.appendChild(grid);
  return panel;
}

function chatPanel(vm: ViewModel): HTMLElement {
  const panel = el("section", "chat-panel");
  const log = el("div", "chat-log");
  for (const turn of vm.chat) {
    const bubble = el("div", `chat-turn ${turn.role}${turn.pending ? " pending" : ""}`, turn.text);
    log.appendChild(bubble);
  }
  if (vm.inFlight.length > 0) {
    const streaming = el("div", "chat-turn system streaming");
    for (const segment of vm.inFlight) {
      streaming.appendChild(el("span", "segment", segment));
    }
    log.appendChild(streaming);
  }
  panel.appendChild(log);
  return panel;
}

function header(vm: ViewModel): HTMLElement {
  const bar = el("header", "status-bar");
  bar.appendChild(el("span", `phase-badge phase-${vm.phase}`, `Phase ${vm.phase}${vm.phaseLabel ? ": " + vm.phaseLabel : ""}`));
  const status = el("span", `connection ${vm.connection}`, connectionLabel(vm));
  bar.appendChild(status);
  if (vm.connection === "retrying" || vm.connection === "closed") {
    const retry = el("button", "retry-button", "再接続");
    retry.dataset.action = "retry";
    bar.appendChild(retry);
  }
  if (vm.lastCue && CUE_LABELS[vm.lastCue.kind]) {
    bar.appendChild(el("span", "action-cue", CUE_LABELS[vm.lastCue.kind]));
  }
  return bar;
}

function connectionLabel(vm: ViewModel): string {
  switch (vm.connection) {
    case "open":
      return "接続中";
    case "connecting":
      return "接続しています…";
    case "retrying":
      return "接続が切れました。再接続してください。";
    case "closed":
      return "切断されました";
    default:
      return "";
  }
}

function planCard(vm: ViewModel): HTMLElement | null {
  if (!vm.closed || !vm.plan) return null;
  const card = el("section", "plan-card");
  card.appendChild(el("h2", "plan-heading", "本日のプラン"));
  const spotsRow = el("div", "plan-spots");
  for (const spot of vm.plan.spots) {
    const name = el("span", "plan-spot");
    name.appendChild(rubyName(spot.name, spot.furigana));
    spotsRow.appendChild(name);
  }
  card.appendChild(spotsRow);
  card.appendChild(el("p", "plan-route", vm.plan.route.narrative));
  const scheduleList = el("ul", "plan-schedule");
  for (const entry of vm.plan.schedule.entries) {
    scheduleList.appendChild(el("li", "plan-entry", `${entry.start}〜${entry.end} ${entry.activity}`));
  }
  card.appendChild(scheduleList);
  return card;
}

export function render(vm: ViewModel, root: HTMLElement): void {
  root.replaceChildren();
  root.appendChild(header(vm));
  const main = el("main", "viewer-main");
  main.appendChild(chatPanel(vm));
  main.appendChild(displayPanel(vm));
  root.appendChild(main);
  const plan = planCard(vm);
  if (plan) root.appendChild(plan);
  if (vm.errors.length > 0) {
    root.appendChild(el("div", "error-banner", vm.errors[vm.errors.length - 1]));
  }
}
