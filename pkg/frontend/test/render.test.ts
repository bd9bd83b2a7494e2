// DOM rendering: ruby furigana, card cap assertion, maps, course grid.

import { describe, expect, it } from "vitest";

import { MAX_CARDS, render, tileUrlFor } from "../src/render.js";
import { applyMessage, initialViewModel, type ViewModel } from "../src/state.js";
import type { WireMessage, SpotCardPayload } from "../src/protocol.js";
import frames from "./fixtures/session_messages.json";

const session = frames as WireMessage[];

function card(name: string, furigana: string): SpotCardPayload {
  return { name, furigana, image: `images/${name}.jpg`, lat: 35.0, lon: 135.75, shown_since_turn: 1 };
}

function vmWithCards(cards: SpotCardPayload[], showMaps = false): ViewModel {
  const vm = initialViewModel();
  vm.display = { mode: "spot-slots", turn_index: 1, show_maps: showMaps, slots: cards, course: null };
  return vm;
}

function mount(): HTMLElement {
  const root = document.createElement("div");
  document.body.appendChild(root);
  return root;
}

describe("spot cards", () => {
  it("renders ruby furigana above every spot name", () => {
    const root = mount();
    render(vmWithCards([card("清水寺", "きよみずでら"), card("金閣寺", "きんかくじ")]), root);
    const cards = root.querySelectorAll(".spot-card");
    expect(cards.length).toBe(2);
    for (const node of cards) {
      const rt = node.querySelector("ruby rt");
      expect(rt?.textContent).toBeTruthy();
    }
    expect(root.querySelector("ruby")?.textContent).toContain("清水寺");
  });

  it("refuses to render more than four cards", () => {
    const root = mount();
    const five = ["一", "二", "三", "四", "五"].map((n) => card(n, "ふり"));
    expect(() => render(vmWithCards(five), root)).toThrow(/limit is 4/);
    expect(MAX_CARDS).toBe(4);
  });

  it("shows a static map tile with a marker when maps are on", () => {
    const root = mount();
    render(vmWithCards([card("金閣寺", "きんかくじ"), card("清水寺", "きよみずでら")], true), root);
    const tiles = root.querySelectorAll(".map-tile");
    expect(tiles.length).toBe(2);
    expect((tiles[0] as HTMLImageElement).src).toMatch(/tile\.openstreetmap\.org\/15\/\d+\/\d+\.png/);
    expect(root.querySelectorAll(".map-marker").length).toBe(2);
  });

  it("computes the slippy tile containing the coordinates", () => {
    // Kyoto city center ends up in the expected zoom-15 tile.
    expect(tileUrlFor(35.0, 135.75, 15)).toBe("https://tile.openstreetmap.org/15/28740/12979.png");
  });
});

describe("course list mode", () => {
  it("renders the course title and its image grid", () => {
    const vm = initialViewModel();
    vm.display = {
      mode: "course-list",
      turn_index: 3,
      show_maps: false,
      slots: [],
      course: { id: "K02", title: "紅葉満喫コース", images: ["a.jpg", "b.jpg", "c.jpg"] },
    };
    const root = mount();
    render(vm, root);
    expect(root.querySelector(".course-title")?.textContent).toBe("紅葉満喫コース");
    expect(root.querySelectorAll(".course-image").length).toBe(3);
    expect(root.querySelectorAll(".spot-card").length).toBe(0);
  });
});

describe("chat panel", () => {
  it("shows completed turns and the in-flight streaming bubble", () => {
    const vm = initialViewModel();
    vm.chat.push({ role: "system", text: "いらっしゃいませ。" });
    vm.chat.push({ role: "customer", text: "こんにちは" });
    vm.inFlight = ["ようこそ。", "京都へ。"];
    const root = mount();
    render(vm, root);
    const turns = root.querySelectorAll(".chat-turn");
    expect(turns.length).toBe(3);
    const streaming = root.querySelector(".chat-turn.streaming");
    expect(streaming?.querySelectorAll(".segment").length).toBe(2);
    expect(streaming?.textContent).toBe("ようこそ。京都へ。");
  });
});

describe("full captured session", () => {
  it("renders after every frame without breaking invariants", () => {
    const vm = initialViewModel();
    const root = mount();
    for (const frame of session) {
      applyMessage(vm, frame);
      render(vm, root);
      expect(root.querySelectorAll(".spot-card").length).toBeLessThanOrEqual(4);
      const badge = root.querySelector(".phase-badge");
      expect(badge?.textContent).toContain(`Phase ${vm.phase}`);
    }
    // closed session: plan card with both spots in ruby
    const planSpots = root.querySelectorAll(".plan-spot ruby");
    expect(planSpots.length).toBe(2);
  });
});
