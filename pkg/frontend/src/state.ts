// View model and the reducer that folds wire messages into it.
// Messages are applied strictly in arrival order; sequence numbers are
// checked, never reordered.

import type {
  ActionCuePayload,
  DisplayStatePayload,
  ErrorPayload,
  PhaseChangedPayload,
  SessionClosedPayload,
  SpeechSegmentPayload,
  WireMessage,
} from "./protocol.js";

export type ConnectionStatus = "idle" | "connecting" | "open" | "retrying" | "closed";

export interface ChatTurn {
  role: "system" | "customer";
  text: string;
  pending?: boolean; // optimistic local echo, not yet confirmed by the server
}

export interface ViewModel {
  connection: ConnectionStatus;
  sessionId: string | null;
  phase: number;
  phaseLabel: string;
  chat: ChatTurn[];
  inFlight: string[]; // segments of the system turn currently streaming
  display: DisplayStatePayload;
  lastCue: ActionCuePayload | null;
  closed: boolean;
  sessionStatus: "active" | "closed" | "failed";
  plan: SessionClosedPayload["plan"];
  errors: string[];
  lastSeq: number;
  awaitingReply: boolean; // input stays disabled until the turn's display_state
}

export function initialViewModel(): ViewModel {
  return {
    connection: "idle",
    sessionId: null,
    phase: 1,
    phaseLabel: "",
    chat: [],
    inFlight: [],
    display: { mode: "spot-slots", turn_index: 0, show_maps: false, slots: [], course: null },
    lastCue: null,
    closed: false,
    sessionStatus: "active",
    plan: null,
    errors: [],
    lastSeq: -1,
    awaitingReply: false,
  };
}

export function localEcho(vm: ViewModel, text: string): void {
  vm.chat.push({ role: "customer", text, pending: true });
  vm.awaitingReply = true;
}

function confirmEcho(vm: ViewModel, text: string): void {
  for (let i = vm.chat.length - 1; i >= 0; i--) {
    const turn = vm.chat[i];
    if (turn.role === "customer" && turn.pending && turn.text === text) {
      turn.pending = false;
      return;
    }
  }
  // Echo without a local counterpart (e.g. view rebuilt after reconnect).
  vm.chat.push({ role: "customer", text });
}

function finishSystemTurn(vm: ViewModel): void {
  if (vm.inFlight.length > 0) {
    vm.chat.push({ role: "system", text: vm.inFlight.join("") });
    vm.inFlight = [];
  }
}

export function applyMessage(vm: ViewModel, message: WireMessage): void {
  if (message.seq <= vm.lastSeq) {
    throw new Error(`sequence went backwards: ${vm.lastSeq} -> ${message.seq}`);
  }
  vm.lastSeq = message.seq;

  switch (message.kind) {
    case "customer_utterance":
      confirmEcho(vm, String((message.payload as { text?: unknown }).text ?? ""));
      break;
    case "speech_segment": {
      const payload = message.payload as unknown as SpeechSegmentPayload;
      vm.inFlight.push(payload.text); // arrival order == sequence order
      break;
    }
    case "display_state": {
      finishSystemTurn(vm);
      const payload = message.payload as unknown as DisplayStatePayload;
      if (payload.slots.length > 4) {
        throw new Error(`server sent ${payload.slots.length} cards; panel holds 4`);
      }
      vm.display = payload;
      vm.awaitingReply = false;
      break;
    }
    case "action_cue":
      vm.lastCue = message.payload as unknown as ActionCuePayload;
      break;
    case "phase_changed": {
      const payload = message.payload as unknown as PhaseChangedPayload;
      vm.phase = payload.phase;
      vm.phaseLabel = payload.label;
      break;
    }
    case "session_closed": {
      finishSystemTurn(vm);
      const payload = message.payload as unknown as SessionClosedPayload;
      vm.closed = true;
      vm.sessionStatus = payload.status;
      vm.plan = payload.plan;
      vm.awaitingReply = false;
      break;
    }
    case "error": {
      const payload = message.payload as unknown as ErrorPayload;
      vm.errors.push(`${payload.code}: ${payload.message}`);
      vm.awaitingReply = false; // let the customer try again
      break;
    }
  }
}
