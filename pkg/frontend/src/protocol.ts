// Wire schema of the session server, consumed verbatim.
// Every frame is JSON: { kind, session_id, seq, payload }.

export type MessageKind =
  | "customer_utterance"
  | "speech_segment"
  | "display_state"
  | "action_cue"
  | "phase_changed"
  | "session_closed"
  | "error";

export interface WireMessage {
  kind: MessageKind;
  session_id: string;
  seq: number;
  payload: Record<string, unknown>;
}

export interface SpeechSegmentPayload {
  text: string;
  index: number;
  terminal: boolean;
}

export interface SpotCardPayload {
  name: string;
  furigana: string;
  image: string;
  lat: number;
  lon: number;
  shown_since_turn: number;
}

export interface CoursePayload {
  id: string;
  title: string;
  images: string[];
}

export interface DisplayStatePayload {
  mode: "spot-slots" | "course-list";
  turn_index: number;
  show_maps: boolean;
  slots: SpotCardPayload[];
  course: CoursePayload | null;
}

export interface PhaseChangedPayload {
  phase: number;
  label: string;
  via: string;
}

export interface ActionCuePayload {
  kind: string;
  timing: string;
}

export interface SessionClosedPayload {
  status: "closed" | "failed";
  plan: {
    spots: { name: string; furigana: string; image: string; lat: number; lon: number }[];
    route: { total_minutes: number; narrative: string };
    schedule: { entries: { start: string; end: string; activity: string }[] };
  } | null;
}

export interface ErrorPayload {
  code: string;
  message: string;
}

export function parseWireMessage(raw: string): WireMessage {
  const data = JSON.parse(raw) as Partial<WireMessage>;
  if (typeof data.kind !== "string" || typeof data.seq !== "number") {
    throw new Error(`malformed wire message: ${raw.slice(0, 120)}`);
  }
  return data as WireMessage;
}

export function utteranceFrame(text: string): string {
  return JSON.stringify({ kind: "customer_utterance", payload: { text } });
}
