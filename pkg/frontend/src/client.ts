// Session client: creates a session over HTTP, attaches the WebSocket,
// folds incoming frames into the view model, and gates input so one
// utterance is in flight at a time. Reconnects keep the same session;
// the server replays a snapshot plus anything undelivered.

import { parseWireMessage, utteranceFrame } from "./protocol.js";
import { applyMessage, initialViewModel, localEcho, type ViewModel } from "./state.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;
export type FetchLike = (url: string, init?: { method?: string }) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}>;

export interface ClientOptions {
  socketFactory?: SocketFactory;
  fetchFn?: FetchLike;
  retryDelayMs?: number;
}

export class SessionClient {
  readonly vm: ViewModel = initialViewModel();

  private readonly serverUrl: string;
  private readonly socketFactory: SocketFactory;
  private readonly fetchFn: FetchLike;
  private readonly retryDelayMs: number;
  private socket: SocketLike | null = null;
  private listeners: Array<(vm: ViewModel) => void> = [];
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(serverUrl: string, options: ClientOptions = {}) {
    this.serverUrl = serverUrl.replace(/\/$/, "");
    this.socketFactory =
      options.socketFactory ?? ((url) => new WebSocket(url) as unknown as SocketLike);
    this.fetchFn = options.fetchFn ?? (fetch.bind(globalThis) as unknown as FetchLike);
    this.retryDelayMs = options.retryDelayMs ?? 2000;
  }

  onChange(listener: (vm: ViewModel) => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this.vm);
  }

  private wsUrl(): string {
    const base = this.serverUrl.replace(/^http/, "ws");
    return `${base}/ws/${this.vm.sessionId}`;
  }

  async connect(): Promise<void> {
    this.vm.connection = "connecting";
    this.notify();
    try {
      if (this.vm.sessionId === null) {
        const response = await this.fetchFn(`${this.serverUrl}/sessions`, { method: "POST" });
        if (!response.ok) {
          throw new Error(`session creation failed: ${response.status}`);
        }
        const body = (await response.json()) as { session_id: string };
        this.vm.sessionId = body.session_id;
      }
      this.attach();
    } catch (error) {
      this.vm.connection = "retrying";
      this.vm.errors.push(String(error));
      this.notify();
      this.scheduleRetry();
    }
  }

  private attach(): void {
    const socket = this.socketFactory(this.wsUrl());
    this.socket = socket;
    socket.onopen = () => {
      this.vm.connection = "open";
      this.notify();
    };
    socket.onmessage = (event) => {
      applyMessage(this.vm, parseWireMessage(event.data));
      this.notify();
    };
    socket.onclose = () => {
      if (this.vm.closed) {
        this.vm.connection = "closed";
        this.notify();
        return;
      }
      this.vm.connection = "retrying";
      this.notify();
      this.scheduleRetry();
    };
    socket.onerror = () => {
      // onclose follows; nothing else to do here
    };
  }

  private scheduleRetry(): void {
    if (this.retryTimer !== null) return;
    this.retryTimer = setTimeout(() => {
      this.retryTimer = null;
      void this.connect();
    }, this.retryDelayMs);
  }

  retryNow(): void {
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
      this.retryTimer = null;
    }
    void this.connect();
  }

  get inputEnabled(): boolean {
    return (
      this.vm.connection === "open" && !this.vm.closed && !this.vm.awaitingReply
    );
  }

  sendUtterance(text: string): boolean {
    const trimmed = text.trim();
    if (!trimmed || !this.inputEnabled || this.socket === null) {
      return false;
    }
    localEcho(this.vm, trimmed); // appears in the chat immediately
    this.socket.send(utteranceFrame(trimmed));
    this.notify();
    return true;
  }

  close(): void {
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.socket?.close();
  }
}
