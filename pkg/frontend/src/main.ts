// Bootstrap: wire the client, renderer, and the input box together.
// Server URL comes from ?server=... (defaults to the page origin).

import { SessionClient } from "./client.js";
import { render } from "./render.js";

function serverUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("server");
  return fromQuery ?? window.location.origin;
}

export function boot(root: HTMLElement, input: HTMLInputElement, send: HTMLButtonElement): SessionClient {
  const client = new SessionClient(serverUrl());

  const refresh = () => {
    render(client.vm, root);
    input.disabled = !client.inputEnabled;
    send.disabled = !client.inputEnabled;
    const log = root.querySelector(".chat-log");
    if (log) log.scrollTop = log.scrollHeight;
  };

  client.onChange(refresh);

  const submit = () => {
    if (client.sendUtterance(input.value)) {
      input.value = "";
    }
  };
  send.addEventListener("click", submit);
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") submit();
  });
  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.dataset.action === "retry") client.retryNow();
  });

  void client.connect();
  refresh();
  return client;
}

if (typeof document !== "undefined" && document.getElementById("viewer-root")) {
  boot(
    document.getElementById("viewer-root") as HTMLElement,
    document.getElementById("utterance-input") as HTMLInputElement,
    document.getElementById("send-button") as HTMLButtonElement,
  );
}
