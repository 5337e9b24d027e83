// The whole chat surface, built straight onto the DOM. mountApp wires one
// root element to one server session: it reuses the session named in
// storage when the server still knows it, and falls back to a fresh one
// (after a restart, say) so a stale id never wedges the page.

import {
  ApiError,
  createSession,
  fetchHistory,
  postTurn,
  type HistoryTurn,
} from "./api";
import { streamEvents } from "./sse";
import { visionFromPrompt } from "./vision";

const SESSION_KEY = "modalflow.session";

export type AppOptions = {
  baseUrl?: string;
  storage?: Storage;
  // live status via SSE is on by default; tests that only poke the DOM
  // can turn it off to avoid a dangling stream
  liveEvents?: boolean;
};

export type AppHandle = {
  sessionId: string;
  dispose: () => void;
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function visionBadge(promptUsed: string): HTMLElement | null {
  const info = visionFromPrompt(promptUsed);
  if (!info) return null;
  const badge = el("div", "vision-badge");
  badge.appendChild(el("span", "vision-caption", info.caption));
  for (const tag of info.tags) {
    badge.appendChild(el("span", "vision-tag", tag));
  }
  return badge;
}

function appendExchange(
  transcript: HTMLElement,
  userText: string,
  assistantText: string,
  promptUsed: string,
  hadImage: boolean,
): void {
  const user = el("li", "bubble user");
  user.appendChild(el("p", "bubble-text", userText));
  if (hadImage) {
    const badge = visionBadge(promptUsed);
    if (badge) user.appendChild(badge);
  }
  transcript.appendChild(user);

  const assistant = el("li", "bubble assistant");
  assistant.appendChild(el("p", "bubble-text", assistantText));
  transcript.appendChild(assistant);
}

async function resolveSession(
  baseUrl: string,
  storage: Storage,
): Promise<{ id: string; turns: HistoryTurn[] }> {
  const stored = storage.getItem(SESSION_KEY);
  if (stored) {
    try {
      return { id: stored, turns: await fetchHistory(baseUrl, stored) };
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 404)) throw err;
    }
  }
  const id = await createSession(baseUrl);
  storage.setItem(SESSION_KEY, id);
  return { id, turns: [] };
}

export async function mountApp(
  root: HTMLElement,
  options: AppOptions = {},
): Promise<AppHandle> {
  const baseUrl = options.baseUrl ?? "";
  const storage = options.storage ?? window.localStorage;

  root.innerHTML = "";
  const header = el("header", "topbar");
  header.appendChild(el("h1", "title", "modalflow agent"));
  const status = el("span", "status", "connecting");
  header.appendChild(status);
  root.appendChild(header);

  const transcript = el("ul", "transcript");
  root.appendChild(transcript);

  const form = el("form", "composer");
  const textInput = el("input", "text-input");
  textInput.name = "text";
  textInput.placeholder = "Say something";
  const imageInput = el("input", "image-input");
  imageInput.name = "image_path";
  imageInput.placeholder = "Server media path (optional)";
  const send = el("button", "send");
  send.type = "submit";
  send.textContent = "Send";
  form.append(textInput, imageInput, send);
  root.appendChild(form);

  const { id: sessionId, turns } = await resolveSession(baseUrl, storage);
  for (const turn of turns) {
    appendExchange(
      transcript,
      turn.user_text,
      turn.assistant_text,
      turn.prompt_used,
      turn.had_image,
    );
  }
  status.textContent = "idle";

  const abort = new AbortController();
  if (options.liveEvents ?? true) {
    streamEvents(
      baseUrl,
      sessionId,
      (e) => {
        if (e.event === "turn_started") status.textContent = "thinking";
        if (e.event === "turn_completed") status.textContent = "idle";
        if (e.event === "turn_failed") status.textContent = "error";
      },
      abort.signal,
    ).catch(() => {
      // a dead stream only loses the live indicator
    });
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = textInput.value;
    const imagePath = imageInput.value.trim() || undefined;
    if (!text.trim() && !imagePath) return;
    send.disabled = true;
    status.textContent = "thinking";
    postTurn(baseUrl, sessionId, text, imagePath)
      .then((reply) => {
        appendExchange(
          transcript,
          text,
          reply.reply,
          reply.prompt_used,
          Boolean(imagePath),
        );
        textInput.value = "";
        imageInput.value = "";
        status.textContent = "idle";
      })
      .catch((err) => {
        status.textContent =
          err instanceof ApiError ? `error: ${err.kind}` : "error";
      })
      .finally(() => {
        send.disabled = false;
      });
  });

  return {
    sessionId,
    dispose: () => abort.abort(),
  };
}
