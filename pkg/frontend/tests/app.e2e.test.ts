// Scripted browser sessions against a live agent server. jsdom plays the
// browser; the page talks to the server exclusively over HTTP.

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { postTurn } from "../src/api";
import { mountApp } from "../src/app";
import {
  makeVisionImage,
  startServer,
  type RunningServer,
} from "./helpers/pyserver";

let server: RunningServer;

beforeAll(async () => {
  server = await startServer();
});

afterAll(() => {
  server.stop();
});

function freshRoot(): HTMLElement {
  document.body.innerHTML = '<div id="app"></div>';
  return document.getElementById("app") as HTMLElement;
}

function send(root: HTMLElement, text: string, imagePath?: string): void {
  (root.querySelector(".text-input") as HTMLInputElement).value = text;
  (root.querySelector(".image-input") as HTMLInputElement).value =
    imagePath ?? "";
  (root.querySelector(".composer") as HTMLFormElement).dispatchEvent(
    new Event("submit", { cancelable: true }),
  );
}

async function until(cond: () => boolean, ms = 10000): Promise<void> {
  const deadline = Date.now() + ms;
  while (Date.now() < deadline) {
    if (cond()) return;
    await new Promise((r) => setTimeout(r, 40));
  }
  throw new Error("condition not met in time");
}

function texts(root: HTMLElement, selector: string): string[] {
  return Array.from(root.querySelectorAll(selector)).map(
    (n) => n.textContent ?? "",
  );
}

describe("chat surface end to end", () => {
  it("text turn, snapshot turn, then a reload reconciles from history", async () => {
    window.localStorage.clear();
    const root = freshRoot();
    const handle = await mountApp(root, {
      baseUrl: server.baseUrl,
      liveEvents: false,
    });

    send(root, "hello from the browser");
    await until(() => root.querySelectorAll(".bubble").length === 2);
    expect(texts(root, ".bubble.user .bubble-text")).toEqual([
      "hello from the browser",
    ]);
    const firstReply = texts(root, ".bubble.assistant .bubble-text")[0];
    expect(firstReply.length).toBeGreaterThan(0);

    const image = makeVisionImage(
      "a cat on a sunny windowsill",
      ["cat", "indoor"],
      ["cat", "window"],
    );
    send(root, "what do you see?", image);
    await until(() => root.querySelectorAll(".bubble").length === 4);

    const badge = root.querySelector(".vision-badge");
    expect(badge).not.toBeNull();
    expect(badge!.querySelector(".vision-caption")!.textContent).toBe(
      "a cat on a sunny windowsill",
    );
    expect(texts(root, ".vision-tag")).toEqual(["cat", "indoor"]);

    handle.dispose();

    // "reload": wipe the DOM, mount again with the same storage; everything
    // on screen must come back from the server's history
    const root2 = freshRoot();
    const handle2 = await mountApp(root2, {
      baseUrl: server.baseUrl,
      liveEvents: false,
    });
    expect(handle2.sessionId).toBe(handle.sessionId);
    expect(root2.querySelectorAll(".bubble")).toHaveLength(4);
    expect(texts(root2, ".bubble.user .bubble-text")).toEqual([
      "hello from the browser",
      "what do you see?",
    ]);
    expect(texts(root2, ".bubble.assistant .bubble-text")[0]).toBe(firstReply);

    const badge2 = root2
      .querySelectorAll(".bubble.user")[1]
      .querySelector(".vision-badge");
    expect(badge2).not.toBeNull();
    expect(badge2!.querySelector(".vision-caption")!.textContent).toBe(
      "a cat on a sunny windowsill",
    );
    expect(
      Array.from(badge2!.querySelectorAll(".vision-tag")).map(
        (n) => n.textContent,
      ),
    ).toEqual(["cat", "indoor"]);
    handle2.dispose();
  });

  it("abandons a stale stored session id for a fresh one", async () => {
    window.localStorage.clear();
    window.localStorage.setItem("modalflow.session", "deadbeef");
    const root = freshRoot();
    const handle = await mountApp(root, {
      baseUrl: server.baseUrl,
      liveEvents: false,
    });
    expect(handle.sessionId).not.toBe("deadbeef");
    expect(window.localStorage.getItem("modalflow.session")).toBe(
      handle.sessionId,
    );
    expect(root.querySelectorAll(".bubble")).toHaveLength(0);
    handle.dispose();
  });

  it("surfaces an upstream failure and keeps the composer alive", async () => {
    window.localStorage.clear();
    const root = freshRoot();
    const handle = await mountApp(root, {
      baseUrl: server.baseUrl,
      liveEvents: false,
    });

    send(root, "look at this", "/no/such/image.png");
    const status = root.querySelector(".status") as HTMLElement;
    await until(() => (status.textContent ?? "").startsWith("error"));
    expect(status.textContent).toBe("error: UpstreamFailure");
    expect(root.querySelectorAll(".bubble")).toHaveLength(0);
    expect((root.querySelector(".send") as HTMLButtonElement).disabled).toBe(
      false,
    );

    send(root, "plain text works fine");
    await until(() => root.querySelectorAll(".bubble").length === 2);
    expect(status.textContent).toBe("idle");
    handle.dispose();
  });

  it("live server events drive the status indicator", async () => {
    window.localStorage.clear();
    const root = freshRoot();
    const handle = await mountApp(root, { baseUrl: server.baseUrl });
    const status = root.querySelector(".status") as HTMLElement;

    const seen: string[] = [];
    const observer = new MutationObserver((records) => {
      for (const record of records) {
        const added = record.addedNodes[0];
        if (added) seen.push(added.textContent ?? "");
      }
    });
    observer.observe(status, { childList: true });

    // turn posted from outside the page; only SSE can move the indicator
    await postTurn(server.baseUrl, handle.sessionId, "driven externally");
    await until(() => seen.includes("thinking") && seen.includes("idle"));
    expect(seen.indexOf("thinking")).toBeLessThan(seen.lastIndexOf("idle"));

    observer.disconnect();
    handle.dispose();
  });
});
