import { describe, expect, it } from "vitest";

import { createSseParser, type ServerEvent } from "../src/sse";

function collect(): { events: ServerEvent[]; feed: (c: string) => void } {
  const events: ServerEvent[] = [];
  return { events, feed: createSseParser((e) => events.push(e)) };
}

describe("createSseParser", () => {
  it("parses a complete frame", () => {
    const { events, feed } = collect();
    feed('event: turn_started\ndata: {"turn_index": 0}\n\n');
    expect(events).toEqual([{ event: "turn_started", data: { turn_index: 0 } }]);
  });

  it("reassembles frames split across chunks", () => {
    const { events, feed } = collect();
    feed("event: turn_comp");
    feed('leted\ndata: {"rep');
    feed('ly": "hi"}\n');
    expect(events).toEqual([]);
    feed("\nevent: next\ndata: 1\n\n");
    expect(events).toEqual([
      { event: "turn_completed", data: { reply: "hi" } },
      { event: "next", data: 1 },
    ]);
  });

  it("skips keep-alive comments", () => {
    const { events, feed } = collect();
    feed(": keep-alive\n\n: keep-alive\n\ndata: 7\n\n");
    expect(events).toEqual([{ event: "message", data: 7 }]);
  });

  it("passes non-JSON data through as text", () => {
    const { events, feed } = collect();
    feed("event: note\ndata: not json at all\n\n");
    expect(events).toEqual([{ event: "note", data: "not json at all" }]);
  });
});
