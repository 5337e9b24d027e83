// Server-sent events over plain fetch, since EventSource is missing from
// some embedding environments. Frames are "event:"/"data:" line groups
// separated by a blank line; comment lines (keep-alives) carry no data.

export type ServerEvent = { event: string; data: unknown };

export function createSseParser(
  onEvent: (e: ServerEvent) => void,
): (chunk: string) => void {
  let buffer = "";
  return (chunk: string) => {
    buffer += chunk;
    const frames = buffer.split(/\r?\n\r?\n/);
    buffer = frames.pop() ?? "";
    for (const frame of frames) {
      let event = "message";
      const dataLines: string[] = [];
      for (const line of frame.split(/\r?\n/)) {
        if (line.startsWith("event:")) {
          event = line.slice(6).trim();
        } else if (line.startsWith("data:")) {
          dataLines.push(line.slice(5).trimStart());
        }
      }
      if (dataLines.length === 0) continue;
      const raw = dataLines.join("\n");
      let data: unknown = raw;
      try {
        data = JSON.parse(raw);
      } catch {
        // leave unparsed payloads as text
      }
      onEvent({ event, data });
    }
  };
}

export async function streamEvents(
  baseUrl: string,
  sessionId: string,
  onEvent: (e: ServerEvent) => void,
  signal: AbortSignal,
): Promise<void> {
  const resp = await fetch(`${baseUrl}/api/sessions/${sessionId}/events`, {
    signal,
  });
  if (!resp.ok || !resp.body) {
    throw new Error(`event stream failed: HTTP ${resp.status}`);
  }
  const reader = resp.body.getReader();
  const decoder = new TextDecoder("utf-8");
  const feed = createSseParser(onEvent);
  try {
    while (true) {
      const { value, done } = await reader.read();
      if (done) break;
      feed(decoder.decode(value, { stream: true }));
    }
  } catch (err) {
    if (!signal.aborted) throw err;
  }
}
