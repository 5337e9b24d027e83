// Typed client for the agent server. Every helper takes the API origin so
// tests can point at an ephemeral server; the built UI passes "" and rides
// the page origin.

export type TurnReply = {
  turn_index: number;
  reply: string;
  prompt_used: string;
};

export type HistoryTurn = {
  turn_index: number;
  user_text: string;
  assistant_text: string;
  prompt_used: string;
  had_image: boolean;
};

export class ApiError extends Error {
  kind: string;
  detail: string;
  status: number;

  constructor(status: number, kind: string, detail: string) {
    super(`${kind}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.kind = kind;
    this.detail = detail;
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  if (!resp.ok) {
    let kind = `Http${resp.status}`;
    let detail = resp.statusText;
    try {
      const doc = await resp.json();
      if (doc && doc.error) {
        kind = doc.error.kind ?? kind;
        detail = doc.error.detail ?? detail;
      }
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(resp.status, kind, detail);
  }
  return (await resp.json()) as T;
}

function post(body: unknown): RequestInit {
  return {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  };
}

export async function health(baseUrl: string): Promise<boolean> {
  try {
    const doc = await request<{ status: string }>(`${baseUrl}/api/health`);
    return doc.status === "ok";
  } catch {
    return false;
  }
}

export async function createSession(
  baseUrl: string,
  systemPrompt?: string,
): Promise<string> {
  const body = systemPrompt === undefined ? {} : { system_prompt: systemPrompt };
  const doc = await request<{ session_id: string }>(
    `${baseUrl}/api/sessions`,
    post(body),
  );
  return doc.session_id;
}

export async function postTurn(
  baseUrl: string,
  sessionId: string,
  text: string,
  imagePath?: string,
): Promise<TurnReply> {
  const body: Record<string, unknown> = { text };
  if (imagePath) body.image_path = imagePath;
  return request<TurnReply>(
    `${baseUrl}/api/sessions/${sessionId}/turns`,
    post(body),
  );
}

export async function fetchHistory(
  baseUrl: string,
  sessionId: string,
): Promise<HistoryTurn[]> {
  const doc = await request<{ turns: HistoryTurn[] }>(
    `${baseUrl}/api/sessions/${sessionId}/history`,
  );
  return doc.turns;
}
