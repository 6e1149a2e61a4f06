// Session client: one WebSocket per console, message cache for replay.

import { SessionMessage } from "./types.js";

export interface TransportLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type TransportFactory = (url: string) => TransportLike;

export interface SessionClientOptions {
  transportFactory?: TransportFactory;
  now?: () => number;
}

export class SessionClient {
  readonly url: string;
  readonly messages: SessionMessage[] = [];
  private transport: TransportLike | null = null;
  private listeners: ((msg: SessionMessage) => void)[] = [];
  private closedListeners: (() => void)[] = [];
  private factory: TransportFactory;
  private now: () => number;

  constructor(url: string, options: SessionClientOptions = {}) {
    this.url = url;
    this.factory =
      options.transportFactory ??
      ((u: string) => new WebSocket(u) as unknown as TransportLike);
    this.now = options.now ?? (() => Date.now());
  }

  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      const ws = this.factory(this.url);
      this.transport = ws;
      ws.onopen = () => resolve();
      ws.onerror = (ev) => reject(ev ?? new Error("session transport error"));
      ws.onclose = () => {
        for (const cb of this.closedListeners) cb();
      };
      ws.onmessage = (ev) => {
        const msg = JSON.parse(String(ev.data)) as SessionMessage;
        this.messages.push(msg);
        for (const cb of this.listeners) cb(msg);
      };
    });
  }

  onMessage(cb: (msg: SessionMessage) => void): void {
    this.listeners.push(cb);
  }

  onClosed(cb: () => void): void {
    this.closedListeners.push(cb);
  }

  wallNow(): number {
    return this.now();
  }

  claim(actorId: string): void {
    this.sendFrame("role_claim", { actor_id: actorId });
  }

  transmit(frequency: string, addressedTo: string | null, text: string): void {
    this.sendFrame("transmit_request", {
      frequency,
      addressed_to: addressedTo,
      text,
    });
  }

  private sendFrame(kind: string, payload: unknown): void {
    if (!this.transport) {
      throw new Error("session not connected");
    }
    this.transport.send(JSON.stringify({ kind, payload }));
  }

  close(): void {
    this.transport?.close();
  }

  /** Wait until a message satisfying the predicate arrives (cache included). */
  waitFor(
    predicate: (msg: SessionMessage) => boolean,
    timeoutMs = 5000
  ): Promise<SessionMessage> {
    const hit = this.messages.find(predicate);
    if (hit) return Promise.resolve(hit);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new Error(`timed out waiting for session message after ${timeoutMs} ms`)),
        timeoutMs
      );
      this.onMessage((msg) => {
        if (predicate(msg)) {
          clearTimeout(timer);
          resolve(msg);
        }
      });
    });
  }
}

export async function startRun(
  baseUrl: string,
  body: {
    scenario_id: string;
    seed: number;
    mode: "fast_time" | "real_time";
    pace?: number;
    overrides?: Record<string, unknown>;
  }
): Promise<{ run_id: string; state: string }> {
  const resp = await fetch(`${baseUrl}/v1/runs`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!resp.ok) {
    throw new Error(`run start failed: ${resp.status} ${await resp.text()}`);
  }
  return resp.json();
}

export async function fetchScenario(baseUrl: string, runId: string) {
  const resp = await fetch(`${baseUrl}/v1/runs/${runId}/scenario`);
  if (!resp.ok) {
    throw new Error(`scenario fetch failed: ${resp.status}`);
  }
  return resp.json();
}

export function sessionUrl(baseUrl: string, runId: string): string {
  return `${baseUrl.replace(/^http/, "ws")}/v1/runs/${runId}/session`;
}
