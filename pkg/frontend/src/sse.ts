// Server-sent-event subscription over fetch streaming, with a long-poll
// fallback when streaming is unavailable or the stream errors.
//
// fetch + ReadableStream is used instead of EventSource so auth headers
// work and the same code runs in the browser and under test.

import type { Api } from './api.js';
import type { ServerEvent } from './types.js';

export type EventHandler = (event: ServerEvent) => void;

interface ParsedFrame {
  id?: number;
  event?: string;
  data?: string;
}

export function parseFrames(buffer: string): { frames: ParsedFrame[]; rest: string } {
  const frames: ParsedFrame[] = [];
  const chunks = buffer.split('\n\n');
  const rest = chunks.pop() ?? '';
  for (const chunk of chunks) {
    const frame: ParsedFrame = {};
    for (const line of chunk.split('\n')) {
      if (line.startsWith(':')) continue; // heartbeat comment
      const colon = line.indexOf(':');
      if (colon === -1) continue;
      const field = line.slice(0, colon);
      const value = line.slice(colon + 1).trimStart();
      if (field === 'id') frame.id = Number(value);
      else if (field === 'event') frame.event = value;
      else if (field === 'data') frame.data = (frame.data ? frame.data + '\n' : '') + value;
    }
    if (frame.event || frame.data) frames.push(frame);
  }
  return { frames, rest };
}

export class EventSubscription {
  private cursor = 0;
  private stopped = false;
  private pollTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly api: Api,
    private readonly handler: EventHandler,
    private readonly pollIntervalMs = 1000,
  ) {}

  start(fromCursor = 0): void {
    this.cursor = fromCursor;
    this.stopped = false;
    void this.streamLoop();
  }

  stop(): void {
    // lazy teardown: the loop exits at the next read/poll boundary (the
    // server closes streams after their lifetime anyway); a hard abort
    // here leaks socket errors from the environment's fetch internals
    this.stopped = true;
    if (this.pollTimer !== null) clearTimeout(this.pollTimer);
  }

  private dispatch(frame: ParsedFrame): void {
    if (!frame.event || frame.event === 'stream.end' || frame.data === undefined) {
      if (frame.id !== undefined) this.cursor = frame.id;
      return;
    }
    let payload: Record<string, unknown> = {};
    try {
      payload = JSON.parse(frame.data) as Record<string, unknown>;
    } catch {
      return;
    }
    if (frame.id !== undefined) this.cursor = frame.id;
    this.handler({ seq: frame.id ?? this.cursor, event: frame.event, payload });
  }

  private async streamLoop(): Promise<void> {
    while (!this.stopped) {
      try {
        const response = await fetch(`${this.api.baseUrl}/events?cursor=${this.cursor}`, {
          headers: this.api.eventAuthHeaders(),
        });
        if (!response.ok || !response.body) throw new Error(`stream unavailable: ${response.status}`);
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        let buffer = '';
        for (;;) {
          const { done, value } = await reader.read();
          if (this.stopped) {
            await reader.cancel().catch(() => undefined);
            return;
          }
          if (done) break; // lifetime reached; reconnect with the cursor
          buffer += decoder.decode(value, { stream: true });
          const { frames, rest } = parseFrames(buffer);
          buffer = rest;
          frames.forEach((frame) => this.dispatch(frame));
        }
      } catch {
        if (this.stopped) return;
        await this.pollOnce(); // degrade to polling, then retry the stream
      }
    }
  }

  private async pollOnce(): Promise<void> {
    try {
      const { events, cursor } = await this.api.pollEvents(this.cursor, 1);
      for (const event of events) {
        this.handler({ seq: event.seq, event: event.event, payload: event.payload as Record<string, unknown> });
      }
      this.cursor = cursor;
    } catch {
      // server unreachable; wait before the next attempt
      await new Promise((resolve) => {
        this.pollTimer = setTimeout(resolve, this.pollIntervalMs);
      });
    }
  }
}
