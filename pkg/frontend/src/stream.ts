// Server-sent events consumer for the session stream. fetch-based instead
// of EventSource so the Last-Event-ID header can be set on reconnect and
// the whole thing stays testable with plain Response mocks.

import type { EventEnvelope } from './types.js';
import type { FetchLike } from './api.js';

export interface SseFrame {
  id: number | null;
  data: unknown;
}

/** Incremental SSE frame parser; feed it arbitrary chunk boundaries. */
export class SseParser {
  private buffer = '';

  push(chunk: string): SseFrame[] {
    this.buffer += chunk;
    const frames: SseFrame[] = [];
    const parts = this.buffer.split(/\r?\n\r?\n/);
    this.buffer = parts.pop() ?? '';
    for (const part of parts) {
      let id: number | null = null;
      const dataLines: string[] = [];
      for (const line of part.split(/\r?\n/)) {
        if (line.startsWith('id:')) {
          const parsed = Number(line.slice(3).trim());
          id = Number.isNaN(parsed) ? null : parsed;
        } else if (line.startsWith('data:')) {
          dataLines.push(line.slice(5).trimStart());
        }
      }
      if (dataLines.length === 0) continue;
      const raw = dataLines.join('\n');
      try {
        frames.push({ id, data: JSON.parse(raw) });
      } catch {
        frames.push({ id, data: raw });
      }
    }
    return frames;
  }
}

export interface StreamOptions {
  fromSeq?: number;
  lastEventId?: number;
  fetchImpl?: FetchLike;
  signal?: AbortSignal;
  onEnvelope: (envelope: EventEnvelope) => void;
}

/**
 * Read one stream response to its end, invoking onEnvelope per frame.
 * Returns the last event id seen, to be passed back as lastEventId when
 * reconnecting after a drop or a detected gap.
 */
export async function consumeStream(url: string, options: StreamOptions): Promise<number | null> {
  const fetchImpl = options.fetchImpl ?? ((input: string, init?: RequestInit) => fetch(input, init));
  const headers: Record<string, string> = { Accept: 'text/event-stream' };
  if (options.lastEventId !== undefined) {
    headers['Last-Event-ID'] = String(options.lastEventId);
  }
  const target = options.fromSeq !== undefined
    ? appendFromParam(url, options.fromSeq)
    : url;
  const response = await fetchImpl(target, { headers, signal: options.signal });
  if (!response.ok) throw new Error(`stream failed: HTTP ${response.status}`);
  if (!response.body) throw new Error('stream response has no body');

  const reader = response.body.getReader();
  const decoder = new TextDecoder('utf-8');
  const parser = new SseParser();
  let lastId: number | null = null;

  for (;;) {
    const { value, done } = await reader.read();
    if (done) break;
    for (const frame of parser.push(decoder.decode(value, { stream: true }))) {
      if (frame.id !== null) lastId = frame.id;
      options.onEnvelope(frame.data as EventEnvelope);
    }
  }
  return lastId;
}

function appendFromParam(url: string, fromSeq: number): string {
  const joiner = url.includes('?') ? '&' : '?';
  return `${url}${joiner}from=${fromSeq}`;
}
