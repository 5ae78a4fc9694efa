import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import type { EventEnvelope, QueueDoc, UtteranceDoc } from '../src/types.js';

// fixtures are shared with the service's own test suite so both sides of
// the wire are checked against the same recorded session
const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), '..', '..', 'tests', 'fixtures');

export function loadFixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(FIXTURES, name), 'utf-8')) as T;
}

export function goldenEnvelopes(): EventEnvelope[] {
  const doc = loadFixture<{ history: UtteranceDoc[] }>('golden_transcript.json');
  return doc.history.map((utterance, seq) => ({
    session_id: 'golden-session',
    seq,
    utterance,
  }));
}

export function goldenQueue(): QueueDoc {
  return loadFixture<QueueDoc>('golden_queue.json');
}

/** Encode SSE frames the way the service's stream endpoint does. */
export function encodeSse(envelopes: EventEnvelope[]): string {
  return envelopes
    .map((envelope) => `id: ${envelope.seq}\ndata: ${JSON.stringify(envelope)}\n\n`)
    .join('');
}
