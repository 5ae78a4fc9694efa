// Session view model: a pure fold over event envelopes. The student page
// renders straight from this state; tests replay recorded transcripts
// through the same fold.

import type { EventEnvelope, QAItemDoc, Speaker } from './types.js';

export type InputMode = 'free_chat' | 'awaiting_choice' | 'locked';

export interface ChatBubble {
  speaker: Speaker;
  text: string;
  kind: string;
}

export interface ViewState {
  pageIndex: number | null;
  transcript: ChatBubble[];
  mode: InputMode;
  // present while a question is on screen: awaiting_choice before the
  // submission, locked between the submission and its explanation
  question: QAItemDoc | null;
  selected: number[];
  lastSeq: number;
}

export type ApplyOutcome =
  | { ok: true; view: ViewState }
  | { ok: false; resumeFrom: number };

export function initialView(): ViewState {
  return {
    pageIndex: null,
    transcript: [],
    mode: 'free_chat',
    question: null,
    selected: [],
    lastSeq: -1,
  };
}

/**
 * Fold one envelope into the view. Envelopes must arrive in seq order with
 * no holes; anything else asks the caller to re-stream from the first
 * missing seq instead of guessing at the lost events.
 */
export function applyEvent(view: ViewState, envelope: EventEnvelope): ApplyOutcome {
  if (envelope.seq !== view.lastSeq + 1) {
    return { ok: false, resumeFrom: view.lastSeq + 1 };
  }
  const utt = envelope.utterance;
  const next: ViewState = {
    ...view,
    transcript: view.transcript,
    selected: view.selected,
    lastSeq: envelope.seq,
  };

  if (utt.speaker === 'system') {
    // system events steer the view but never show up as chat bubbles
    if (utt.kind === 'show_page') {
      const page = utt.payload?.['page_index'];
      next.pageIndex = typeof page === 'number' ? page : next.pageIndex;
    }
    return { ok: true, view: next };
  }

  next.transcript = [
    ...view.transcript,
    { speaker: utt.speaker, text: utt.content, kind: utt.kind },
  ];

  if (utt.kind === 'post_question') {
    next.question = utt.payload as unknown as QAItemDoc;
    next.mode = 'awaiting_choice';
    next.selected = [];
  } else if (utt.speaker === 'user' && utt.payload && 'selected' in utt.payload) {
    // the user's graded submission; input stays locked until the teacher
    // responds with the explanation
    next.mode = 'locked';
    next.selected = (utt.payload['selected'] as number[]) ?? [];
  } else if (utt.kind === 'explanation') {
    if (next.mode === 'locked') {
      next.mode = 'free_chat';
      next.question = null;
      next.selected = [];
    }
    // an explanation while still awaiting_choice is a hint: the question
    // stays open and selectable
  } else if (utt.speaker === 'user' && utt.kind === 'control') {
    // continue skips whatever is active, an open question included
    next.mode = 'free_chat';
    next.question = null;
    next.selected = [];
  }

  return { ok: true, view: next };
}

/** Replay a whole envelope list; throws on gaps (callers replaying stored
 * history should never see one). */
export function replay(envelopes: EventEnvelope[], from?: ViewState): ViewState {
  let view = from ?? initialView();
  for (const envelope of envelopes) {
    const outcome = applyEvent(view, envelope);
    if (!outcome.ok) {
      throw new Error(`gap in replay: expected seq ${outcome.resumeFrom}, got ${envelope.seq}`);
    }
    view = outcome.view;
  }
  return view;
}
