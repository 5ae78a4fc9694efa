// Quiz input rules, mirrored from the server's grading contract so bad
// submissions are stopped before they ever reach the wire.

import type { QAItemDoc, UserEvent } from './types.js';
import type { ViewState } from './viewState.js';

/** Toggle an option. Single-choice behaves like radio buttons: picking a
 * second option replaces the first instead of accumulating. */
export function toggleSelection(view: ViewState, index: number): ViewState {
  if (view.mode !== 'awaiting_choice' || view.question === null) return view;
  if (index < 0 || index >= view.question.options.length) return view;
  let selected: number[];
  if (view.question.question_type === 'single_choice') {
    selected = view.selected.includes(index) ? [] : [index];
  } else if (view.selected.includes(index)) {
    selected = view.selected.filter((i) => i !== index);
  } else {
    selected = [...view.selected, index].sort((a, b) => a - b);
  }
  return { ...view, selected };
}

/** Why the selection cannot be submitted, or null when it can. */
export function selectionError(question: QAItemDoc, selected: number[]): string | null {
  if (selected.length === 0) return 'pick at least one option';
  if (question.question_type === 'single_choice' && selected.length !== 1) {
    return 'this question takes exactly one option';
  }
  for (const index of selected) {
    if (index < 0 || index >= question.options.length) {
      return `option ${index} does not exist`;
    }
  }
  return null;
}

export function canSubmit(view: ViewState): boolean {
  return (
    view.mode === 'awaiting_choice' &&
    view.question !== null &&
    selectionError(view.question, view.selected) === null
  );
}

/** Build the choose event, or throw if the selection breaks the question's
 * cardinality. The server enforces the same rule; this keeps it client-side. */
export function buildChooseEvent(view: ViewState): UserEvent {
  if (view.mode !== 'awaiting_choice' || view.question === null) {
    throw new Error('no question is awaiting an answer');
  }
  const error = selectionError(view.question, view.selected);
  if (error !== null) throw new Error(error);
  return { type: 'choose', options: [...view.selected] };
}

/** Optimistic lock after submitting; the server's echo of the submission
 * produces the same state, so replay and live use agree. */
export function markSubmitted(view: ViewState): ViewState {
  return { ...view, mode: 'locked' };
}
