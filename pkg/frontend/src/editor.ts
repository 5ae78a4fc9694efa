// Teacher-side queue editor model. Edits accumulate locally and are saved
// as one PATCH carrying the revision they were made against; the service
// revalidates and either bumps the revision or rejects the whole batch.

import { ApiClient, ApiError } from './api.js';
import type { ActionDoc, EditOp, QAItemDoc, QueueDoc } from './types.js';

export interface EditorState {
  queue: QueueDoc | null;
  pending: EditOp[];
  banner: string | null;
  staleRevision: boolean;
  saving: boolean;
}

export class QueueEditor {
  readonly state: EditorState = {
    queue: null,
    pending: [],
    banner: null,
    staleRevision: false,
    saving: false,
  };

  private readonly api: ApiClient;
  private readonly lectureId: string;

  constructor(api: ApiClient, lectureId: string) {
    this.api = api;
    this.lectureId = lectureId;
  }

  async load(): Promise<void> {
    this.state.queue = await this.api.getActions(this.lectureId);
    this.state.pending = [];
    this.state.banner = null;
    this.state.staleRevision = false;
  }

  /** Local working copy with pending edits applied, for rendering. */
  workingActions(): ActionDoc[] {
    if (this.state.queue === null) return [];
    const actions = [...this.state.queue.actions];
    for (const edit of this.state.pending) {
      if (edit.op === 'insert') actions.splice(edit.position, 0, edit.action);
      else if (edit.op === 'remove') actions.splice(edit.position, 1);
      else actions[edit.position] = edit.action;
    }
    return actions;
  }

  editScript(position: number, script: string): void {
    const action = this.actionAt(position);
    if (action.kind !== 'ReadScript') {
      throw new Error(`action ${position} is ${action.kind}, not ReadScript`);
    }
    this.state.pending.push({ op: 'replace', position, action: { ...action, value: script } });
  }

  editQuestion(position: number, qa: QAItemDoc): void {
    const action = this.actionAt(position);
    if (action.kind !== 'AskQuestion') {
      throw new Error(`action ${position} is ${action.kind}, not AskQuestion`);
    }
    // mirror the server's QAItem invariant so broken questions never ship
    if (qa.question_type === 'single_choice' && qa.answer.length !== 1) {
      throw new Error('a single choice question must have exactly one answer');
    }
    if (qa.answer.some((i) => i < 0 || i >= qa.options.length)) {
      throw new Error('answer indices must point at existing options');
    }
    this.state.pending.push({ op: 'replace', position, action: { ...action, value: qa } });
  }

  /** Reorder by remove+insert; the server revalidates the result. */
  moveAction(from: number, to: number): void {
    const action = this.actionAt(from);
    this.state.pending.push({ op: 'remove', position: from });
    this.state.pending.push({ op: 'insert', position: to, action });
  }

  async save(): Promise<boolean> {
    if (this.state.queue === null || this.state.pending.length === 0) return true;
    this.state.saving = true;
    try {
      const revised = await this.api.patchActions(
        this.lectureId,
        this.state.queue.revision,
        this.state.pending,
      );
      this.state.queue = revised;
      this.state.pending = [];
      this.state.banner = null;
      this.state.staleRevision = false;
      return true;
    } catch (error) {
      if (error instanceof ApiError && error.error === 'StaleRevision') {
        this.state.staleRevision = true;
        this.state.banner = 'The queue changed elsewhere. Reload to pick up the latest revision.';
      } else if (error instanceof ApiError) {
        // the service's own message, word for word
        this.state.banner = error.detail;
      } else {
        throw error;
      }
      return false;
    } finally {
      this.state.saving = false;
    }
  }

  /** Drop local edits and refetch after a stale-revision conflict. */
  async reload(): Promise<void> {
    await this.load();
  }

  private actionAt(position: number): ActionDoc {
    const actions = this.workingActions();
    const action = actions[position];
    if (action === undefined) {
      throw new Error(`no action at position ${position}`);
    }
    return action;
  }
}
