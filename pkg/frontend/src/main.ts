// Browser entry point. Two hash routes share one API client:
//   #/session/<lecture_id>  student view (slides, chat, quizzes)
//   #/editor/<lecture_id>   teacher queue editor
// All state lives in the pure modules; this file only touches the DOM.

import { ApiClient, ApiError } from './api.js';
import { QueueEditor } from './editor.js';
import { buildChooseEvent, canSubmit, markSubmitted, toggleSelection } from './quiz.js';
import { consumeStream } from './stream.js';
import type { EventEnvelope } from './types.js';
import { applyEvent, initialView, ViewState } from './viewState.js';

const API_BASE = (window as { LECTURE_API_BASE?: string }).LECTURE_API_BASE ?? '';
const ASSET_BASE = (window as { LECTURE_ASSET_BASE?: string }).LECTURE_ASSET_BASE ?? API_BASE;

const api = new ApiClient(API_BASE);

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function mount(): HTMLElement {
  const root = document.getElementById('app');
  if (!root) throw new Error('missing #app container');
  root.replaceChildren();
  return root;
}

// --- student route --------------------------------------------------------

class SessionPage {
  private view: ViewState = initialView();
  private sessionId: string | null = null;
  private streaming = false;

  constructor(private readonly lectureId: string, private readonly root: HTMLElement) {}

  async start(): Promise<void> {
    const info = await api.createSession(this.lectureId);
    this.sessionId = info.session_id;
    this.render();
    void this.streamLoop(0);
  }

  /** Keep one stream open; on gaps or drops, reconnect from the first
   * missing seq so the transcript never ends up with holes. */
  private async streamLoop(fromSeq: number): Promise<void> {
    if (this.streaming || this.sessionId === null) return;
    this.streaming = true;
    let resumeAt = fromSeq;
    try {
      for (;;) {
        let gap: number | null = null;
        await consumeStream(api.streamUrl(this.sessionId, resumeAt), {
          onEnvelope: (envelope: EventEnvelope) => {
            if (gap !== null) return; // already resyncing this pass
            const outcome = applyEvent(this.view, envelope);
            if (outcome.ok) {
              this.view = outcome.view;
              this.render();
            } else {
              gap = outcome.resumeFrom;
            }
          },
        });
        if (gap === null) break;
        resumeAt = gap;
      }
    } finally {
      this.streaming = false;
    }
  }

  private async send(event: Parameters<typeof api.postEvent>[1]): Promise<void> {
    if (this.sessionId === null) return;
    try {
      await api.postEvent(this.sessionId, event);
      void this.streamLoop(this.view.lastSeq + 1);
    } catch (error) {
      if (error instanceof ApiError) this.showError(error.message);
      else throw error;
    }
  }

  private showError(message: string): void {
    const banner = this.root.querySelector('.error-banner');
    if (banner) banner.textContent = message;
  }

  private render(): void {
    this.root.replaceChildren();
    this.root.append(el('div', 'error-banner'));

    if (this.view.pageIndex !== null) {
      const img = document.createElement('img');
      img.className = 'slide';
      img.src = api.pageImageUrl(ASSET_BASE, this.lectureId, this.view.pageIndex);
      img.alt = `slide ${this.view.pageIndex + 1}`;
      this.root.append(img);
    }

    const log = el('div', 'transcript');
    for (const bubble of this.view.transcript) {
      const row = el('div', `bubble ${bubble.speaker} ${bubble.kind}`);
      row.append(el('span', 'who', bubble.speaker.replace('_', ' ')));
      row.append(el('span', 'text', bubble.text));
      log.append(row);
    }
    this.root.append(log);

    if (this.view.mode === 'awaiting_choice' && this.view.question !== null) {
      this.root.append(this.renderQuestion());
    } else if (this.view.mode === 'locked') {
      this.root.append(el('div', 'locked-note', 'Waiting for the teacher...'));
    } else {
      this.root.append(this.renderChatControls());
    }
  }

  private renderQuestion(): HTMLElement {
    const question = this.view.question!;
    const panel = el('div', 'quiz');
    const multi = question.question_type === 'multiple_choice';
    question.options.forEach((option, index) => {
      const label = el('label', 'option');
      const input = document.createElement('input');
      input.type = multi ? 'checkbox' : 'radio';
      input.name = 'quiz-option';
      input.checked = this.view.selected.includes(index);
      input.addEventListener('change', () => {
        this.view = toggleSelection(this.view, index);
        this.render();
      });
      label.append(input, el('span', undefined, option));
      panel.append(label);
    });
    const submit = el('button', 'submit', 'Submit answer') as HTMLButtonElement;
    submit.disabled = !canSubmit(this.view);
    submit.addEventListener('click', () => {
      const event = buildChooseEvent(this.view);
      this.view = markSubmitted(this.view);
      this.render();
      void this.send(event);
    });
    panel.append(submit);
    return panel;
  }

  private renderChatControls(): HTMLElement {
    const bar = el('div', 'chat-bar');
    const input = document.createElement('input');
    input.type = 'text';
    input.placeholder = 'Ask the class something...';
    const say = el('button', undefined, 'Send') as HTMLButtonElement;
    say.addEventListener('click', () => {
      const text = input.value.trim();
      if (!text) return;
      input.value = '';
      void this.send({ type: 'say', text });
    });
    // advancing is always available while the floor is open
    const cont = el('button', 'continue', 'Continue') as HTMLButtonElement;
    cont.addEventListener('click', () => void this.send({ type: 'continue' }));
    bar.append(input, say, cont);
    return bar;
  }
}

// --- teacher route --------------------------------------------------------

class EditorPage {
  private readonly editor: QueueEditor;

  constructor(lectureId: string, private readonly root: HTMLElement) {
    this.editor = new QueueEditor(api, lectureId);
  }

  async start(): Promise<void> {
    await this.editor.load();
    this.render();
  }

  private render(): void {
    this.root.replaceChildren();
    const { banner, staleRevision, queue } = this.editor.state;
    if (banner) {
      const box = el('div', staleRevision ? 'banner stale' : 'banner error', banner);
      if (staleRevision) {
        const reload = el('button', undefined, 'Reload') as HTMLButtonElement;
        reload.addEventListener('click', () => {
          void this.editor.reload().then(() => this.render());
        });
        box.append(reload);
      }
      this.root.append(box);
    }
    if (queue === null) return;
    this.root.append(el('div', 'revision', `revision ${queue.revision}`));

    const list = el('ol', 'actions');
    this.editor.workingActions().forEach((action, position) => {
      const row = el('li', `action ${action.kind}`);
      row.append(el('span', 'kind', action.kind));
      if (action.kind === 'ReadScript') {
        const area = document.createElement('textarea');
        area.value = String(action.value);
        area.addEventListener('change', () => {
          this.editor.editScript(position, area.value);
        });
        row.append(area);
      } else {
        row.append(el('span', 'value', JSON.stringify(action.value)));
      }
      list.append(row);
    });
    this.root.append(list);

    const save = el('button', 'save', 'Save changes') as HTMLButtonElement;
    save.addEventListener('click', () => {
      void this.editor.save().then(() => this.render());
    });
    this.root.append(save);
  }
}

// --- routing --------------------------------------------------------------

function route(): void {
  const root = mount();
  const match = /^#\/(session|editor)\/(.+)$/.exec(window.location.hash);
  if (!match) {
    root.append(el('p', undefined,
      'Open #/session/<lecture_id> to join a lecture or #/editor/<lecture_id> to edit its plan.'));
    return;
  }
  const [, kind, lectureId] = match;
  const page = kind === 'session'
    ? new SessionPage(lectureId, root)
    : new EditorPage(lectureId, root);
  void page.start().catch((error) => {
    root.replaceChildren(el('div', 'banner error', String(error)));
  });
}

window.addEventListener('hashchange', route);
route();
