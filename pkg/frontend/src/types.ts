// Wire contracts shared with the tutoring service. Field names mirror the
// JSON documents exactly; nothing here is renamed on the client side.

export type Speaker = 'teacher' | 'teaching_assistant' | 'user' | 'system';

export type QuestionType = 'single_choice' | 'multiple_choice';

export interface UtteranceDoc {
  speaker: Speaker;
  content: string;
  kind: string;
  timestamp: number;
  payload?: Record<string, unknown>;
}

export interface EventEnvelope {
  session_id: string;
  seq: number;
  utterance: UtteranceDoc;
}

export interface QAItemDoc {
  question: string;
  question_type: QuestionType;
  options: string[];
  answer: number[];
  reference?: string;
}

export interface ActionDoc {
  kind: string;
  value: unknown;
  origin_leaf: string;
}

export interface QueueDoc {
  lecture_id: string;
  revision: number;
  actions: ActionDoc[];
}

export interface LectureRecord {
  lecture_id: string;
  title: string;
  status: string;
}

export interface SessionInfo {
  session_id: string;
  lecture_id?: string;
  phase: string;
  cursor: number;
}

export interface HistoryResponse {
  session_id: string;
  phase: string;
  cursor: number;
  events: EventEnvelope[];
}

export type EditOp =
  | { op: 'insert'; position: number; action: ActionDoc }
  | { op: 'remove'; position: number }
  | { op: 'replace'; position: number; action: ActionDoc };

export type UserEvent =
  | { type: 'say'; text: string }
  | { type: 'choose'; options: number[] }
  | { type: 'continue' };
