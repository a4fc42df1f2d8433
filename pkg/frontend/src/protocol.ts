// Wire protocol records shared with the session server. One tagged JSON
// object per WebSocket text frame; field names are the protocol contract.

export type AuthorKind = 'human' | 'surrogate';

export interface Provenance {
  kind: 'original' | 'relayed';
  insight_id?: string;
}

export interface RosterEntry {
  id: string;
  name: string;
  kind: AuthorKind;
}

export interface WelcomeRecord {
  type: 'welcome';
  participant_id: string;
  subgroup_id: string;
  roster: RosterEntry[];
}

export interface ChatRecord {
  type: 'chat';
  message_id: string;
  author_kind: AuthorKind;
  author_name: string;
  text: string;
  provenance: Provenance;
  timestamp: number;
  seq: number;
}

export interface SystemRecord {
  type: 'system';
  phase: 'lobby' | 'running' | 'ended';
  remaining_seconds: number;
  task_prompt: string;
}

export interface EndedRecord {
  type: 'ended';
  report_ref: string;
}

export interface ErrorRecord {
  type: 'error';
  reason: string;
}

export interface EventRecord {
  type: 'event';
  kind: string;
  seq: number;
  wall_time: number;
  [key: string]: unknown;
}

export interface SurveyAckRecord {
  type: 'survey_ack';
  participant_id: string;
}

export type ServerRecord =
  | WelcomeRecord
  | ChatRecord
  | SystemRecord
  | EndedRecord
  | ErrorRecord
  | EventRecord
  | SurveyAckRecord;

export interface JoinRecord {
  type: 'join';
  session_id: string;
  display_name: string;
  participant_id?: string;
  resume_from?: number;
  role?: 'facilitator';
  role_token?: string;
}

export interface ChatSendRecord {
  type: 'chat';
  text: string;
}

export interface SurveyRecord {
  type: 'survey';
  answers: Record<string, 'csi' | 'chat'>;
}

export type ClientRecord = JoinRecord | ChatSendRecord | SurveyRecord;

export function encodeRecord(record: ClientRecord): string {
  return JSON.stringify(record);
}

export function decodeRecord(line: string): ServerRecord {
  const record = JSON.parse(line);
  if (typeof record !== 'object' || record === null || typeof record.type !== 'string') {
    throw new Error('wire records must be tagged objects');
  }
  return record as ServerRecord;
}

export const SURVEY_QUESTIONS: ReadonlyArray<{ id: string; text: string }> = [
  { id: 'q1', text: 'Which method felt more productive?' },
  { id: 'q2', text: 'Which method made you feel more heard?' },
  { id: 'q3', text: 'Which method felt more collaborative?' },
  { id: 'q4', text: 'Which method surfaced better answers?' },
  { id: 'q5', text: 'Which method made you feel more buy-in?' },
  { id: 'q6', text: 'Which method made you feel more ownership?' },
  { id: 'q7', text: 'Which method did you prefer overall?' },
];
