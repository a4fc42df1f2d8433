// The participant client: joins a session, mirrors the server's
// per-subgroup message order on screen, and survives reconnects by
// resuming from the last seen sequence number.
//
// There is no optimistic echo anywhere: a sent message appears only when
// the server's fan-out returns it, so screen order is server order by
// construction.

import {
  ChatRecord,
  EndedRecord,
  RosterEntry,
  ServerRecord,
  SystemRecord,
  decodeRecord,
  encodeRecord,
} from './protocol.js';
import { Socket, SocketFactory } from './transport.js';

export interface MessageLine {
  messageId: string;
  seq: number;
  authorKind: 'human' | 'surrogate';
  authorName: string;
  text: string;
  relayed: boolean; // true iff provenance.kind === 'relayed'
  insightId: string | null;
  timestamp: number;
}

export interface ClientView {
  participantId: string;
  subgroupId: string;
  roster: RosterEntry[];
  messages: MessageLine[];
  phase: 'connecting' | 'lobby' | 'running' | 'ended';
  remainingSeconds: number;
  taskPrompt: string;
  reportRef: string | null;
  notice: string | null; // blocking notice (join rejection, disconnect)
  inlineError: string | null; // non-blocking (send rejection)
  surveyAcked: boolean;
}

export interface ChatClientOptions {
  serverWsUrl: string;
  sessionId: string;
  displayName: string;
  socketFactory: SocketFactory;
  onChange?: (view: ClientView) => void;
}

export class ChatClient {
  private readonly opts: ChatClientOptions;
  private socket: Socket | null = null;
  private lastSeq = 0;
  private seenMessageIds = new Set<string>();
  private closedByUser = false;

  readonly view: ClientView = {
    participantId: '',
    subgroupId: '',
    roster: [],
    messages: [],
    phase: 'connecting',
    remainingSeconds: 0,
    taskPrompt: '',
    reportRef: null,
    notice: null,
    inlineError: null,
    surveyAcked: false,
  };

  constructor(opts: ChatClientOptions) {
    this.opts = opts;
  }

  private changed(): void {
    this.opts.onChange?.(this.view);
  }

  async connect(): Promise<void> {
    this.closedByUser = false;
    const socket = await Promise.resolve(this.opts.socketFactory(this.opts.serverWsUrl));
    this.socket = socket;
    socket.onMessage((data) => this.handle(decodeRecord(data)));
    socket.onClose(() => this.handleClose());
    socket.onError(() => undefined); // close follows; handled there
    await new Promise<void>((resolve) => socket.onOpen(() => resolve()));
    const join = {
      type: 'join' as const,
      session_id: this.opts.sessionId,
      display_name: this.opts.displayName,
      ...(this.view.participantId
        ? { participant_id: this.view.participantId, resume_from: this.lastSeq }
        : {}),
    };
    socket.send(encodeRecord(join));
  }

  /** Reconnect with resume; duplicates are dropped, gaps are impossible
   * because the server replays everything after resume_from in order. */
  async reconnect(): Promise<void> {
    this.socket?.close();
    await this.connect();
  }

  disconnect(): void {
    this.closedByUser = true;
    this.socket?.close();
  }

  private handleClose(): void {
    if (!this.closedByUser && this.view.phase !== 'ended') {
      this.view.notice = 'connection lost; reconnect to resume';
      this.changed();
    }
  }

  composeAndSend(text: string): boolean {
    if (!text.trim()) {
      this.view.inlineError = 'empty messages are not sent';
      this.changed();
      return false; // blocked client-side
    }
    if (!this.socket) {
      this.view.inlineError = 'not connected';
      this.changed();
      return false;
    }
    this.view.inlineError = null;
    this.socket.send(encodeRecord({ type: 'chat', text }));
    return true;
  }

  submitSurvey(answers: Record<string, 'csi' | 'chat'>): void {
    if (!this.socket) throw new Error('not connected');
    this.socket.send(encodeRecord({ type: 'survey', answers }));
  }

  private handle(record: ServerRecord): void {
    switch (record.type) {
      case 'welcome':
        this.view.participantId = record.participant_id;
        this.view.subgroupId = record.subgroup_id;
        this.view.roster = record.roster;
        if (this.view.phase === 'connecting') this.view.phase = 'lobby';
        this.view.notice = null;
        break;
      case 'chat':
        this.appendChat(record);
        break;
      case 'system':
        this.applySystem(record);
        break;
      case 'ended':
        this.applyEnded(record);
        break;
      case 'error':
        if (!this.view.participantId) {
          this.view.notice = record.reason; // join rejected: blocking
        } else {
          this.view.inlineError = record.reason; // e.g. send after phase end
        }
        break;
      case 'survey_ack':
        this.view.surveyAcked = true;
        break;
      case 'event':
        break; // participant clients ignore facilitator records
    }
    this.changed();
  }

  private appendChat(record: ChatRecord): void {
    if (this.seenMessageIds.has(record.message_id)) return; // resume overlap
    if (record.seq <= this.lastSeq) return;
    this.seenMessageIds.add(record.message_id);
    this.lastSeq = record.seq;
    this.view.messages.push({
      messageId: record.message_id,
      seq: record.seq,
      authorKind: record.author_kind,
      authorName: record.author_name,
      text: record.text,
      relayed: record.provenance.kind === 'relayed',
      insightId: record.provenance.insight_id ?? null,
      timestamp: record.timestamp,
    });
  }

  private applySystem(record: SystemRecord): void {
    this.view.phase = record.phase;
    this.view.remainingSeconds = record.remaining_seconds;
    this.view.taskPrompt = record.task_prompt;
  }

  private applyEnded(record: EndedRecord): void {
    this.view.phase = 'ended';
    this.view.reportRef = record.report_ref;
  }
}
