// Facilitator dashboard: read-only event stream drives a subgroup grid
// with insight-flow edges; the idea ranking is polled from the control
// API so it always matches what the forensic report would say.

import { EventRecord, ServerRecord, decodeRecord, encodeRecord } from './protocol.js';
import { Socket, SocketFactory } from './transport.js';

export interface FlowEdge {
  insightId: string;
  source: string;
  receiver: string;
  at: number; // wall_time ms
}

export interface RankedIdea {
  idea_id: string;
  canonical_tokens: string[];
  subgroups_mentioning: string[];
  mention_count: number;
  support: number;
  oppose: number;
  neutral: number;
}

export interface DashboardView {
  subgroups: string[];
  edges: FlowEdge[];
  messageCounts: Record<string, number>;
  insightSources: Record<string, string>;
  ranking: RankedIdea[];
  phase: 'connecting' | 'lobby' | 'running' | 'ended';
  reportRef: string | null;
  notice: string | null;
}

export interface DashboardOptions {
  serverUrl: string; // http(s) base of the control API
  serverWsUrl: string;
  sessionId: string;
  roleToken?: string;
  socketFactory: SocketFactory;
  fetchJson?: (url: string) => Promise<any>;
  onChange?: (view: DashboardView) => void;
}

export class FacilitatorDashboard {
  private readonly opts: DashboardOptions;
  private socket: Socket | null = null;

  readonly view: DashboardView = {
    subgroups: [],
    edges: [],
    messageCounts: {},
    insightSources: {},
    ranking: [],
    phase: 'connecting',
    reportRef: null,
    notice: null,
  };

  constructor(opts: DashboardOptions) {
    this.opts = opts;
  }

  private changed(): void {
    this.opts.onChange?.(this.view);
  }

  private async fetchJson(path: string): Promise<any> {
    const url = this.opts.serverUrl.replace(/\/+$/, '') + path;
    if (this.opts.fetchJson) return this.opts.fetchJson(url);
    const resp = await fetch(url);
    if (!resp.ok) throw new Error(`${resp.status} for ${url}`);
    return resp.json();
  }

  async connect(): Promise<void> {
    const socket = await Promise.resolve(this.opts.socketFactory(this.opts.serverWsUrl));
    this.socket = socket;
    socket.onMessage((data) => this.handle(decodeRecord(data)));
    socket.onClose(() => {
      if (this.view.phase !== 'ended') {
        this.view.notice = 'event stream disconnected';
        this.changed();
      }
    });
    socket.onError(() => undefined);
    await new Promise<void>((resolve) => socket.onOpen(() => resolve()));
    socket.send(
      encodeRecord({
        type: 'join',
        session_id: this.opts.sessionId,
        display_name: 'facilitator',
        role: 'facilitator',
        ...(this.opts.roleToken ? { role_token: this.opts.roleToken } : {}),
      }),
    );
  }

  disconnect(): void {
    this.socket?.close();
  }

  /** Pull the current top-10 idea ranking from the taxonomy snapshot. */
  async refreshRanking(): Promise<void> {
    const doc = await this.fetchJson(`/sessions/${this.opts.sessionId}/ranking?top=10`);
    this.view.ranking = doc.ideas;
    this.changed();
  }

  private handle(record: ServerRecord): void {
    switch (record.type) {
      case 'welcome':
        if (this.view.phase === 'connecting') this.view.phase = 'lobby';
        break;
      case 'system':
        this.view.phase = record.phase;
        break;
      case 'ended':
        this.view.phase = 'ended';
        this.view.reportRef = record.report_ref;
        break;
      case 'error':
        this.view.notice = record.reason;
        break;
      case 'event':
        this.applyEvent(record);
        break;
      case 'chat':
      case 'survey_ack':
        break;
    }
    this.changed();
  }

  private applyEvent(ev: EventRecord): void {
    switch (ev.kind) {
      case 'session_started': {
        const partition = ev.partition as Array<{ subgroup_id: string }>;
        this.view.subgroups = partition.map((g) => g.subgroup_id).sort();
        this.view.phase = 'running';
        break;
      }
      case 'participant_joined': {
        const fresh = ev.new_subgroup as { subgroup_id: string } | undefined;
        if (fresh && !this.view.subgroups.includes(fresh.subgroup_id)) {
          this.view.subgroups = [...this.view.subgroups, fresh.subgroup_id].sort();
        }
        break;
      }
      case 'message_posted': {
        const gid = String(ev.subgroup_id);
        this.view.messageCounts[gid] = (this.view.messageCounts[gid] ?? 0) + 1;
        break;
      }
      case 'insight_created':
        this.view.insightSources[String(ev.insight_id)] = String(ev.source_subgroup);
        break;
      case 'insight_delivered': {
        const insightId = String(ev.insight_id);
        this.view.edges.push({
          insightId,
          source: this.view.insightSources[insightId] ?? '',
          receiver: String(ev.subgroup_id),
          at: ev.wall_time,
        });
        break;
      }
      case 'session_ended':
        this.view.phase = 'ended';
        break;
    }
  }
}
