// End-to-end against a real session server: spawns `swarmchat serve` as a
// child process and drives genuine WebSocket clients through it.

import { ChildProcess, execFile, spawn } from 'node:child_process';
import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { promisify } from 'node:util';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ChatClient } from '../src/client.js';
import { FacilitatorDashboard } from '../src/dashboard.js';
import { defaultSocketFactory, wsUrl } from '../src/transport.js';

const execFileAsync = promisify(execFile);

const PORT = 8710 + Math.floor(Math.random() * 80);
const BASE = `http://127.0.0.1:${PORT}`;
const REPO_ROOT = join(__dirname, '..', '..');

let server: ChildProcess;
let dataDir: string;

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const resp = await fetch(`${BASE}/sessions/__probe__`);
      if (resp.status === 404) return;
    } catch {
      // not up yet
    }
    await sleep(200);
  }
  throw new Error('server did not come up');
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function createSession(body: object): Promise<string> {
  const resp = await fetch(`${BASE}/sessions`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(body),
  });
  expect(resp.ok).toBe(true);
  return (await resp.json()).session_id;
}

async function post(path: string): Promise<void> {
  const resp = await fetch(`${BASE}${path}`, { method: 'POST' });
  expect(resp.ok).toBe(true);
}

async function makeClient(sessionId: string, name: string): Promise<ChatClient> {
  const client = new ChatClient({
    serverWsUrl: wsUrl(BASE),
    sessionId,
    displayName: name,
    socketFactory: defaultSocketFactory,
  });
  await client.connect();
  await waitFor(() => client.view.participantId !== '', `welcome for ${name}`);
  return client;
}

async function waitFor(cond: () => boolean, what: string, timeoutMs = 15000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (cond()) return;
    await sleep(100);
  }
  throw new Error(`timed out waiting for ${what}`);
}

async function fetchLogMessages(sessionId: string): Promise<any[]> {
  const text = await (await fetch(`${BASE}/sessions/${sessionId}/log`)).text();
  return text
    .trim()
    .split('\n')
    .map((line) => JSON.parse(line));
}

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), 'swarmchat-e2e-'));
  server = spawn(
    'python3',
    ['-m', 'swarmchat.cli', 'serve', '--port', String(PORT), '--data-dir', dataDir],
    { cwd: REPO_ROOT, stdio: 'ignore' },
  );
  await waitForServer();
}, 60000);

afterAll(() => {
  server?.kill();
});

describe('single-subgroup session', () => {
  it('mirrors the event log order, resumes without gaps, and matches the report CLI', async () => {
    const sessionId = await createSession({
      session_id: 'e2e-one-group',
      target_subgroup_size: 5,
      duration: 300,
      tick_interval: 1,
      starvation_threshold: 1,
      distill_every_messages: 2,
      distill_every_seconds: 5,
      random_seed: 9,
      task_prompt: 'alternative uses for traffic cones',
    });

    const clients: ChatClient[] = [];
    for (let i = 0; i < 5; i++) clients.push(await makeClient(sessionId, `user${i}`));

    const dashboard = new FacilitatorDashboard({
      serverUrl: BASE,
      serverWsUrl: wsUrl(BASE),
      sessionId,
      socketFactory: defaultSocketFactory,
    });
    await dashboard.connect();

    await post(`/sessions/${sessionId}/start`);
    await waitFor(() => clients.every((c) => c.view.phase === 'running'), 'running phase');
    expect(clients[0].view.subgroupId).toBe(clients[4].view.subgroupId);
    expect(clients[0].view.roster.filter((r) => r.kind === 'human')).toHaveLength(5);
    expect(clients[0].view.taskPrompt).toContain('traffic cones');

    const lines = [
      'use cones as megaphones for cheering games',
      'stack cones into giant orange holiday trees',
      'paint cones gold selling quirky trophy stands',
      'great idea, the gold cones would sell fast',
      'cones anchor beach umbrellas filled with sand',
      'drill holes making garden sprinkler towers',
    ];
    for (let i = 0; i < 4; i++) {
      clients[i % 5].composeAndSend(lines[i]);
      await waitFor(
        () => clients.every((c) => c.view.messages.length >= i + 1),
        `fan-out of message ${i}`,
      );
    }

    // reconnect: drop one client, let messages pass, resume from last seq
    const dropped = clients[3];
    dropped.disconnect();
    clients[0].composeAndSend(lines[4]);
    clients[1].composeAndSend(lines[5]);
    await waitFor(
      () => clients[0].view.messages.length >= 6,
      'messages while client away',
    );
    expect(dropped.view.messages.length).toBeLessThan(6);
    await dropped.reconnect();
    await waitFor(() => dropped.view.messages.length >= 6, 'resume replay');

    await post(`/sessions/${sessionId}/end`);
    await waitFor(() => clients.every((c) => c.view.phase === 'ended'), 'ended phase');

    // screen order equals the event log's per-subgroup message order
    const log = await fetchLogMessages(sessionId);
    const logIds = log
      .filter((r) => r.kind === 'message_posted')
      .map((r) => r.message_id);
    for (const client of clients) {
      expect(client.view.messages.map((m) => m.messageId)).toEqual(logIds);
      const seqs = client.view.messages.map((m) => m.seq);
      expect([...seqs].sort((a, b) => a - b)).toEqual(seqs); // no gaps re-ordered
    }

    // single subgroup: no insight may ever be delivered (no second group)
    expect(log.filter((r) => r.kind === 'insight_delivered')).toHaveLength(0);
    for (const client of clients) {
      expect(client.view.messages.every((m) => !m.relayed)).toBe(true);
    }

    // dashboard ranking equals the report CLI over the same log
    await dashboard.refreshRanking();
    const logPath = join(dataDir, 'e2e-one-group.fetched.jsonl');
    const rawLog = await (await fetch(`${BASE}/sessions/${sessionId}/log`)).text();
    writeFileSync(logPath, rawLog);
    const reportPath = join(dataDir, 'e2e-one-group.report.json');
    await execFileAsync(
      'python3',
      ['-m', 'swarmchat.cli', 'report', '--log', logPath, '--out', reportPath],
      { cwd: REPO_ROOT },
    );
    const report = JSON.parse(readFileSync(reportPath, 'utf-8'));
    const reportTop = report.ideas.slice(0, 10);
    expect(dashboard.view.ranking.map((i) => i.idea_id)).toEqual(
      reportTop.map((i: any) => i.idea_id),
    );
    for (let i = 0; i < reportTop.length; i++) {
      expect(dashboard.view.ranking[i].support).toBe(reportTop[i].support);
      expect(dashboard.view.ranking[i].oppose).toBe(reportTop[i].oppose);
      expect(dashboard.view.ranking[i].subgroups_mentioning).toEqual(
        reportTop[i].subgroups_mentioning,
      );
    }
    expect(dashboard.view.reportRef).toBe(`/sessions/${sessionId}/report`);

    // survey round-trip after end
    const answers = Object.fromEntries(
      Array.from({ length: 7 }, (_, i) => [`q${i + 1}`, 'csi' as const]),
    );
    clients[0].submitSurvey(answers);
    await waitFor(() => clients[0].view.surveyAcked, 'survey ack');

    clients.forEach((c) => c.disconnect());
    dashboard.disconnect();
  }, 90000);
});

describe('two-subgroup session', () => {
  it('relays arrive badged and the dashboard draws delivery edges', async () => {
    const sessionId = await createSession({
      session_id: 'e2e-two-groups',
      target_subgroup_size: 5,
      duration: 300,
      tick_interval: 1,
      starvation_threshold: 1,
      novelty_floor: 0.05,
      distill_every_messages: 2,
      distill_every_seconds: 3,
      random_seed: 4,
    });

    const clients: ChatClient[] = [];
    for (let i = 0; i < 10; i++) clients.push(await makeClient(sessionId, `user${i}`));
    const dashboard = new FacilitatorDashboard({
      serverUrl: BASE,
      serverWsUrl: wsUrl(BASE),
      sessionId,
      socketFactory: defaultSocketFactory,
    });
    await dashboard.connect();

    await post(`/sessions/${sessionId}/start`);
    await waitFor(() => clients.every((c) => c.view.phase === 'running'), 'running');
    expect(new Set(clients.map((c) => c.view.subgroupId)).size).toBe(2);

    const groupA = clients.filter((c) => c.view.subgroupId === clients[0].view.subgroupId);
    const texts = [
      'use cones as megaphones for cheering games',
      'stack cones into giant orange holiday trees',
      'plunger handles become garden stakes for tomatoes',
      'use plungers as dent pullers for car doors',
    ];
    texts.forEach((text, i) => groupA[i % groupA.length].composeAndSend(text));

    const groupB = clients.filter((c) => c.view.subgroupId !== clients[0].view.subgroupId);
    await waitFor(
      () => groupB.some((c) => c.view.messages.some((m) => m.relayed)),
      'relayed insight in the other subgroup',
      30000,
    );
    const relay = groupB
      .flatMap((c) => c.view.messages)
      .find((m) => m.relayed)!;
    expect(relay.authorKind).toBe('surrogate');
    expect(relay.insightId).not.toBeNull();
    expect(texts.some((t) => relay.text.endsWith(t))).toBe(true); // verbatim body

    await waitFor(() => dashboard.view.edges.length > 0, 'dashboard edge');
    const edge = dashboard.view.edges[0];
    expect(edge.source).not.toBe('');
    expect(edge.receiver).not.toBe(edge.source);

    // per-subgroup screen order still matches the log per subgroup
    await post(`/sessions/${sessionId}/end`);
    await waitFor(() => clients.every((c) => c.view.phase === 'ended'), 'ended');
    const log = await fetchLogMessages(sessionId);
    for (const group of [groupA, groupB]) {
      const gid = group[0].view.subgroupId;
      const idsInLog = log
        .filter((r) => r.kind === 'message_posted' && r.subgroup_id === gid)
        .map((r) => r.message_id);
      for (const client of group) {
        expect(client.view.messages.map((m) => m.messageId)).toEqual(idsInLog);
      }
    }

    clients.forEach((c) => c.disconnect());
    dashboard.disconnect();
  }, 90000);
});
