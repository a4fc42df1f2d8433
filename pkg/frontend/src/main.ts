// Browser entry point: join form -> participant view or facilitator
// dashboard, both re-rendered from server-ordered state.

import { ChatClient } from './client.js';
import { FacilitatorDashboard } from './dashboard.js';
import { renderClientView, renderDashboard } from './dom.js';
import { defaultSocketFactory, wsUrl } from './transport.js';

function query<T extends HTMLElement>(selector: string): T {
  const node = document.querySelector<T>(selector);
  if (!node) throw new Error(`missing element ${selector}`);
  return node;
}

async function startParticipant(server: string, sessionId: string, name: string): Promise<void> {
  const root = query<HTMLElement>('#view');
  const client = new ChatClient({
    serverWsUrl: wsUrl(server),
    sessionId,
    displayName: name,
    socketFactory: defaultSocketFactory,
    onChange: (view) =>
      renderClientView(root, view, (answers) => client.submitSurvey(answers)),
  });
  await client.connect();

  const input = query<HTMLInputElement>('#compose-text');
  query<HTMLFormElement>('#compose').addEventListener('submit', (ev) => {
    ev.preventDefault();
    if (client.composeAndSend(input.value)) input.value = '';
  });
  query<HTMLButtonElement>('#reconnect').addEventListener('click', () => {
    void client.reconnect();
  });
}

async function startFacilitator(
  server: string,
  sessionId: string,
  roleToken: string,
): Promise<void> {
  const root = query<HTMLElement>('#view');
  const dashboard = new FacilitatorDashboard({
    serverUrl: server,
    serverWsUrl: wsUrl(server),
    sessionId,
    roleToken: roleToken || undefined,
    socketFactory: defaultSocketFactory,
    onChange: (view) => renderDashboard(root, view),
  });
  await dashboard.connect();
  const tick = () => void dashboard.refreshRanking().catch(() => undefined);
  tick();
  setInterval(tick, 3000);
}

function main(): void {
  const form = query<HTMLFormElement>('#join');
  form.addEventListener('submit', (ev) => {
    ev.preventDefault();
    const server = query<HTMLInputElement>('#server-url').value.trim();
    const sessionId = query<HTMLInputElement>('#session-id').value.trim();
    const name = query<HTMLInputElement>('#display-name').value.trim();
    const role = query<HTMLSelectElement>('#role').value;
    const token = query<HTMLInputElement>('#role-token').value.trim();
    form.style.display = 'none';
    query<HTMLElement>('#chrome').style.display = role === 'facilitator' ? 'none' : 'block';
    const task =
      role === 'facilitator'
        ? startFacilitator(server, sessionId, token)
        : startParticipant(server, sessionId, name);
    task.catch((err) => {
      query<HTMLElement>('#view').textContent = `connection failed: ${err}`;
    });
  });
}

main();
