// DOM renderers for the participant view and the facilitator dashboard.
// Pure replace-on-change rendering driven by the client state objects;
// the screen is always a projection of server-ordered state.

import { ClientView, MessageLine } from './client.js';
import { DashboardView } from './dashboard.js';
import { SURVEY_QUESTIONS } from './protocol.js';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function messageNode(line: MessageLine): HTMLElement {
  const row = el('div', line.relayed ? 'msg msg-relayed' : 'msg');
  const author = el('span', 'msg-author', line.authorName);
  row.appendChild(author);
  if (line.relayed) {
    row.appendChild(el('span', 'badge badge-relay', 'relay'));
    row.appendChild(el('span', 'badge badge-origin', 'from another group'));
  }
  row.appendChild(el('span', 'msg-text', line.text));
  row.dataset.messageId = line.messageId;
  row.dataset.seq = String(line.seq);
  return row;
}

export function renderClientView(
  root: HTMLElement,
  view: ClientView,
  onSubmitSurvey: (answers: Record<string, 'csi' | 'chat'>) => void,
): void {
  root.textContent = '';
  if (view.notice) {
    root.appendChild(el('div', 'notice', view.notice));
    return;
  }
  const header = el('div', 'header');
  header.appendChild(el('span', 'phase', `phase: ${view.phase}`));
  if (view.phase === 'running') {
    header.appendChild(
      el('span', 'countdown', `${Math.max(0, Math.round(view.remainingSeconds))}s left`),
    );
  }
  if (view.taskPrompt) header.appendChild(el('div', 'task', view.taskPrompt));
  root.appendChild(header);

  const rosterBox = el('div', 'roster');
  rosterBox.appendChild(el('span', undefined, `subgroup ${view.subgroupId || '(pending)'}: `));
  for (const entry of view.roster) {
    rosterBox.appendChild(
      el('span', entry.kind === 'surrogate' ? 'peer peer-agent' : 'peer', entry.name),
    );
  }
  root.appendChild(rosterBox);

  const list = el('div', 'messages');
  for (const line of view.messages) list.appendChild(messageNode(line));
  root.appendChild(list);

  if (view.inlineError) root.appendChild(el('div', 'inline-error', view.inlineError));

  if (view.phase === 'ended') {
    if (view.reportRef) {
      const link = el('a', 'report-link', 'session report');
      link.setAttribute('href', view.reportRef);
      root.appendChild(link);
    }
    if (view.surveyAcked) {
      root.appendChild(el('div', 'survey-done', 'survey received, thank you'));
    } else {
      root.appendChild(surveyForm(onSubmitSurvey));
    }
  }
}

function surveyForm(onSubmit: (answers: Record<string, 'csi' | 'chat'>) => void): HTMLElement {
  const form = el('form', 'survey');
  form.appendChild(el('div', 'survey-title', 'Compare the two brainstorming formats'));
  for (const q of SURVEY_QUESTIONS) {
    const row = el('div', 'survey-q');
    row.appendChild(el('label', undefined, q.text));
    for (const value of ['csi', 'chat'] as const) {
      const label = el('label', 'survey-opt');
      const input = el('input');
      input.type = 'radio';
      input.name = q.id;
      input.value = value;
      label.appendChild(input);
      label.appendChild(
        document.createTextNode(value === 'csi' ? ' small groups with relays' : ' one big room'),
      );
      row.appendChild(label);
    }
    form.appendChild(row);
  }
  const submit = el('button', 'survey-submit', 'submit survey');
  submit.type = 'submit';
  form.appendChild(submit);
  form.addEventListener('submit', (ev) => {
    ev.preventDefault();
    const answers: Record<string, 'csi' | 'chat'> = {};
    for (const q of SURVEY_QUESTIONS) {
      const checked = form.querySelector<HTMLInputElement>(`input[name="${q.id}"]:checked`);
      if (!checked) return; // all seven required
      answers[q.id] = checked.value as 'csi' | 'chat';
    }
    onSubmit(answers);
  });
  return form;
}

export function renderDashboard(root: HTMLElement, view: DashboardView): void {
  root.textContent = '';
  if (view.notice) root.appendChild(el('div', 'notice', view.notice));
  root.appendChild(el('div', 'phase', `phase: ${view.phase}`));

  const grid = el('div', 'grid');
  for (const gid of view.subgroups) {
    const cell = el('div', 'grid-cell');
    cell.dataset.subgroup = gid;
    cell.appendChild(el('div', 'grid-id', gid));
    cell.appendChild(el('div', 'grid-count', `${view.messageCounts[gid] ?? 0} msgs`));
    grid.appendChild(cell);
  }
  root.appendChild(grid);

  const edges = el('div', 'edges');
  edges.appendChild(el('div', 'edges-title', `insight flow (${view.edges.length} deliveries)`));
  for (const edge of view.edges.slice(-30)) {
    const row = el('div', 'edge', `${edge.insightId}: ${edge.source} -> ${edge.receiver}`);
    row.dataset.insightId = edge.insightId;
    edges.appendChild(row);
  }
  root.appendChild(edges);

  const ranking = el('ol', 'ranking');
  for (const idea of view.ranking) {
    ranking.appendChild(
      el(
        'li',
        'ranking-item',
        `${idea.canonical_tokens.join(' ')} — ${idea.subgroups_mentioning.length} groups, ` +
          `+${idea.support}/-${idea.oppose}`,
      ),
    );
  }
  root.appendChild(ranking);

  if (view.reportRef) {
    const link = el('a', 'report-link', 'forensic report');
    link.setAttribute('href', view.reportRef);
    root.appendChild(link);
  }
}
