/** DOM rendering: one render per controller state, no retained widgets. */

import type { ControllerState } from './controller';
import type { AnswerValue, HistoryEntry, InstancePayload, QueryPayload } from './types';
import { scaleToBox, uncertaintyBadge } from './projection';

export interface ViewHandlers {
  submit: (answer: AnswerValue) => void;
  retry: () => void;
}

const SVG_NS = 'http://www.w3.org/2000/svg';

export function renderApp(root: HTMLElement, state: ControllerState, handlers: ViewHandlers): void {
  root.textContent = '';
  switch (state.kind) {
    case 'loading':
      root.appendChild(banner('loading', 'Connecting to the session…'));
      break;
    case 'computing':
    case 'submitting':
      root.appendChild(spinner());
      break;
    case 'retry_pending':
      root.appendChild(retryBanner(state, handlers));
      break;
    case 'error':
      root.appendChild(banner('error', state.message ?? 'Something went wrong.'));
      break;
    case 'done':
      root.appendChild(summaryView(state));
      break;
    case 'awaiting':
      if (state.query) root.appendChild(queryView(state.query, handlers));
      break;
  }
  if (state.kind === 'awaiting' || state.kind === 'done') {
    root.appendChild(historyPanel(state.history, state.budgetUsed));
  }
}

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

function banner(kind: string, message: string): HTMLElement {
  const div = el('div', `banner banner-${kind}`, message);
  div.setAttribute('role', 'status');
  return div;
}

function spinner(): HTMLElement {
  const div = el('div', 'computing');
  div.appendChild(el('div', 'spinner'));
  div.appendChild(el('p', undefined, 'Updating the model and picking the next question…'));
  return div;
}

function retryBanner(state: ControllerState, handlers: ViewHandlers): HTMLElement {
  const div = el('div', 'banner banner-retry');
  div.appendChild(el('p', undefined, state.message ?? 'Network failure.'));
  const button = el('button', 'retry-button', 'Retry');
  button.addEventListener('click', () => handlers.retry());
  div.appendChild(button);
  return div;
}

function queryView(query: QueryPayload, handlers: ViewHandlers): HTMLElement {
  const wrap = el('div', 'query-view');

  const anchor = query.instances.find((inst) => inst.role === 'anchor');
  const a = query.instances.find((inst) => inst.role === 'option_a');
  const b = query.instances.find((inst) => inst.role === 'option_b');
  wrap.appendChild(
    el(
      'h2',
      'question',
      `Is ${anchor?.id ?? '?'} more similar to ${a?.id ?? '?'} than to ${b?.id ?? '?'}?`,
    ),
  );
  wrap.appendChild(
    el('p', 'progress', `Answered ${query.budget_used} of ${query.budget} queries`),
  );

  const cards = el('div', 'cards');
  for (const inst of query.instances) {
    cards.appendChild(instanceCard(inst));
  }
  wrap.appendChild(cards);

  wrap.appendChild(scatterPlot(query));

  const buttons = el('div', 'answers');
  const options: Array<[AnswerValue, string]> = [
    ['yes', 'Yes (y)'],
    ['no', 'No (n)'],
    ['dk', "Don't know (d)"],
  ];
  for (const [value, label] of options) {
    const button = el('button', `answer answer-${value}`, label);
    button.dataset.answer = value;
    button.addEventListener('click', () => handlers.submit(value));
    buttons.appendChild(button);
  }
  wrap.appendChild(buttons);
  return wrap;
}

function instanceCard(inst: InstancePayload): HTMLElement {
  const card = el('div', `card card-${inst.role}`);
  const title: Record<string, string> = {
    anchor: 'Anchor',
    option_a: 'Option A',
    option_b: 'Option B',
  };
  card.appendChild(el('h3', undefined, `${title[inst.role]} · ${inst.id}`));
  card.appendChild(el('span', 'badge', uncertaintyBadge(inst.class_probs)));

  const table = el('table', 'features');
  const body = document.createElement('tbody');
  inst.features.forEach((value, f) => {
    const row = document.createElement('tr');
    row.appendChild(el('td', 'feature-name', `f${f}`));
    row.appendChild(el('td', 'feature-value', value.toFixed(3)));
    body.appendChild(row);
  });
  table.appendChild(body);
  card.appendChild(table);
  return card;
}

function scatterPlot(query: QueryPayload): HTMLElement {
  const width = 420;
  const height = 300;
  const holder = el('div', 'scatter');
  const svg = document.createElementNS(SVG_NS, 'svg');
  svg.setAttribute('viewBox', `0 0 ${width} ${height}`);
  svg.setAttribute('width', String(width));
  svg.setAttribute('height', String(height));

  const points = scaleToBox(query.scatter.xs, query.scatter.ys, width, height);
  const roleByIndex = new Map<number, string>();
  const [hi, hj, hk] = query.scatter.highlight;
  roleByIndex.set(hi, 'anchor');
  roleByIndex.set(hj, 'option_a');
  roleByIndex.set(hk, 'option_b');

  points.forEach((pt, idx) => {
    const circle = document.createElementNS(SVG_NS, 'circle');
    circle.setAttribute('cx', pt.x.toFixed(1));
    circle.setAttribute('cy', pt.y.toFixed(1));
    const role = roleByIndex.get(idx);
    circle.setAttribute('r', role ? '7' : '3');
    circle.setAttribute('class', role ? `dot dot-${role}` : 'dot');
    svg.appendChild(circle);
  });
  holder.appendChild(svg);
  holder.appendChild(
    el('p', 'scatter-caption', `Metric view: dims f${query.scatter.dims[0]} × f${query.scatter.dims[1]}`),
  );
  return holder;
}

function summaryView(state: ControllerState): HTMLElement {
  const wrap = el('div', 'summary');
  wrap.appendChild(el('h2', undefined, 'Session complete'));
  wrap.appendChild(
    el('p', undefined, `${state.budgetUsed} of ${state.budget} queries answered.`),
  );
  const weights = state.done?.weights ?? [];
  wrap.appendChild(weightChart(weights));
  return wrap;
}

function weightChart(weights: number[]): HTMLElement {
  const width = 420;
  const barHeight = 18;
  const holder = el('div', 'weight-chart');
  holder.appendChild(el('h3', undefined, 'Learned metric weights'));
  const svg = document.createElementNS(SVG_NS, 'svg');
  const height = Math.max(weights.length * (barHeight + 4), barHeight);
  svg.setAttribute('viewBox', `0 0 ${width} ${height}`);
  svg.setAttribute('width', String(width));
  svg.setAttribute('height', String(height));
  const max = Math.max(...weights, 1e-12);
  weights.forEach((w, f) => {
    const y = f * (barHeight + 4);
    const bar = document.createElementNS(SVG_NS, 'rect');
    bar.setAttribute('x', '60');
    bar.setAttribute('y', String(y));
    bar.setAttribute('height', String(barHeight));
    bar.setAttribute('width', String(Math.max(1, (w / max) * (width - 70))));
    bar.setAttribute('class', 'weight-bar');
    svg.appendChild(bar);
    const label = document.createElementNS(SVG_NS, 'text');
    label.setAttribute('x', '0');
    label.setAttribute('y', String(y + barHeight - 4));
    label.setAttribute('class', 'weight-label');
    label.textContent = `f${f}: ${w.toFixed(3)}`;
    svg.appendChild(label);
  });
  holder.appendChild(svg);
  return holder;
}

function historyPanel(entries: HistoryEntry[], budgetUsed: number): HTMLElement {
  const panel = el('div', 'history');
  panel.appendChild(el('h3', undefined, `History (${budgetUsed} answered)`));
  const list = el('ul', 'history-list');
  for (const entry of entries) {
    list.appendChild(
      el(
        'li',
        `history-${entry.answer}`,
        `(${entry.i}, ${entry.j}, ${entry.k}) → ${entry.answer} [${entry.source}]`,
      ),
    );
  }
  panel.appendChild(list);
  return panel;
}
