// @vitest-environment jsdom
import { beforeEach, describe, expect, it, vi } from 'vitest';

import type { ControllerState } from '../src/controller';
import { renderApp } from '../src/view';
import type { QueryPayload } from '../src/types';

function baseState(patch: Partial<ControllerState>): ControllerState {
  return {
    kind: 'loading',
    query: null,
    done: null,
    history: [],
    budgetUsed: 0,
    budget: 10,
    pendingAnswer: null,
    message: null,
    ...patch,
  };
}

function sampleQuery(): QueryPayload {
  return {
    type: 'query',
    query_id: 3,
    phase: 'active',
    budget: 10,
    budget_used: 3,
    remaining: 7,
    triplet: { i: 4, j: 1, k: 6 },
    instances: [
      { role: 'anchor', index: 4, id: 'id4', features: [1.5, -0.25], class_probs: [0.9, 0.1] },
      { role: 'option_a', index: 1, id: 'id1', features: [0.5, 0.25], class_probs: [0.55, 0.45] },
      { role: 'option_b', index: 6, id: 'id6', features: [-1.0, 2.0], class_probs: [0.3, 0.7] },
    ],
    scatter: {
      dims: [1, 0],
      xs: [0, 1, 2, 3, 4, 5, 6, 7],
      ys: [7, 6, 5, 4, 3, 2, 1, 0],
      ids: ['0', '1', '2', '3', '4', '5', '6', '7'],
      highlight: [4, 1, 6],
    },
  };
}

let root: HTMLElement;
const handlers = { submit: vi.fn(), retry: vi.fn() };

beforeEach(() => {
  document.body.innerHTML = '<main id="app"></main>';
  root = document.getElementById('app') as HTMLElement;
  handlers.submit.mockClear();
  handlers.retry.mockClear();
});

describe('query view', () => {
  it('shows the question with ids, progress, and three cards', () => {
    renderApp(root, baseState({ kind: 'awaiting', query: sampleQuery(), budgetUsed: 3 }), handlers);
    expect(root.querySelector('.question')?.textContent).toBe(
      'Is id4 more similar to id1 than to id6?',
    );
    expect(root.querySelector('.progress')?.textContent).toContain('3 of 10');
    expect(root.querySelectorAll('.card')).toHaveLength(3);
    expect(root.querySelectorAll('.features')).toHaveLength(3);
  });

  it('highlights exactly the three queried points in the scatter', () => {
    renderApp(root, baseState({ kind: 'awaiting', query: sampleQuery() }), handlers);
    const all = root.querySelectorAll('circle');
    expect(all).toHaveLength(8);
    expect(root.querySelectorAll('.dot-anchor')).toHaveLength(1);
    expect(root.querySelectorAll('.dot-option_a')).toHaveLength(1);
    expect(root.querySelectorAll('.dot-option_b')).toHaveLength(1);
  });

  it('renders uncertainty badges from the class-probability rows', () => {
    renderApp(root, baseState({ kind: 'awaiting', query: sampleQuery() }), handlers);
    const badges = Array.from(root.querySelectorAll('.badge')).map((b) => b.textContent);
    expect(badges).toEqual(['confident 90%', 'uncertain 55%', 'leaning 70%']);
  });

  it('wires the three answer buttons', () => {
    renderApp(root, baseState({ kind: 'awaiting', query: sampleQuery() }), handlers);
    const buttons = root.querySelectorAll<HTMLButtonElement>('button.answer');
    expect(buttons).toHaveLength(3);
    buttons.forEach((b) => b.click());
    expect(handlers.submit.mock.calls.map((c) => c[0])).toEqual(['yes', 'no', 'dk']);
  });
});

describe('other states', () => {
  it('computing shows a spinner', () => {
    renderApp(root, baseState({ kind: 'computing' }), handlers);
    expect(root.querySelector('.spinner')).not.toBeNull();
    expect(root.querySelectorAll('button.answer')).toHaveLength(0);
  });

  it('retry banner resends through the handler', () => {
    renderApp(
      root,
      baseState({ kind: 'retry_pending', pendingAnswer: 'yes', message: 'Network failure' }),
      handlers,
    );
    const button = root.querySelector<HTMLButtonElement>('.retry-button');
    expect(button).not.toBeNull();
    button?.click();
    expect(handlers.retry).toHaveBeenCalledTimes(1);
  });

  it('error banner shows the message without crashing', () => {
    renderApp(root, baseState({ kind: 'error', message: 'schema mismatch' }), handlers);
    expect(root.querySelector('.banner-error')?.textContent).toContain('schema mismatch');
  });

  it('done shows the weight bar chart', () => {
    renderApp(
      root,
      baseState({
        kind: 'done',
        done: { type: 'done', budget: 10, budget_used: 10, weights: [2, 0.5, 1] },
        budgetUsed: 10,
      }),
      handlers,
    );
    expect(root.querySelectorAll('.weight-bar')).toHaveLength(3);
    expect(root.textContent).toContain('Session complete');
  });
});

describe('history panel', () => {
  it('replays entries verbatim with the answered count', () => {
    const history = [
      { i: 0, j: 1, k: 2, answer: 'yes' as const, source: 'human', ts: 1 },
      { i: 3, j: 4, k: 5, answer: 'dk' as const, source: 'human', ts: 2 },
    ];
    renderApp(
      root,
      baseState({ kind: 'awaiting', query: sampleQuery(), history, budgetUsed: 2 }),
      handlers,
    );
    const items = Array.from(root.querySelectorAll('.history-list li')).map((li) => li.textContent);
    expect(items).toEqual(['(0, 1, 2) → yes [human]', '(3, 4, 5) → dk [human]']);
    expect(root.querySelector('.history h3')?.textContent).toContain('2 answered');
  });
});
