import { ApiClient } from './api';
import { SessionController } from './controller';
import { renderApp } from './view';
import type { AnswerValue } from './types';

const root = document.getElementById('app');
if (!root) throw new Error('missing #app mount point');

const client = new ApiClient('');
const controller = new SessionController(client, {
  onChange: (state) =>
    renderApp(root, state, {
      submit: (answer) => void controller.submit(answer),
      retry: () => void controller.retry(),
    }),
});

const keyMap: Record<string, AnswerValue> = { y: 'yes', n: 'no', d: 'dk' };
document.addEventListener('keydown', (event) => {
  const answer = keyMap[event.key.toLowerCase()];
  if (answer && !event.repeat) void controller.submit(answer);
});

void controller.start();
