/** Client-side session state machine.
 *
 * The server is the source of truth; every state here is derived from its
 * responses. One request is in flight at a time, and an answer is bound to
 * the query_id it was served with, so a double-click or a replayed retry
 * can never record twice.
 */

import { ApiClient, ConflictError } from './api';
import type { AnswerValue, DonePayload, HistoryEntry, QueryPayload } from './types';

export type StateKind =
  | 'loading'
  | 'awaiting'
  | 'submitting'
  | 'computing'
  | 'retry_pending'
  | 'done'
  | 'error';

export interface ControllerState {
  kind: StateKind;
  query: QueryPayload | null;
  done: DonePayload | null;
  history: HistoryEntry[];
  budgetUsed: number;
  budget: number;
  pendingAnswer: AnswerValue | null;
  message: string | null;
}

export interface ControllerOptions {
  pollIntervalMs?: number;
  onChange?: (state: ControllerState) => void;
}

const initialState = (): ControllerState => ({
  kind: 'loading',
  query: null,
  done: null,
  history: [],
  budgetUsed: 0,
  budget: 0,
  pendingAnswer: null,
  message: null,
});

export class SessionController {
  private state: ControllerState = initialState();
  private busy = false;
  private pollTimer: ReturnType<typeof setTimeout> | null = null;
  private readonly pollIntervalMs: number;
  private readonly onChange?: (state: ControllerState) => void;

  constructor(private client: ApiClient, options: ControllerOptions = {}) {
    this.pollIntervalMs = options.pollIntervalMs ?? 750;
    this.onChange = options.onChange;
  }

  getState(): ControllerState {
    return this.state;
  }

  private setState(patch: Partial<ControllerState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange?.(this.state);
  }

  /** Fetch the current query (and history) and settle into a stable state. */
  async refresh(): Promise<void> {
    try {
      const response = await this.client.getQuery();
      if (response.type === 'computing') {
        this.setState({ kind: 'computing', query: null });
        this.schedulePoll();
        return;
      }
      const history = await this.client.getHistory();
      if (response.type === 'done') {
        this.setState({
          kind: 'done',
          query: null,
          done: response,
          history: history.entries,
          budgetUsed: response.budget_used,
          budget: response.budget,
          pendingAnswer: null,
          message: null,
        });
        return;
      }
      this.setState({
        kind: 'awaiting',
        query: response,
        done: null,
        history: history.entries,
        budgetUsed: response.budget_used,
        budget: response.budget,
        pendingAnswer: null,
        message: null,
      });
    } catch (err) {
      this.setState({ kind: 'error', message: describe(err) });
    }
  }

  async start(): Promise<void> {
    await this.refresh();
  }

  stop(): void {
    if (this.pollTimer !== null) {
      clearTimeout(this.pollTimer);
      this.pollTimer = null;
    }
  }

  private schedulePoll(): void {
    this.stop();
    this.pollTimer = setTimeout(() => {
      void this.refresh();
    }, this.pollIntervalMs);
  }

  /** Answer the pending query. Ignored unless a query is actually shown,
   * so rapid double-clicks collapse into one submission. */
  async submit(answer: AnswerValue): Promise<void> {
    if (this.busy || this.state.kind !== 'awaiting' || !this.state.query) return;
    await this.send(answer, this.state.query.query_id);
  }

  /** Re-send an answer that hit a network failure. */
  async retry(): Promise<void> {
    if (this.busy || this.state.kind !== 'retry_pending') return;
    const answer = this.state.pendingAnswer;
    const query = this.state.query;
    if (answer === null || query === null) {
      await this.refresh();
      return;
    }
    await this.send(answer, query.query_id);
  }

  private async send(answer: AnswerValue, queryId: number): Promise<void> {
    this.busy = true;
    this.setState({ kind: 'submitting', pendingAnswer: answer });
    try {
      await this.client.postAnswer(answer, queryId);
      this.busy = false;
      this.setState({ kind: 'computing', pendingAnswer: null });
      await this.refresh();
    } catch (err) {
      this.busy = false;
      if (err instanceof ConflictError) {
        // the server already counted this answer (ack was lost, or the view
        // went stale); resync rather than surface an error
        await this.refresh();
        return;
      }
      if (isNetworkError(err)) {
        this.setState({
          kind: 'retry_pending',
          pendingAnswer: answer,
          message: 'Network failure: the answer was not delivered. Retry to resend it.',
        });
        return;
      }
      this.setState({ kind: 'error', message: describe(err) });
    }
  }
}

function isNetworkError(err: unknown): boolean {
  return err instanceof TypeError;
}

function describe(err: unknown): string {
  if (err instanceof Error) return err.message;
  return String(err);
}
