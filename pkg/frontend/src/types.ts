/** Wire types of the /v1 session API. */

export type AnswerValue = 'yes' | 'no' | 'dk';

export interface TripletRef {
  i: number;
  j: number;
  k: number;
}

export interface InstancePayload {
  role: 'anchor' | 'option_a' | 'option_b';
  index: number;
  id: string;
  features: number[];
  class_probs: number[];
}

export interface ScatterPayload {
  dims: [number, number] | number[];
  xs: number[];
  ys: number[];
  ids: string[];
  highlight: number[];
}

export interface QueryPayload {
  type: 'query';
  query_id: number;
  phase: 'bootstrap' | 'active';
  budget: number;
  budget_used: number;
  remaining: number;
  triplet: TripletRef;
  instances: InstancePayload[];
  scatter: ScatterPayload;
}

export interface ComputingPayload {
  type: 'computing';
}

export interface DonePayload {
  type: 'done';
  budget: number;
  budget_used: number;
  weights: number[];
}

export type QueryResponse = QueryPayload | ComputingPayload | DonePayload;

export interface StatusPayload {
  status: 'awaiting_answer' | 'computing' | 'done';
  phase: string;
  budget: number;
  budget_used: number;
  remaining: number;
  query_id: number | null;
}

export interface AckPayload {
  recorded: TripletRef & { answer: AnswerValue };
  status: string;
  budget_used: number;
  remaining: number;
}

export interface MetricPayload {
  weights: number[];
  top_dims: number[];
}

export interface HistoryEntry {
  i: number;
  j: number;
  k: number;
  answer: AnswerValue;
  source: string;
  ts: number;
}

export interface HistoryPayload {
  entries: HistoryEntry[];
  budget_used: number;
}
