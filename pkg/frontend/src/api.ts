// Typed client for the governance server's HTTP surface.
//
// The console holds no authoritative state: every mutation goes through
// these endpoints and the UI re-renders from the responses.

import type {
  ApiError,
  ContextState,
  Health,
  PendingEscalation,
  PutRulesResult,
  RuleSetDocument,
  TracePage,
  ValidateResult,
  LintWarning,
  VerificationReport,
} from './types.js';

export class RequestFailed extends Error {
  constructor(
    readonly status: number,
    readonly error: ApiError,
  ) {
    super(`${error.code}: ${error.message}`);
  }
}

export interface TraceFilter {
  agent_id?: string;
  workflow_id?: string;
  decision?: string;
  rule_id?: string;
  limit?: number;
  after_ts?: number;
  after_id?: string;
}

export class Api {
  constructor(
    readonly baseUrl: string,
    private readonly operatorToken: string | null = null,
  ) {}

  private headers(json = false): Record<string, string> {
    const headers: Record<string, string> = {};
    if (this.operatorToken) headers['Authorization'] = `Bearer ${this.operatorToken}`;
    if (json) headers['Content-Type'] = 'application/json';
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(body !== undefined),
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      const error: ApiError = (payload as { error?: ApiError }).error ?? {
        code: `HTTP_${response.status}`,
        message: response.statusText,
      };
      throw new RequestFailed(response.status, error);
    }
    return payload as T;
  }

  health(): Promise<Health> {
    return this.request('GET', '/health');
  }

  // rules

  getRules(version?: number): Promise<RuleSetDocument> {
    const suffix = version === undefined ? '' : `?version=${version}`;
    return this.request('GET', `/rules${suffix}`);
  }

  putRules(document: Omit<RuleSetDocument, 'version'> & { version?: number }): Promise<PutRulesResult> {
    return this.request('PUT', '/rules', document);
  }

  validateRules(document: unknown): Promise<ValidateResult> {
    return this.request('POST', '/rules/validate', document);
  }

  lintRules(document: unknown): Promise<{ warnings: LintWarning[] }> {
    return this.request('POST', '/rules/lint', document);
  }

  // context

  getContext(): Promise<ContextState> {
    return this.request('GET', '/context');
  }

  setSignal(key: string, value: boolean | number | string): Promise<ContextState> {
    return this.request('PUT', `/context/signals/${encodeURIComponent(key)}`, { value });
  }

  // traces

  queryTraces(filter: TraceFilter = {}): Promise<TracePage> {
    const params = new URLSearchParams();
    for (const [key, value] of Object.entries(filter)) {
      if (value !== undefined && value !== '') params.set(key, String(value));
    }
    const qs = params.toString();
    return this.request('GET', `/traces${qs ? `?${qs}` : ''}`);
  }

  verifyChain(): Promise<VerificationReport> {
    return this.request('GET', '/traces/verify');
  }

  // escalations

  listEscalations(status?: string): Promise<{ escalations: PendingEscalation[] }> {
    const suffix = status ? `?status=${encodeURIComponent(status)}` : '';
    return this.request('GET', `/escalations${suffix}`);
  }

  resolveEscalation(
    escalationId: string,
    verdict: 'APPROVED' | 'DENIED',
    operatorId: string,
    note: string,
  ): Promise<PendingEscalation> {
    return this.request('POST', `/escalations/${encodeURIComponent(escalationId)}/resolve`, {
      verdict,
      operator_id: operatorId,
      note,
    });
  }

  // events (long-poll; the push stream lives in sse.ts)

  pollEvents(cursor: number, waitS = 0): Promise<{ events: { seq: number; event: string; payload: unknown }[]; cursor: number }> {
    return this.request('GET', `/events/poll?cursor=${cursor}&wait_s=${waitS}`);
  }

  eventAuthHeaders(): Record<string, string> {
    return this.headers();
  }
}
