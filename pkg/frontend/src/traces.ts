// Trace browser: filterable table over the reasoning-trace log, a chain
// verification indicator, and a per-run timeline that groups the rounds
// of one intent (the self-correction lineage reads top to bottom).

import { Api } from './api.js';
import { clear, el, formatNs } from './dom.js';
import type { TraceRecord, VerificationReport } from './types.js';

const DECISIONS = ['', 'PROCEED', 'SELF-CORRECT', 'ESCALATE'] as const;

export class TraceBrowser {
  private traces: TraceRecord[] = [];
  private verification: VerificationReport | null = null;
  private decisionFilter = '';
  private agentFilter = '';

  constructor(
    private readonly container: HTMLElement,
    private readonly api: Api,
  ) {}

  async start(): Promise<void> {
    await this.refresh();
  }

  async refresh(): Promise<void> {
    const page = await this.api.queryTraces({
      decision: this.decisionFilter || undefined,
      agent_id: this.agentFilter || undefined,
      limit: 200,
    });
    this.traces = page.traces;
    this.render();
  }

  private async verify(): Promise<void> {
    this.verification = await this.api.verifyChain();
    this.render();
  }

  private render(): void {
    clear(this.container);
    this.container.append(el('h2', {}, ['Reasoning traces']));

    // filter bar
    const decision = el('select', { 'data-testid': 'filter-decision' });
    for (const token of DECISIONS) {
      const option = el('option', { value: token }, [token || '(any decision)']);
      if (token === this.decisionFilter) option.setAttribute('selected', 'true');
      decision.append(option);
    }
    decision.addEventListener('change', () => {
      this.decisionFilter = decision.value;
      void this.refresh();
    });
    const agent = el('input', {
      type: 'text',
      placeholder: 'agent id',
      value: this.agentFilter,
      'data-testid': 'filter-agent',
    });
    agent.addEventListener('change', () => {
      this.agentFilter = agent.value.trim();
      void this.refresh();
    });
    const verifyButton = el('button', { 'data-testid': 'verify' }, ['Verify chain']);
    verifyButton.addEventListener('click', () => void this.verify());
    this.container.append(el('div', { class: 'filter-bar' }, [decision, agent, verifyButton, this.badge()]));

    // table
    const table = el('table', { class: 'trace-table', 'data-testid': 'trace-table' });
    table.append(
      el('thead', {}, [
        el('tr', {}, ['trace', 'time', 'agent', 'round', 'decision', 'cited'].map((h) => el('th', {}, [h]))),
      ]),
    );
    const body = el('tbody');
    for (const trace of this.traces) {
      const row = el('tr', { 'data-testid': `trace-${trace.trace_id}`, 'data-decision': trace.decision });
      row.append(
        el('td', {}, [trace.trace_id]),
        el('td', {}, [formatNs(trace.timestamp_ns)]),
        el('td', {}, [trace.agent_id]),
        el('td', {}, [String(trace.round_index)]),
        el('td', { class: `decision-${trace.decision.toLowerCase()}` }, [trace.decision]),
        el('td', {}, [trace.rules_cited.join(', ')]),
      );
      body.append(row);
    }
    table.append(body);
    this.container.append(table);

    // per-run timeline: group rounds by intent id
    const groups = new Map<string, TraceRecord[]>();
    for (const trace of this.traces) {
      const key = trace.intent.intent_id;
      const bucket = groups.get(key) ?? [];
      bucket.push(trace);
      groups.set(key, bucket);
    }
    const timeline = el('section', { class: 'timeline', 'data-testid': 'timeline' }, [
      el('h3', {}, ['Runs (rounds grouped by intent)']),
    ]);
    for (const [intentId, rounds] of groups) {
      if (rounds.length < 2) continue; // single-round runs read fine from the table
      const sorted = [...rounds].sort((a, b) => a.round_index - b.round_index);
      const steps = el('ol', { 'data-testid': `run-${intentId}` });
      for (const round of sorted) {
        steps.append(
          el('li', {}, [
            `round ${round.round_index}: ${round.decision}`,
            round.rules_cited.length ? ` (cites ${round.rules_cited.join(', ')})` : '',
          ]),
        );
      }
      timeline.append(el('div', { class: 'run' }, [el('strong', {}, [intentId]), steps]));
    }
    this.container.append(timeline);
  }

  private badge(): HTMLElement {
    if (!this.verification) {
      return el('span', { class: 'chain-badge unknown', 'data-testid': 'chain-badge' }, ['chain: unverified']);
    }
    if (this.verification.ok) {
      return el('span', { class: 'chain-badge ok', 'data-testid': 'chain-badge' }, [
        `chain: OK (${this.verification.records_checked} records)`,
      ]);
    }
    return el('span', { class: 'chain-badge broken', 'data-testid': 'chain-badge' }, [
      `chain: MISMATCH at index ${this.verification.first_mismatch_index}`,
    ]);
  }
}
