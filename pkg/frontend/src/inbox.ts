// Escalation inbox: live list of suspended intents awaiting review.
//
// Cards arrive through the event stream (polling fallback inside
// EventSubscription); approve/deny requires a note and is double-click
// safe — a second resolution attempt surfaces ALREADY_RESOLVED as a
// toast instead of an error state.

import { Api, RequestFailed } from './api.js';
import { clear, el, formatNs, toast } from './dom.js';
import { EventSubscription } from './sse.js';
import type { PendingEscalation, Rule } from './types.js';

export class EscalationInbox {
  private items: PendingEscalation[] = [];
  private rulesById = new Map<string, Rule>();
  private subscription: EventSubscription | null = null;
  private inFlight = new Set<string>();

  constructor(
    private readonly container: HTMLElement,
    private readonly api: Api,
    private readonly operatorId: string,
  ) {}

  async start(): Promise<void> {
    const doc = await this.api.getRules().catch(() => null);
    if (doc) this.rulesById = new Map(doc.rules.map((r) => [r.id, r]));
    const listing = await this.api.listEscalations();
    this.items = listing.escalations;
    this.render();
    this.subscription = new EventSubscription(this.api, (event) => {
      if (event.event === 'escalation.pending' || event.event === 'escalation.resolved' || event.event === 'escalation.expired') {
        this.upsert(event.payload as unknown as PendingEscalation);
      }
    });
    this.subscription.start();
  }

  stop(): void {
    this.subscription?.stop();
  }

  private upsert(item: PendingEscalation): void {
    const index = this.items.findIndex((existing) => existing.escalation_id === item.escalation_id);
    if (index === -1) this.items.push(item);
    else this.items[index] = item;
    this.render();
  }

  private render(): void {
    clear(this.container);
    const pending = this.items.filter((i) => i.status === 'PENDING');
    const resolved = this.items.filter((i) => i.status !== 'PENDING');
    this.container.append(
      el('h2', {}, [`Escalation inbox (${pending.length} pending)`]),
    );
    if (pending.length === 0) {
      this.container.append(
        el('p', { class: 'empty-state', 'data-testid': 'inbox-empty' }, [
          'No pending escalations. Suspended intents will appear here live.',
        ]),
      );
    }
    const list = el('div', { class: 'card-list', 'data-testid': 'inbox-list' });
    for (const item of pending) list.append(this.card(item));
    for (const item of resolved) list.append(this.card(item));
    this.container.append(list);
  }

  private card(item: PendingEscalation): HTMLElement {
    const message = item.message;
    const card = el('article', {
      class: `card escalation-card status-${item.status.toLowerCase()}`,
      'data-testid': `escalation-${item.escalation_id}`,
      'data-status': item.status,
    });
    card.append(
      el('header', {}, [
        el('span', { class: 'badge' }, [message.trigger_kind]),
        el('strong', {}, [item.escalation_id]),
        el('span', { class: 'muted' }, [` ${item.intent.agent_id} · ${formatNs(item.created_at_ns)}`]),
        el('span', { class: `status status-${item.status.toLowerCase()}` }, [item.status]),
      ]),
      el('p', { class: 'summary' }, [message.intent_summary]),
    );

    const rules = el('ul', { class: 'rule-refs' });
    for (const ruleId of message.triggering_rule_ids) {
      const rule = this.rulesById.get(ruleId);
      rules.append(
        el('li', { 'data-rule': ruleId }, [
          el('strong', {}, [ruleId]),
          rule ? ` ${rule.text}` : ' (rule text unavailable)',
          rule && rule.rationale ? el('em', { class: 'muted' }, [` — ${rule.rationale}`]) : '',
        ]),
      );
    }
    card.append(el('div', {}, [el('h4', {}, ['Triggering rules']), rules]));

    const reasoning = el('details', {}, [
      el('summary', {}, ['Permissibility reasoning']),
      el('pre', { class: 'reasoning' }, [message.reasoning]),
    ]);
    card.append(reasoning);

    if (item.status === 'PENDING') {
      card.append(this.resolutionForm(item));
    } else {
      if (item.note) card.append(el('p', { class: 'muted' }, [`${item.resolver}: ${item.note}`]));
      if (item.approval_tokens.length > 0) {
        const tokens = el('ul', { class: 'tokens', 'data-testid': 'tokens' });
        for (const token of item.approval_tokens) {
          tokens.append(el('li', {}, [el('code', {}, [`${token.rule_id}: ${token.token}`])]));
        }
        card.append(el('div', {}, [el('h4', {}, ['Approval tokens']), tokens]));
      }
    }
    return card;
  }

  private resolutionForm(item: PendingEscalation): HTMLElement {
    const note = el('input', {
      type: 'text',
      placeholder: 'Resolution note (required)',
      'data-testid': 'note-input',
    });
    const error = el('span', { class: 'inline-error', 'data-testid': 'note-error' });
    const approve = el('button', { class: 'approve', 'data-testid': 'approve' }, ['Approve']);
    const deny = el('button', { class: 'deny', 'data-testid': 'deny' }, ['Deny']);

    const submit = async (verdict: 'APPROVED' | 'DENIED') => {
      if (!note.value.trim()) {
        error.textContent = 'a note is mandatory';
        return;
      }
      if (this.inFlight.has(item.escalation_id)) return; // double-click guard
      this.inFlight.add(item.escalation_id);
      approve.setAttribute('disabled', 'true');
      deny.setAttribute('disabled', 'true');
      try {
        const resolved = await this.api.resolveEscalation(
          item.escalation_id,
          verdict,
          this.operatorId,
          note.value.trim(),
        );
        this.upsert(resolved);
        toast(`${item.escalation_id} ${resolved.status.toLowerCase()}`);
      } catch (err) {
        if (err instanceof RequestFailed && err.error.code === 'ALREADY_RESOLVED') {
          toast(`${item.escalation_id} was already resolved`, 'info');
          const listing = await this.api.listEscalations();
          this.items = listing.escalations;
          this.render();
        } else {
          toast(err instanceof Error ? err.message : String(err), 'error');
          approve.removeAttribute('disabled');
          deny.removeAttribute('disabled');
        }
      } finally {
        this.inFlight.delete(item.escalation_id);
      }
    };

    approve.addEventListener('click', () => void submit('APPROVED'));
    deny.addEventListener('click', () => void submit('DENIED'));
    return el('footer', { class: 'resolution' }, [note, error, approve, deny]);
  }
}
