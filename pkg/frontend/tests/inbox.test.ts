// Escalation inbox against the recorded mock server: live card arrival,
// rule drill-down, mandatory note, idempotent resolution.

import { afterEach, beforeEach, describe, expect, it } from 'vitest';

import { Api } from '../src/api.js';
import { EscalationInbox } from '../src/inbox.js';
import { startMockServer, type MockServer } from './mock_server.js';
import { container, waitFor } from './helpers.js';

let mock: MockServer;
let inbox: EscalationInbox;
let root: HTMLElement;

beforeEach(async () => {
  mock = await startMockServer();
  root = container();
  inbox = new EscalationInbox(root, new Api(mock.baseUrl), 'test-operator');
  await inbox.start();
});

afterEach(async () => {
  inbox.stop();
  await new Promise((resolve) => setTimeout(resolve, 10)); // let the stream loop observe the flag
  await mock.close();
  document.body.innerHTML = '';
});

describe('escalation inbox', () => {
  it('shows an empty state when nothing is pending', () => {
    expect(root.querySelector('[data-testid="inbox-empty"]')).not.toBeNull();
  });

  it('renders the S2 card within 2s of enqueue via the event stream', async () => {
    const beforeEnqueue = Date.now();
    mock.enqueueS2();
    const elapsed = await waitFor(
      () => root.querySelector('[data-testid="escalation-esc-000001"]') !== null,
      2000,
      'S2 card',
    );
    expect(Date.now() - beforeEnqueue).toBeLessThan(2000);
    expect(elapsed).toBeLessThan(2000);

    const card = root.querySelector('[data-testid="escalation-esc-000001"]')!;
    expect(card.textContent).toContain('R1');
    expect(card.textContent).toContain('R3');
    // drill-down resolves rule text and rationale from the rule set
    expect(card.querySelector('[data-rule="R1"]')!.textContent).toContain('irreversible action');
    expect(card.querySelector('[data-rule="R3"]')!.textContent).toContain('financial risk');
    expect(card.textContent).toContain('$45,000');
  });

  it('requires a note before resolving', async () => {
    mock.enqueueS2();
    await waitFor(() => root.querySelector('[data-testid="approve"]') !== null, 2000, 'approve button');
    (root.querySelector('[data-testid="approve"]') as HTMLButtonElement).click();
    await waitFor(
      () => (root.querySelector('[data-testid="note-error"]')?.textContent ?? '') !== '',
      1000,
      'note error',
    );
    expect(mock.requests.filter((r) => r.includes('/resolve'))).toHaveLength(0);
  });

  it('approve round-trips: card moves to resolved with tokens visible', async () => {
    mock.enqueueS2();
    await waitFor(() => root.querySelector('[data-testid="approve"]') !== null, 2000, 'card');
    const note = root.querySelector('[data-testid="note-input"]') as HTMLInputElement;
    note.value = 'budget confirmed';
    (root.querySelector('[data-testid="approve"]') as HTMLButtonElement).click();
    await waitFor(
      () =>
        root
          .querySelector('[data-testid="escalation-esc-000001"]')
          ?.getAttribute('data-status') === 'APPROVED',
      2000,
      'approved status',
    );
    const tokens = root.querySelector('[data-testid="tokens"]')!;
    expect(tokens.textContent).toContain('R1');
    expect(tokens.textContent).toContain('R3');
  });

  it('deny round-trips and updates status', async () => {
    mock.enqueueS2();
    await waitFor(() => root.querySelector('[data-testid="deny"]') !== null, 2000, 'card');
    const note = root.querySelector('[data-testid="note-input"]') as HTMLInputElement;
    note.value = 'not this quarter';
    (root.querySelector('[data-testid="deny"]') as HTMLButtonElement).click();
    await waitFor(
      () =>
        root
          .querySelector('[data-testid="escalation-esc-000001"]')
          ?.getAttribute('data-status') === 'DENIED',
      2000,
      'denied status',
    );
  });

  it('is double-click safe: one resolve request, second refusal is graceful', async () => {
    mock.enqueueS2();
    await waitFor(() => root.querySelector('[data-testid="approve"]') !== null, 2000, 'card');
    const note = root.querySelector('[data-testid="note-input"]') as HTMLInputElement;
    note.value = 'double click test';
    const approve = root.querySelector('[data-testid="approve"]') as HTMLButtonElement;
    approve.click();
    approve.click(); // in-flight guard swallows the second click
    await waitFor(
      () =>
        root
          .querySelector('[data-testid="escalation-esc-000001"]')
          ?.getAttribute('data-status') === 'APPROVED',
      2000,
      'approved status',
    );
    expect(mock.requests.filter((r) => r.includes('/resolve'))).toHaveLength(1);
  });
});
