// Console shell: tabbed layout over the four panels, plus a health strip.

import { Api } from './api.js';
import { clear, el } from './dom.js';
import { EscalationInbox } from './inbox.js';
import { RuleEditor } from './rules.js';
import { SignalsPanel } from './signals.js';
import { TraceBrowser } from './traces.js';

interface ConsoleOptions {
  baseUrl?: string;
  operatorToken?: string | null;
  operatorId?: string;
}

export function mountConsole(root: HTMLElement, options: ConsoleOptions = {}): () => void {
  const api = new Api(
    options.baseUrl ?? '',
    options.operatorToken ?? window.localStorage.getItem('gov_operator_token'),
  );
  const operatorId = options.operatorId ?? 'console-operator';

  clear(root);
  const health = el('div', { class: 'health-strip', 'data-testid': 'health' });
  const nav = el('nav', { class: 'tabs' });
  const panel = el('main', { class: 'panel' });
  root.append(el('h1', {}, ['Governance console']), health, nav, panel);

  const inbox = new EscalationInbox(panel, api, operatorId);
  let stopActive: (() => void) | null = null;

  const tabs: Record<string, () => Promise<void>> = {
    Escalations: async () => {
      stopActive = () => inbox.stop();
      await inbox.start();
    },
    Rules: async () => {
      stopActive = null;
      await new RuleEditor(panel, api).start();
    },
    Traces: async () => {
      stopActive = null;
      await new TraceBrowser(panel, api).start();
    },
    Context: async () => {
      stopActive = null;
      await new SignalsPanel(panel, api).start();
    },
  };

  for (const name of Object.keys(tabs)) {
    const button = el('button', { 'data-testid': `tab-${name.toLowerCase()}` }, [name]);
    button.addEventListener('click', () => {
      stopActive?.();
      clear(panel);
      void tabs[name]?.();
    });
    nav.append(button);
  }

  void (async () => {
    try {
      const status = await api.health();
      health.textContent =
        `rules v${status.ruleset_version} (${status.rule_count} rules) · ` +
        `deliberator ${status.deliberator.name}: ${status.deliberator.status} · chain ${status.chain}`;
    } catch {
      health.textContent = 'server unreachable';
    }
    await tabs['Escalations']?.();
  })();

  return () => inbox.stop();
}
