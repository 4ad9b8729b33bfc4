// Context panel: boolean signal toggles (e.g. the supplier-disruption
// flag) and registry membership, all round-tripped through the API.

import { Api } from './api.js';
import { clear, el, toast } from './dom.js';
import type { ContextState } from './types.js';

export class SignalsPanel {
  private state: ContextState = { signals: {}, registries: {} };

  constructor(
    private readonly container: HTMLElement,
    private readonly api: Api,
  ) {}

  async start(): Promise<void> {
    this.state = await this.api.getContext();
    this.render();
  }

  private render(): void {
    clear(this.container);
    this.container.append(el('h2', {}, ['Runtime context']));

    const signals = el('div', { class: 'signals', 'data-testid': 'signals' });
    for (const [key, value] of Object.entries(this.state.signals)) {
      if (typeof value === 'boolean') {
        const toggle = el('input', { type: 'checkbox', 'data-testid': `signal-${key}` });
        (toggle as HTMLInputElement).checked = value;
        toggle.addEventListener('change', () => void this.flip(key, (toggle as HTMLInputElement).checked));
        signals.append(el('label', { class: 'signal' }, [toggle, ` ${key}`]));
      } else {
        signals.append(el('p', { class: 'signal muted' }, [`${key} = ${String(value)}`]));
      }
    }
    this.container.append(signals);

    const registries = el('div', { class: 'registries' });
    for (const [name, members] of Object.entries(this.state.registries)) {
      registries.append(
        el('div', {}, [
          el('h4', {}, [name]),
          el('p', { class: 'muted', 'data-testid': `registry-${name}` }, [members.join(', ') || '(empty)']),
        ]),
      );
    }
    this.container.append(registries);
  }

  private async flip(key: string, value: boolean): Promise<void> {
    try {
      this.state = await this.api.setSignal(key, value);
      toast(`${key} set to ${value}`);
    } catch (err) {
      toast(err instanceof Error ? err.message : String(err), 'error');
    }
    this.render();
  }
}
