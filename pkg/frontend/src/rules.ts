// Rule editor: structured form fields per rule, validate-before-save,
// inline violations next to the offending rule, and a version diff view.
//
// The server is the arbiter: saving submits the document for validation
// and activation; the editor never mutates local state on its own.

import { Api, RequestFailed } from './api.js';
import { clear, el, toast } from './dom.js';
import type { Rule, RuleSetDocument, Violation } from './types.js';

const LAYERS = ['GLOBAL', 'WORKFLOW', 'AGENT', 'SITUATIONAL'] as const;

interface RuleFormState {
  rule: Rule;
  constraintText: string;
  predicateText: string;
  parseError: string;
}

export class RuleEditor {
  private doc: RuleSetDocument | null = null;
  private forms: RuleFormState[] = [];
  private violations: Violation[] = [];
  private banner = '';

  constructor(
    private readonly container: HTMLElement,
    private readonly api: Api,
  ) {}

  async start(): Promise<void> {
    this.doc = await this.api.getRules();
    this.forms = this.doc.rules.map((rule) => ({
      rule: structuredClone(rule),
      constraintText: rule.constraint ? JSON.stringify(rule.constraint, null, 2) : '',
      predicateText: rule.predicate ? JSON.stringify(rule.predicate, null, 2) : '',
      parseError: '',
    }));
    this.render();
  }

  private assembled(): { document: Record<string, unknown>; parseFailures: boolean } {
    let parseFailures = false;
    const rules = this.forms.map((form) => {
      const body: Record<string, unknown> = {
        id: form.rule.id,
        layer: form.rule.layer,
        scope: form.rule.scope,
        text: form.rule.text,
        rationale: form.rule.rationale,
        enabled: form.rule.enabled,
      };
      form.parseError = '';
      try {
        if (form.constraintText.trim()) body['constraint'] = JSON.parse(form.constraintText);
        if (form.predicateText.trim()) body['predicate'] = JSON.parse(form.predicateText);
      } catch (err) {
        form.parseError = `not valid JSON: ${err instanceof Error ? err.message : String(err)}`;
        parseFailures = true;
      }
      return body;
    });
    return {
      document: { metadata: this.doc?.metadata ?? {}, rules },
      parseFailures,
    };
  }

  private violationsFor(ruleId: string): Violation[] {
    return this.violations.filter((v) => v.rule_id === ruleId);
  }

  private async validate(): Promise<boolean> {
    const { document, parseFailures } = this.assembled();
    if (parseFailures) {
      this.banner = 'fix the JSON fields marked below';
      this.render();
      return false;
    }
    const result = await this.api.validateRules(document);
    this.violations = result.violations;
    this.banner = result.valid ? 'document is valid' : `SCHEMA_ERROR: ${result.violations.length} violation(s)`;
    this.render();
    return result.valid;
  }

  private async save(): Promise<void> {
    if (!(await this.validate())) return;
    const { document } = this.assembled();
    try {
      const result = await this.api.putRules(document as never);
      if (!result.activated) {
        this.banner = result.warning ?? 'no changes; version unchanged';
        toast(this.banner);
      } else {
        this.banner = `version ${result.version} active`;
        toast(this.banner);
        await this.start();
        return;
      }
    } catch (err) {
      if (err instanceof RequestFailed) {
        this.violations = err.error.violations ?? [];
        this.banner = `${err.error.code}: ${err.error.message}`;
      } else {
        this.banner = err instanceof Error ? err.message : String(err);
      }
    }
    this.render();
  }

  private async diff(versionA: number, versionB: number): Promise<void> {
    const [docA, docB] = await Promise.all([this.api.getRules(versionA), this.api.getRules(versionB)]);
    const byIdA = new Map(docA.rules.map((r) => [r.id, r]));
    const byIdB = new Map(docB.rules.map((r) => [r.id, r]));
    const lines: string[] = [];
    for (const [id, ruleB] of byIdB) {
      const ruleA = byIdA.get(id);
      if (!ruleA) lines.push(`+ ${id} added`);
      else if (JSON.stringify(ruleA) !== JSON.stringify(ruleB)) lines.push(`~ ${id} changed`);
    }
    for (const id of byIdA.keys()) {
      if (!byIdB.has(id)) lines.push(`- ${id} removed`);
    }
    const target = this.container.querySelector('[data-testid="diff-output"]');
    if (target) {
      target.textContent = lines.length
        ? `v${versionA} → v${versionB}\n${lines.join('\n')}`
        : `v${versionA} → v${versionB}\n(no rule changes)`;
    }
  }

  private render(): void {
    clear(this.container);
    if (!this.doc) return;
    this.container.append(
      el('h2', {}, [`Rule set — version ${this.doc.version}`]),
      el('p', { class: 'banner', 'data-testid': 'editor-banner' }, [this.banner]),
    );

    const list = el('div', { class: 'rule-forms' });
    for (const form of this.forms) list.append(this.ruleForm(form));
    this.container.append(list);

    const validateButton = el('button', { 'data-testid': 'validate' }, ['Validate']);
    validateButton.addEventListener('click', () => void this.validate());
    const saveButton = el('button', { 'data-testid': 'save' }, ['Save as new version']);
    saveButton.addEventListener('click', () => void this.save());
    this.container.append(el('footer', { class: 'editor-actions' }, [validateButton, saveButton]));

    // version diff
    const from = el('input', { type: 'number', value: '1', 'data-testid': 'diff-from' });
    const to = el('input', { type: 'number', value: String(this.doc.version), 'data-testid': 'diff-to' });
    const diffButton = el('button', { 'data-testid': 'diff' }, ['Diff versions']);
    diffButton.addEventListener('click', () => void this.diff(Number(from.value), Number(to.value)));
    this.container.append(
      el('section', { class: 'diff' }, [
        el('h3', {}, ['Compare versions']),
        from,
        to,
        diffButton,
        el('pre', { 'data-testid': 'diff-output' }),
      ]),
    );
  }

  private ruleForm(form: RuleFormState): HTMLElement {
    const rule = form.rule;
    const section = el('section', { class: 'card rule-form', 'data-testid': `rule-${rule.id}` });
    const problems = this.violationsFor(rule.id);

    section.append(
      el('header', {}, [
        el('strong', {}, [rule.id]),
        el('span', { class: 'badge' }, [rule.layer]),
      ]),
    );
    if (form.parseError) {
      section.append(el('p', { class: 'inline-error', 'data-testid': `parse-error-${rule.id}` }, [form.parseError]));
    }
    for (const violation of problems) {
      section.append(
        el('p', { class: 'inline-error', 'data-testid': `violation-${rule.id}` }, [
          `${violation.code}: ${violation.message}`,
        ]),
      );
    }

    const layer = el('select', { 'data-testid': `layer-${rule.id}` });
    for (const name of LAYERS) {
      const option = el('option', { value: name }, [name]);
      if (name === rule.layer) option.setAttribute('selected', 'true');
      layer.append(option);
    }
    layer.addEventListener('change', () => {
      rule.layer = layer.value as Rule['layer'];
    });

    const text = el('textarea', { 'data-testid': `text-${rule.id}`, rows: '2' }, [rule.text]);
    text.addEventListener('input', () => (rule.text = text.value));
    const rationale = el('textarea', { 'data-testid': `rationale-${rule.id}`, rows: '2' }, [rule.rationale]);
    rationale.addEventListener('input', () => (rule.rationale = rationale.value));

    const workflows = el('input', {
      type: 'text',
      value: rule.scope.workflow_ids.join(', '),
      'data-testid': `workflows-${rule.id}`,
    });
    workflows.addEventListener('input', () => {
      rule.scope.workflow_ids = splitIds(workflows.value);
    });
    const agents = el('input', {
      type: 'text',
      value: rule.scope.agent_ids.join(', '),
      'data-testid': `agents-${rule.id}`,
    });
    agents.addEventListener('input', () => {
      rule.scope.agent_ids = splitIds(agents.value);
    });

    const constraint = el('textarea', { 'data-testid': `constraint-${rule.id}`, rows: '4' }, [form.constraintText]);
    constraint.addEventListener('input', () => (form.constraintText = constraint.value));
    const predicate = el('textarea', { 'data-testid': `predicate-${rule.id}`, rows: '3' }, [form.predicateText]);
    predicate.addEventListener('input', () => (form.predicateText = predicate.value));

    const enabled = el('input', { type: 'checkbox', 'data-testid': `enabled-${rule.id}` });
    (enabled as HTMLInputElement).checked = rule.enabled;
    enabled.addEventListener('change', () => (rule.enabled = (enabled as HTMLInputElement).checked));

    section.append(
      field('Layer', layer),
      field('Text', text),
      field('Rationale', rationale),
      field('Workflow scope (comma-separated, empty = all)', workflows),
      field('Agent scope (comma-separated, empty = all)', agents),
      field('Machine constraint (JSON, optional)', constraint),
      field('Activation predicate (JSON, situational only)', predicate),
      field('Enabled', enabled),
    );
    return section;
  }
}

function field(label: string, control: HTMLElement): HTMLElement {
  return el('label', { class: 'field' }, [el('span', {}, [label]), control]);
}

function splitIds(value: string): string[] {
  return value
    .split(',')
    .map((part) => part.trim())
    .filter((part) => part.length > 0);
}
