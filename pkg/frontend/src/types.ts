// Wire types for the governance server's HTTP surface (docs/api.md).

export type Outcome = 'PROCEED' | 'SELF_CORRECT' | 'ESCALATE';
export type TriggerKind = 'PROHIBITED' | 'IRREVERSIBLE' | 'UNCERTAIN';
export type EscalationStatus = 'PENDING' | 'APPROVED' | 'DENIED' | 'EXPIRED';
export type Layer = 'GLOBAL' | 'WORKFLOW' | 'AGENT' | 'SITUATIONAL';
export type Modality = 'FORBID' | 'REQUIRE_APPROVAL' | 'READ_ONLY' | 'ALLOW';

export interface Comparison {
  key: string;
  op: 'EQ' | 'NE' | 'GT' | 'GTE' | 'LT' | 'LTE' | 'IN';
  value: unknown;
}

export interface MachineConstraint {
  action_classes: string[];
  modality: Modality;
  condition: Comparison[];
}

export interface Rule {
  id: string;
  layer: Layer;
  scope: { workflow_ids: string[]; agent_ids: string[] };
  text: string;
  rationale: string;
  constraint?: MachineConstraint;
  predicate?: { conjuncts: Comparison[] };
  enabled: boolean;
}

export interface RuleSetDocument {
  version: number;
  metadata: Record<string, unknown>;
  rules: Rule[];
}

export interface Violation {
  code: string;
  rule_id: string | null;
  message: string;
}

export interface ValidateResult {
  valid: boolean;
  error?: string;
  violations: Violation[];
}

export interface LintWarning {
  code: string;
  rule_id: string;
  message: string;
}

export interface PutRulesResult {
  activated: boolean;
  version: number;
  warning?: string;
}

export interface IntentDescriptor {
  intent_id: string;
  agent_id: string;
  workflow_id: string;
  action_class: string;
  description: string;
  parameters: Record<string, unknown>;
  irreversible: boolean;
  alternatives: Record<string, unknown>[];
  approval_tokens: Record<string, string>;
}

export interface EscalationMessage {
  intent_summary: string;
  triggering_rule_ids: string[];
  reasoning: string;
  trigger_kind: TriggerKind;
}

export interface ApprovalToken {
  rule_id: string;
  token: string;
  expires_at_ns: number;
}

export interface PendingEscalation {
  escalation_id: string;
  message: EscalationMessage;
  intent: IntentDescriptor;
  created_at_ns: number;
  status: EscalationStatus;
  resolver: string;
  note: string;
  approval_tokens: ApprovalToken[];
}

export interface TraceRecord {
  trace_id: string;
  timestamp_ns: number;
  agent_id: string;
  workflow_id: string;
  intent: IntentDescriptor;
  rules_retrieved: string[];
  ruleset_version: number;
  rules_cited: string[];
  reasoning: string;
  decision: Outcome;
  round_index: number;
  deliberator_name: string;
  prompt_template_version: string;
  prev_hash: string;
  record_hash: string;
}

export interface TracePage {
  traces: TraceRecord[];
  next_cursor: { after_ts: number; after_id: string } | null;
}

export interface VerificationReport {
  ok: boolean;
  records_checked: number;
  first_mismatch_index: number | null;
  first_mismatch_trace_id: string | null;
  message: string;
}

export interface ContextState {
  signals: Record<string, boolean | number | string>;
  registries: Record<string, string[]>;
}

export interface Health {
  status: string;
  ruleset_version: number;
  rule_count: number;
  deliberator: { name: string; status: 'OK' | 'DEGRADED' };
  chain: 'OK' | 'BROKEN';
  records: number;
  pending_escalations: number;
  time: string;
}

export interface ServerEvent {
  seq: number;
  event: string;
  payload: Record<string, unknown>;
}

export interface ApiError {
  code: string;
  message: string;
  violations?: Violation[];
}
