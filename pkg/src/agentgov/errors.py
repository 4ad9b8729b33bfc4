"""Exception types shared across the governance engine.

Each class carries a stable ``code`` string that the API layer maps onto
wire-level error payloads.
"""

from __future__ import annotations


class GovernanceError(Exception):
    """Base class for every error raised by this package."""

    code = "GOVERNANCE_ERROR"


class RulesetParseError(GovernanceError):
    """Rule-set bytes are not a well-formed document."""

    code = "PARSE_ERROR"


class RulesetSchemaError(GovernanceError):
    """Rule-set document violates one or more structural invariants."""

    code = "SCHEMA_ERROR"

    def __init__(self, violations) -> None:
        self.violations = list(violations)
        offenders = ", ".join(sorted({v.rule_id for v in self.violations if v.rule_id}))
        detail = "; ".join(v.code for v in self.violations)
        super().__init__(f"invalid rule set ({offenders or 'document'}): {detail}")


class VersionConflictError(GovernanceError):
    """Submitted rule-set version does not directly follow the active one."""

    code = "VERSION_CONFLICT"


class PredicateTypeError(GovernanceError):
    """Ordered comparison applied to incompatible value kinds.

    Signals a rule-authoring bug, not a runtime condition.
    """

    code = "TYPE_MISMATCH"


class ReplyParseError(GovernanceError):
    """Model reply did not contain a usable structured decision."""

    code = "PARSE_FAILURE"

    def __init__(self, message: str, reply: str = "") -> None:
        super().__init__(message)
        self.reply = reply


class DeliberatorFailure(GovernanceError):
    """Deliberation backend failed: timeout, transport, or unparseable output."""

    code = "DELIBERATOR_FAILURE"

    def __init__(self, kind: str, message: str, reply: str = "") -> None:
        super().__init__(f"{kind}: {message}")
        self.kind = kind
        self.reply = reply


class AuditStorageError(GovernanceError):
    """Trace log append could not be made durable."""

    code = "STORAGE_FAILURE"


class GovernanceHaltError(GovernanceError):
    """Evaluation aborted because the audit trail could not be written.

    Governance without audit is a hard failure: no decision is returned, so
    no caller can treat the intent as approved.
    """

    code = "AUDIT_HALT"


class MissingRuleCitationError(GovernanceError):
    """Escalation built from a rule-grounded verdict that cites no rule."""

    code = "MISSING_RULE_CITATION"


class EscalationNotFoundError(GovernanceError):
    code = "NOT_FOUND"


class AlreadyResolvedError(GovernanceError):
    code = "ALREADY_RESOLVED"


class UnauthorizedError(GovernanceError):
    code = "UNAUTHORIZED"


class ConfigError(GovernanceError):
    code = "CONFIG_ERROR"
