"""HTTP and JSON-RPC tool surfaces over the governance service.

Two entry points onto the same facade:

* REST-ish HTTP paths for the operator console and workflow clients
  (enumerated in docs/api.md), including a server-sent event stream with
  a long-poll fallback.
* A JSON-RPC 2.0 endpoint at POST /rpc implementing tool discovery
  (``tools/list``) and invocation (``tools/call``), following
  Model Context Protocol conventions so agent frameworks can mount the
  governance server as a tool provider.

Authn: mutation endpoints (rules, context, escalation resolution) require
the operator bearer token; intent evaluation requires the agent token.
Tokens come from the environment; if a token variable is unset, that role
is open (development mode) and a warning is logged at startup.
"""

from __future__ import annotations

import hmac
import json
import logging
import os
import time
from typing import Any

from fastapi import Depends, FastAPI, Header, HTTPException, Query, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse

from .config import ServiceConfig
from .errors import GovernanceError, RulesetSchemaError
from .service import GovernanceService

logger = logging.getLogger("agentgov.server")

_STATUS_BY_CODE = {
    "PARSE_ERROR": 400,
    "SCHEMA_ERROR": 400,
    "VERSION_CONFLICT": 409,
    "TYPE_MISMATCH": 400,
    "CONFIG_ERROR": 400,
    "NOT_FOUND": 404,
    "ALREADY_RESOLVED": 409,
    "UNAUTHORIZED": 401,
    "AUDIT_HALT": 503,
    "STORAGE_FAILURE": 503,
}


def _error_payload(exc: GovernanceError) -> dict:
    payload: dict[str, Any] = {"code": exc.code, "message": str(exc)}
    if isinstance(exc, RulesetSchemaError):
        payload["violations"] = [
            {"code": v.code, "rule_id": v.rule_id, "message": v.message} for v in exc.violations
        ]
    return payload


class _Auth:
    """Constant-time bearer checks for the two credential classes."""

    def __init__(self, operator_token: str | None, agent_token: str | None) -> None:
        self.operator_token = operator_token
        self.agent_token = agent_token
        if operator_token is None:
            logger.warning("operator token variable unset; operator surface is OPEN")
        if agent_token is None:
            logger.warning("agent token variable unset; agent surface is OPEN")

    @staticmethod
    def _bearer(header_value: str | None) -> str | None:
        if header_value and header_value.startswith("Bearer "):
            return header_value[len("Bearer "):]
        return None

    def check(self, role: str, authorization: str | None) -> None:
        if role == "any":
            try:
                self.check("agent", authorization)
                return
            except HTTPException:
                self.check("operator", authorization)
                return
        expected = self.operator_token if role == "operator" else self.agent_token
        if expected is None:
            return
        supplied = self._bearer(authorization)
        if supplied is None or not hmac.compare_digest(supplied, expected):
            raise HTTPException(status_code=401, detail={"code": "UNAUTHORIZED", "message": f"{role} credentials required"})


# ---------------------------------------------------------------------------
# JSON-RPC tool registry

_TOOLS: list[dict] = [
    {"name": "evaluate_intent", "role": "agent", "description": "Run the pre-action governance loop for one intent and return the compliance decision."},
    {"name": "get_applicable_rules", "role": "any", "description": "Retrieve the rules applicable to an agent/workflow under the current context snapshot."},
    {"name": "get_rules", "role": "any", "description": "Fetch a rule-set document (active version by default)."},
    {"name": "put_rules", "role": "operator", "description": "Validate and activate the next rule-set version without restart."},
    {"name": "validate_rules", "role": "operator", "description": "Validate a rule-set document; violations are returned as data."},
    {"name": "lint_rules", "role": "operator", "description": "Advisory style warnings for a rule-set document."},
    {"name": "get_context", "role": "operator", "description": "Current runtime signals and registries."},
    {"name": "set_signal", "role": "operator", "description": "Set one runtime context signal."},
    {"name": "update_registry", "role": "operator", "description": "Replace a named registry's membership."},
    {"name": "query_traces", "role": "operator", "description": "Query the reasoning-trace log with filters and pagination."},
    {"name": "verify_chain", "role": "operator", "description": "Recompute the trace log hash chain and report integrity."},
    {"name": "list_escalations", "role": "operator", "description": "List escalations, optionally by status."},
    {"name": "resolve_escalation", "role": "operator", "description": "Approve or deny a pending escalation; approval mints rule-scoped tokens."},
]

_TOOL_SCHEMAS: dict[str, dict] = {
    "evaluate_intent": {
        "type": "object",
        "properties": {"intent": {"type": "object"}, "backend": {"type": "string"}},
        "required": ["intent"],
    },
    "get_applicable_rules": {
        "type": "object",
        "properties": {"agent_id": {"type": "string"}, "workflow_id": {"type": "string"}},
        "required": ["agent_id", "workflow_id"],
    },
    "get_rules": {"type": "object", "properties": {"version": {"type": "integer"}}},
    "put_rules": {
        "type": "object",
        "properties": {"document": {"type": "object"}, "actor": {"type": "string"}},
        "required": ["document"],
    },
    "validate_rules": {"type": "object", "properties": {"document": {"type": "object"}}, "required": ["document"]},
    "lint_rules": {"type": "object", "properties": {"document": {"type": "object"}, "version": {"type": "integer"}}},
    "get_context": {"type": "object", "properties": {}},
    "set_signal": {
        "type": "object",
        "properties": {"key": {"type": "string"}, "value": {}, "actor": {"type": "string"}},
        "required": ["key", "value"],
    },
    "update_registry": {
        "type": "object",
        "properties": {"name": {"type": "string"}, "members": {"type": "array"}, "actor": {"type": "string"}},
        "required": ["name", "members"],
    },
    "query_traces": {
        "type": "object",
        "properties": {
            "agent_id": {"type": "string"},
            "workflow_id": {"type": "string"},
            "decision": {"type": "string"},
            "rule_id": {"type": "string"},
            "start_ns": {"type": "integer"},
            "end_ns": {"type": "integer"},
            "after_ts": {"type": "integer"},
            "after_id": {"type": "string"},
            "limit": {"type": "integer"},
        },
    },
    "verify_chain": {"type": "object", "properties": {"start": {"type": "integer"}, "end": {"type": "integer"}}},
    "list_escalations": {"type": "object", "properties": {"status": {"type": "string"}}},
    "resolve_escalation": {
        "type": "object",
        "properties": {
            "escalation_id": {"type": "string"},
            "verdict": {"type": "string", "enum": ["APPROVED", "DENIED"]},
            "operator_id": {"type": "string"},
            "note": {"type": "string"},
        },
        "required": ["escalation_id", "verdict", "operator_id"],
    },
}

_TOOL_ROLES = {t["name"]: t["role"] for t in _TOOLS}


def _call_tool(service: GovernanceService, name: str, arguments: dict) -> Any:
    if name == "evaluate_intent":
        return service.evaluate_intent(arguments["intent"], backend=arguments.get("backend"))
    if name == "get_applicable_rules":
        return service.get_applicable_rules(arguments["agent_id"], arguments["workflow_id"])
    if name == "get_rules":
        return service.get_rules(version=arguments.get("version"))
    if name == "put_rules":
        return service.put_rules(arguments["document"], actor=arguments.get("actor", "operator"))
    if name == "validate_rules":
        return service.validate_rules(arguments["document"])
    if name == "lint_rules":
        return service.lint_rules(body=arguments.get("document"), version=arguments.get("version"))
    if name == "get_context":
        return service.get_context()
    if name == "set_signal":
        return service.set_signal(arguments["key"], arguments["value"], actor=arguments.get("actor", "operator"))
    if name == "update_registry":
        return service.update_registry(
            arguments["name"], list(arguments["members"]), actor=arguments.get("actor", "operator")
        )
    if name == "query_traces":
        return service.query_traces(
            agent_id=arguments.get("agent_id"),
            workflow_id=arguments.get("workflow_id"),
            decision=arguments.get("decision"),
            rule_id=arguments.get("rule_id"),
            start_ns=arguments.get("start_ns"),
            end_ns=arguments.get("end_ns"),
            after_ts=arguments.get("after_ts"),
            after_id=arguments.get("after_id"),
            limit=arguments.get("limit"),
        )
    if name == "verify_chain":
        return service.verify_chain(start=arguments.get("start", 0), end=arguments.get("end"))
    if name == "list_escalations":
        return service.list_escalations(status=arguments.get("status"))
    if name == "resolve_escalation":
        return service.resolve_escalation(
            arguments["escalation_id"],
            arguments["verdict"],
            arguments["operator_id"],
            note=arguments.get("note", ""),
        )
    raise KeyError(name)


# ---------------------------------------------------------------------------
# App factory


def build_app(service: GovernanceService, operator_token: str | None = None, agent_token: str | None = None) -> FastAPI:
    app = FastAPI(title="agentgov", version="0.1.0", docs_url=None, redoc_url=None)
    auth = _Auth(operator_token, agent_token)

    def operator(authorization: str | None = Header(default=None)) -> None:
        auth.check("operator", authorization)

    def agent(authorization: str | None = Header(default=None)) -> None:
        auth.check("agent", authorization)

    def any_role(authorization: str | None = Header(default=None)) -> None:
        # endpoints readable by both credential classes
        try:
            auth.check("agent", authorization)
        except HTTPException:
            auth.check("operator", authorization)

    @app.exception_handler(GovernanceError)
    async def governance_error_handler(request: Request, exc: GovernanceError):
        status = _STATUS_BY_CODE.get(exc.code, 400)
        return JSONResponse(status_code=status, content={"error": _error_payload(exc)})

    # -- health --

    @app.get("/health")
    def health():
        return service.health()

    # -- agent surface --

    @app.post("/intents/evaluate", dependencies=[Depends(agent)])
    def evaluate_intent(body: dict):
        return service.evaluate_intent(body.get("intent", body), backend=body.get("backend"))

    @app.get("/rules/applicable", dependencies=[Depends(any_role)])
    def get_applicable(agent_id: str, workflow_id: str):
        return service.get_applicable_rules(agent_id, workflow_id)

    # -- rules --

    @app.get("/rules", dependencies=[Depends(any_role)])
    def get_rules(version: int | None = None):
        return service.get_rules(version=version)

    @app.put("/rules", dependencies=[Depends(operator)])
    def put_rules(body: dict, actor: str = "operator"):
        return service.put_rules(body, actor=actor)

    @app.post("/rules/validate", dependencies=[Depends(operator)])
    def validate_rules(body: dict):
        return service.validate_rules(body)

    @app.post("/rules/lint", dependencies=[Depends(operator)])
    def lint_rules(body: dict | None = None, version: int | None = None):
        return service.lint_rules(body=body, version=version)

    # -- context --

    @app.get("/context", dependencies=[Depends(operator)])
    def get_context():
        return service.get_context()

    @app.put("/context/signals/{key}", dependencies=[Depends(operator)])
    def set_signal(key: str, body: dict, actor: str = "operator"):
        if "value" not in body:
            raise HTTPException(status_code=400, detail={"code": "BAD_REQUEST", "message": "body needs 'value'"})
        try:
            return service.set_signal(key, body["value"], actor=actor)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail={"code": "BAD_REQUEST", "message": str(exc)}) from exc

    @app.put("/context/registries/{name}", dependencies=[Depends(operator)])
    def update_registry(name: str, body: dict, actor: str = "operator"):
        if "members" not in body or not isinstance(body["members"], list):
            raise HTTPException(status_code=400, detail={"code": "BAD_REQUEST", "message": "body needs 'members' list"})
        return service.update_registry(name, body["members"], actor=actor)

    # -- traces --

    @app.get("/traces", dependencies=[Depends(operator)])
    def query_traces(
        agent_id: str | None = None,
        workflow_id: str | None = None,
        decision: str | None = None,
        rule_id: str | None = None,
        start_ns: int | None = None,
        end_ns: int | None = None,
        after_ts: int | None = None,
        after_id: str | None = None,
        limit: int | None = Query(default=None, ge=1, le=1000),
    ):
        return service.query_traces(
            agent_id=agent_id,
            workflow_id=workflow_id,
            decision=decision,
            rule_id=rule_id,
            start_ns=start_ns,
            end_ns=end_ns,
            after_ts=after_ts,
            after_id=after_id,
            limit=limit,
        )

    @app.get("/traces/export", dependencies=[Depends(operator)])
    def export_traces():
        return PlainTextResponse("\n".join(service.export_traces()) + "\n")

    @app.get("/traces/verify", dependencies=[Depends(operator)])
    def verify_chain(start: int = 0, end: int | None = None):
        return service.verify_chain(start=start, end=end)

    # -- escalations --

    @app.get("/escalations", dependencies=[Depends(operator)])
    def list_escalations(status: str | None = None):
        return service.list_escalations(status=status)

    @app.post("/escalations/{escalation_id}/resolve", dependencies=[Depends(operator)])
    def resolve_escalation(escalation_id: str, body: dict):
        verdict = body.get("verdict", "")
        operator_id = body.get("operator_id", "operator")
        note = body.get("note", "")
        if verdict.upper() not in ("APPROVED", "DENIED"):
            raise HTTPException(status_code=400, detail={"code": "BAD_REQUEST", "message": "verdict must be APPROVED or DENIED"})
        if not note.strip():
            raise HTTPException(status_code=400, detail={"code": "BAD_REQUEST", "message": "a resolution note is mandatory"})
        return service.resolve_escalation(escalation_id, verdict, operator_id, note=note)

    # -- events --

    @app.get("/events", dependencies=[Depends(operator)])
    async def event_stream(
        request: Request,
        cursor: int = 0,
        lifetime_s: float = Query(default=300.0, ge=0.1, le=3600.0),
    ):
        # the stream closes itself after lifetime_s; clients reconnect with
        # the last seen id as the cursor (standard SSE resumption)
        from starlette.concurrency import run_in_threadpool

        async def stream():
            position = cursor
            deadline = time.monotonic() + lifetime_s
            while time.monotonic() < deadline:
                if await request.is_disconnected():
                    return
                events, _latest = await run_in_threadpool(service.broker.poll, position, 1.0)
                if not events:
                    yield b": heartbeat\n\n"
                    continue
                for event in events:
                    data = json.dumps(event["payload"], ensure_ascii=False)
                    yield f"id: {event['seq']}\nevent: {event['event']}\ndata: {data}\n\n".encode("utf-8")
                    position = event["seq"]
            yield b"event: stream.end\ndata: {}\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/events/poll", dependencies=[Depends(operator)])
    def events_poll(cursor: int = 0, wait_s: float = Query(default=0.0, ge=0.0, le=30.0)):
        events, latest = service.broker.poll(cursor, wait_s=wait_s)
        return {"events": events, "cursor": latest}

    # -- JSON-RPC tool surface --

    @app.post("/rpc")
    async def rpc(request: Request, authorization: str | None = Header(default=None)):
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError:
            return JSONResponse(
                {"jsonrpc": "2.0", "id": None, "error": {"code": -32700, "message": "parse error"}}
            )
        return _dispatch_rpc(service, auth, body, authorization)

    return app


def _dispatch_rpc(service: GovernanceService, auth: _Auth, body: dict, authorization: str | None):
    rpc_id = body.get("id")
    method = body.get("method", "")

    def ok(result: Any):
        return JSONResponse({"jsonrpc": "2.0", "id": rpc_id, "result": result})

    def err(code: int, message: str, data: Any = None):
        error: dict[str, Any] = {"code": code, "message": message}
        if data is not None:
            error["data"] = data
        return JSONResponse({"jsonrpc": "2.0", "id": rpc_id, "error": error})

    if body.get("jsonrpc") != "2.0":
        return err(-32600, "jsonrpc must be '2.0'")

    if method == "initialize":
        return ok(
            {
                "protocolVersion": "2025-03-26",
                "serverInfo": {"name": "agentgov", "version": "0.1.0"},
                "capabilities": {"tools": {"listChanged": False}},
            }
        )
    if method == "notifications/initialized":
        return Response(status_code=204)
    if method == "tools/list":
        return ok(
            {
                "tools": [
                    {
                        "name": t["name"],
                        "description": t["description"],
                        "inputSchema": _TOOL_SCHEMAS[t["name"]],
                    }
                    for t in _TOOLS
                ]
            }
        )
    if method == "tools/call":
        params = body.get("params", {})
        name = params.get("name", "")
        arguments = params.get("arguments", {}) or {}
        if name not in _TOOL_ROLES:
            return err(-32601, f"tool not found: {name}")
        try:
            auth.check(_TOOL_ROLES[name], authorization)
        except HTTPException:
            return err(-32001, "unauthorized", {"code": "UNAUTHORIZED"})
        try:
            result = _call_tool(service, name, arguments)
        except GovernanceError as exc:
            return err(-32002, str(exc), _error_payload(exc))
        except (KeyError, TypeError, ValueError) as exc:
            return err(-32602, f"invalid params: {exc}")
        return ok(
            {
                "content": [{"type": "text", "text": json.dumps(result, ensure_ascii=False)}],
                "structuredContent": result,
                "isError": False,
            }
        )
    return err(-32601, f"method not found: {method}")


def serve(config: ServiceConfig) -> None:
    """Build the service from config and run the server (blocking)."""
    import uvicorn

    try:
        service = GovernanceService.from_config(config)
    except GovernanceError as exc:
        raise SystemExit(f"startup failed [{exc.code}]: {exc}") from exc
    app = build_app(
        service,
        operator_token=os.environ.get(config.operator_token_env) or None,
        agent_token=os.environ.get(config.agent_token_env) or None,
    )
    uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="info")
