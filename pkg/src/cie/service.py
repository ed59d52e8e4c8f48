"""Machine-facing tool service over the engine.

Wire format: one JSON object per line. Requests carry ``id``, ``method``,
``params``; responses echo the id and carry either a payload or a coded
error. Six methods form the closed surface; a healthy environment returns
an explicit no-active-root-cause answer rather than an empty search. Every
response is computed from a single engine snapshot (one revision), whose
number is included in the payload for staleness checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .engine import Engine, EngineSnapshot
from .errors import DocumentError, EngineError, UnknownIdError
from .impact import ownership_check

TOOL_SCHEMA = "tool/1"
METHODS = ("get_environment_health", "get_symptoms", "get_root_causes",
           "get_blast_radius", "check_remediation", "get_topology")

NO_ROOT_CAUSE = "no active root cause"


@dataclass(frozen=True)
class ToolRequest:
    request_id: object
    method: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ToolResponse:
    request_id: object
    status: str  # "ok" | "error"
    payload: dict | None = None
    error: dict | None = None

    def to_dict(self) -> dict:
        if self.status == "ok":
            return {"id": self.request_id, "status": "ok", "payload": self.payload}
        return {"id": self.request_id, "status": "error", "error": self.error}


class _ParamError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        self.message = message
        super().__init__(message)


def handle(raw: dict | ToolRequest, snapshot: EngineSnapshot) -> ToolResponse:
    """Dispatch one request against one snapshot; never raises."""
    if isinstance(raw, ToolRequest):
        raw = {"id": raw.request_id, "method": raw.method, "params": raw.params}
    request_id = raw.get("id") if isinstance(raw, dict) else None
    try:
        if not isinstance(raw, dict) or not isinstance(raw.get("method"), str):
            raise _ParamError("invalid_request", "request must carry a string 'method'")
        method = raw["method"]
        params = raw.get("params", {})
        if params is None:
            params = {}
        if not isinstance(params, dict):
            raise _ParamError("invalid_params", "'params' must be an object")
        if method not in METHODS:
            raise _ParamError("unknown_method", f"unknown method {method!r}")
        handler = _HANDLERS[method]
        payload = handler(snapshot, params)
        payload["revision"] = snapshot.revision
        return ToolResponse(request_id, "ok", payload=payload)
    except _ParamError as exc:
        return _error(request_id, exc.code, exc.message)
    except UnknownIdError as exc:
        return _error(request_id, "unknown_id", str(exc))
    except DocumentError as exc:
        return _error(request_id, "invalid_params", str(exc))
    except EngineError as exc:
        return _error(request_id, "engine_error", str(exc))
    except Exception as exc:  # the loop must survive anything
        return _error(request_id, "internal_error", f"{type(exc).__name__}: {exc}")


def _error(request_id, code: str, message: str) -> ToolResponse:
    return ToolResponse(request_id, "error", error={"code": code, "message": message})


def _scope_param(snapshot: EngineSnapshot, params: dict) -> frozenset[str] | None:
    scope = params.get("scope")
    if scope is None:
        return None
    if not isinstance(scope, list) or not all(isinstance(s, str) for s in scope):
        raise _ParamError("invalid_params", "'scope' must be a list of entity ids")
    missing = [s for s in scope if s not in snapshot.topology]
    if missing:
        raise UnknownIdError(f"unknown entities in scope: {sorted(missing)}")
    return frozenset(scope)


def _team_param(params: dict) -> str | None:
    team = params.get("team")
    if team is not None and not isinstance(team, str):
        raise _ParamError("invalid_params", "'team' must be a string")
    return team


def _symptom_summary(snapshot: EngineSnapshot, sid: str) -> dict:
    inst = snapshot.causality.symptoms[sid]
    entity = snapshot.topology.entity(inst.host_entity)
    return {"id": sid, "symptom_name": inst.symptom_name,
            "entity": inst.host_entity, "entity_name": entity.name}


def _cause_summary(snapshot: EngineSnapshot, entry) -> dict:
    inst = snapshot.causality.causes[entry.cause_id]
    entity = snapshot.topology.entity(inst.host_entity)
    return {"cause": entry.cause_id, "cause_name": inst.cause_name,
            "entity": inst.host_entity, "entity_name": entity.name,
            "score": entry.score,
            "explained": list(entry.explained), "unexplained": list(entry.unexplained)}


def _cause_ref(snapshot: EngineSnapshot, cause_id: str) -> dict:
    inst = snapshot.causality.causes[cause_id]
    return {"cause": cause_id, "cause_name": inst.cause_name, "entity": inst.host_entity}


def _handle_health(snapshot: EngineSnapshot, params: dict) -> dict:
    scope = _scope_param(snapshot, params)
    active = snapshot.active(scope)
    diagnosis = snapshot.diagnosis(scope)
    payload = {
        "verdict": "healthy" if not active else "degraded",
        "scope": sorted(scope) if scope is not None else None,
        "active_symptoms": [_symptom_summary(snapshot, s)
                            for s in sorted(active.symptoms)],
        "root_causes": [_cause_summary(snapshot, e) for e in diagnosis.ranked],
    }
    if not active:
        payload["message"] = NO_ROOT_CAUSE
    return payload


def _handle_symptoms(snapshot: EngineSnapshot, params: dict) -> dict:
    scope = _scope_param(snapshot, params)
    active = snapshot.active(scope)
    return {"count": len(active.symptoms),
            "as_of": active.as_of,
            "symptoms": [_symptom_summary(snapshot, s) for s in sorted(active.symptoms)]}


def _handle_root_causes(snapshot: EngineSnapshot, params: dict) -> dict:
    scope = _scope_param(snapshot, params)
    team = _team_param(params)
    diagnosis = snapshot.diagnosis(scope)
    if diagnosis.best is None:
        payload = {"verdict": "no_active_root_cause", "best": None, "ranked": [],
                   "message": NO_ROOT_CAUSE}
        if team is not None:
            payload["team"] = {"team": team, "responsible": False}
        return payload
    payload = {"verdict": "localized",
               "best": _cause_summary(snapshot, diagnosis.best),
               "ranked": [_cause_summary(snapshot, e) for e in diagnosis.ranked]}
    if team is not None:
        radius = snapshot.blast_radius(diagnosis.best.cause_id)
        payload["team"] = {"team": team, "responsible": ownership_check(radius, team)}
    return payload


def _handle_blast_radius(snapshot: EngineSnapshot, params: dict) -> dict:
    team = _team_param(params)
    cause_id = params.get("cause")
    if cause_id is not None and not isinstance(cause_id, str):
        raise _ParamError("invalid_params", "'cause' must be a root cause instance id")
    if cause_id is None:
        cause_id = snapshot.best_cause()
        if cause_id is None:
            payload = {"cause": None, "direct": [], "transitive": [], "paths": {},
                       "teams": [], "multi_team": False,
                       "message": f"no impacted services; {NO_ROOT_CAUSE}"}
            if team is not None:
                payload["team"] = {"team": team, "owns_impacted": False}
            return payload
    radius = snapshot.blast_radius(cause_id)
    payload = {
        "cause": _cause_ref(snapshot, cause_id),
        "direct": sorted(radius.direct_entities),
        "transitive": sorted(radius.transitive_entities),
        "paths": {entity: [{"rule": h.rule_id, "from": h.from_entity,
                            "to": h.to_entity, "kind": h.kind} for h in hops]
                  for entity, hops in sorted(radius.paths.items())},
        "teams": sorted(radius.impacted_teams),
        "multi_team": len(radius.impacted_teams) > 1,
        "truncated": bool(radius.truncations),
    }
    if team is not None:
        payload["team"] = {"team": team, "owns_impacted": ownership_check(radius, team)}
    return payload


def _handle_remediation(snapshot: EngineSnapshot, params: dict) -> dict:
    targets = params.get("action_targets")
    if targets is None:
        single = params.get("action_target")
        targets = [single] if single is not None else None
    if (not isinstance(targets, list) or not targets
            or not all(isinstance(t, str) for t in targets)):
        raise _ParamError("invalid_params",
                          "provide 'action_target' or a non-empty 'action_targets' list")
    for target in targets:
        if target not in snapshot.topology:
            raise UnknownIdError(f"unknown entity {target!r}")
    cause_id = params.get("cause")
    if cause_id is not None and not isinstance(cause_id, str):
        raise _ParamError("invalid_params", "'cause' must be a root cause instance id")
    if cause_id is None:
        cause_id = snapshot.best_cause()
    if cause_id is None:
        return {"cause": None,
                "verdicts": [{"target": t, "aligned": None,
                              "rationale": f"{NO_ROOT_CAUSE}; nothing to align against"}
                             for t in targets]}
    snapshot.causality.cause(cause_id)
    verdicts = []
    for target in targets:
        verdict = snapshot.remediation(cause_id, target)
        verdicts.append({"target": target, "aligned": verdict.aligned,
                         "rationale": verdict.rationale, "path": list(verdict.path)})
    return {"cause": _cause_ref(snapshot, cause_id), "verdicts": verdicts}


def _handle_topology(snapshot: EngineSnapshot, params: dict) -> dict:
    scope = _scope_param(snapshot, params)
    graph = snapshot.topology if scope is None else snapshot.topology.scope(set(scope))
    entities = [{"id": e.id, "name": e.name, "type": e.entity_type,
                 "team": e.owner_team, "metadata": dict(e.metadata)}
                for e in sorted(graph.entities.values(), key=lambda e: e.id)]
    relations = [{"source": r.source, "target": r.target, "kind": r.kind}
                 for r in sorted(graph.relations,
                                 key=lambda r: (r.source, r.target, r.kind))]
    return {"entities": entities, "relations": relations}


_HANDLERS = {
    "get_environment_health": _handle_health,
    "get_symptoms": _handle_symptoms,
    "get_root_causes": _handle_root_causes,
    "get_blast_radius": _handle_blast_radius,
    "check_remediation": _handle_remediation,
    "get_topology": _handle_topology,
}


def hello_banner(engine: Engine) -> dict:
    return {"hello": {"schema": TOOL_SCHEMA, "server": "cie",
                      "methods": list(METHODS),
                      "revision": engine.topology.revision}}


def serve(engine: Engine, input_stream, output_stream) -> int:
    """Run the newline-delimited request loop until end of input.

    One response per request, in arrival order; malformed frames produce a
    parse_error response and the loop continues. Returns the number of
    responses written.
    """
    def emit(obj: dict):
        output_stream.write(json.dumps(obj) + "\n")
        output_stream.flush()

    emit(hello_banner(engine))
    responses = 0
    try:
        for line in input_stream:
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                emit(_error(None, "parse_error", f"malformed frame: {exc}").to_dict())
                responses += 1
                continue
            response = handle(raw, engine.snapshot())
            emit(response.to_dict())
            responses += 1
    except KeyboardInterrupt:
        pass
    return responses
