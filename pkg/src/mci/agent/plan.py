"""The ToolPlan dialect: a JSON array inside ```plan fences.

Steps look like {"id": "m", "tool": "detect_changes", "args": {"pair_ref":
{"$ref": "pair"}}}; an optional trailing {"respond": "... {m} ..."} element
templates the reply. References point only backward (or at the builtin
bindings), ids are unique, and argument types check against the registry.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

MAX_STEPS = 16
BUILTIN_TYPES = {"pair": "pair_ref", "t1": "image_ref", "t2": "image_ref"}

_FENCE = re.compile(r"```plan\s*\n(.*?)```", re.DOTALL)
_PLACEHOLDER = re.compile(r"\{([A-Za-z0-9_]+)\}")


class PlanError(ValueError):
    """A structurally or semantically invalid plan."""


@dataclass(frozen=True)
class Ref:
    target: str


@dataclass
class PlanStep:
    id: str
    tool: str
    args: dict[str, object]


@dataclass
class ToolPlan:
    steps: list[PlanStep]
    respond: str | None = None


@dataclass
class DirectAnswer:
    text: str


def extract_plan_block(text: str) -> str | None:
    m = _FENCE.search(text)
    return m.group(1) if m else None


def _check_literal(value: object, expected: str, where: str) -> None:
    if expected == "string" or expected.endswith("_ref"):
        # ref-typed literals are artifact ids resolved at execution time
        if not isinstance(value, str):
            raise PlanError(f"{where}: expected a string, got {type(value).__name__}")
    elif expected == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise PlanError(f"{where}: expected an int, got {value!r}")
    elif expected == "real":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise PlanError(f"{where}: expected a number, got {value!r}")
    else:
        raise PlanError(f"{where}: unknown parameter type {expected!r}")


def parse_plan(block: str, registry: dict) -> ToolPlan:
    """Validate a fenced plan body against the tool registry."""
    try:
        payload = json.loads(block)
    except json.JSONDecodeError as exc:
        raise PlanError(f"plan is not valid JSON: {exc}") from None
    if not isinstance(payload, list):
        raise PlanError("plan must be a JSON array of steps")

    respond: str | None = None
    raw_steps = payload
    if payload and isinstance(payload[-1], dict) and set(payload[-1]) == {"respond"}:
        respond = payload[-1]["respond"]
        if not isinstance(respond, str):
            raise PlanError("respond template must be a string")
        raw_steps = payload[:-1]

    if len(raw_steps) > MAX_STEPS:
        raise PlanError(f"plan has {len(raw_steps)} steps, limit is {MAX_STEPS}")

    steps: list[PlanStep] = []
    result_types: dict[str, str] = dict(BUILTIN_TYPES)
    seen_ids: set[str] = set()
    for pos, raw in enumerate(raw_steps):
        where = f"step {pos + 1}"
        if not isinstance(raw, dict):
            raise PlanError(f"{where}: each step must be an object")
        extra = set(raw) - {"id", "tool", "args"}
        if extra:
            raise PlanError(f"{where}: unknown keys {sorted(extra)}")
        sid = raw.get("id")
        tool = raw.get("tool")
        if not isinstance(sid, str) or not sid:
            raise PlanError(f"{where}: missing or invalid id")
        if sid in BUILTIN_TYPES:
            raise PlanError(f"{where}: id {sid!r} shadows a builtin binding")
        if sid in seen_ids:
            raise PlanError(f"{where}: duplicate id {sid!r}")
        if not isinstance(tool, str) or tool not in registry:
            known = ", ".join(sorted(registry))
            raise PlanError(f"{where}: unknown tool {tool!r}; known tools: {known}")
        spec = registry[tool][0]
        args_raw = raw.get("args", {})
        if not isinstance(args_raw, dict):
            raise PlanError(f"{where}: args must be an object")
        param_types = dict(spec.params)
        missing = set(param_types) - set(args_raw)
        if missing:
            raise PlanError(f"{where}: missing args {sorted(missing)} for {tool}")
        unknown = set(args_raw) - set(param_types)
        if unknown:
            raise PlanError(f"{where}: unknown args {sorted(unknown)} for {tool}")
        args: dict[str, object] = {}
        for name, value in args_raw.items():
            expected = param_types[name]
            loc = f"{where}, arg {name!r}"
            if isinstance(value, dict):
                if set(value) != {"$ref"} or not isinstance(value["$ref"], str):
                    raise PlanError(f"{loc}: objects may only be {{'$ref': <step id>}}")
                target = value["$ref"]
                if target not in result_types:
                    raise PlanError(
                        f"{loc}: reference {target!r} does not point at a prior step "
                        f"or builtin binding"
                    )
                got = result_types[target]
                if got != expected and expected != "string":
                    raise PlanError(
                        f"{loc}: {tool} wants {expected}, but {target!r} yields {got}"
                    )
                args[name] = Ref(target)
            else:
                _check_literal(value, expected, loc)
                args[name] = value
        seen_ids.add(sid)
        result_types[sid] = spec.result
        steps.append(PlanStep(id=sid, tool=tool, args=args))

    if respond is not None:
        for name in _PLACEHOLDER.findall(respond):
            if name not in result_types:
                raise PlanError(f"respond template references unknown id {name!r}")
    return ToolPlan(steps=steps, respond=respond)


def render_respond(template: str, results: dict[str, object]) -> str:
    def sub(match: re.Match) -> str:
        return str(results.get(match.group(1), match.group(0)))

    return _PLACEHOLDER.sub(sub, template)
