"""System prompt construction. Deterministic: same registry, same string."""

from __future__ import annotations

from .plan import BUILTIN_TYPES, MAX_STEPS

_HEADER = """\
You are Change-Agent, an assistant for interpreting bi-temporal remote \
sensing image pairs. The user has uploaded a pair of co-registered images \
(time 1 and time 2). You can call tools to detect changes, describe them, \
count objects, and produce visualizations.

To use tools, reply with a JSON array inside a ```plan fence. Each step is
{"id": "<unique name>", "tool": "<tool>", "args": {...}}. Argument values
are literals, or {"$ref": "<id>"} to use the result of an earlier step.
Pre-bound names you can reference: """

_GRAMMAR = """

Rules:
- at most %d steps; ids are unique and must not shadow the pre-bound names;
- references only point backward;
- the array may end with {"respond": "..."} whose {id} placeholders are
  replaced by step results in the final reply.

Example:
```plan
[
  {"id": "m", "tool": "detect_changes", "args": {"pair_ref": {"$ref": "pair"}}},
  {"id": "n", "tool": "count_objects", "args": {"mask_ref": {"$ref": "m"}, "class": "building"}},
  {"respond": "I found {n} changed buildings."}
]
```

For knowledge questions that need no measurement (why changes happened,
what might happen next), answer directly in plain text without a plan.

Available tools:
"""


def build_system_prompt(registry: dict) -> str:
    if not registry:
        raise ValueError("cannot build a prompt from an empty tool registry")
    builtins = ", ".join(f"{name} ({t})" for name, t in sorted(BUILTIN_TYPES.items()))
    lines = [_HEADER + builtins + "." + _GRAMMAR % MAX_STEPS]
    for name in registry:
        spec = registry[name][0]
        lines.append(f"- {spec.signature()}: {spec.description}")
    return "\n".join(lines) + "\n"
