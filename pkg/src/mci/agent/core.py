"""Agent orchestration: prompt -> LLM -> validated plan -> execution -> reply."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field

from ..artifacts import ArtifactStore
from ..data.vocab import Vocabulary
from ..models.full import ChangeCaptioner
from .llm import LlmClient
from .plan import (
    DirectAnswer,
    PlanError,
    Ref,
    ToolPlan,
    extract_plan_block,
    parse_plan,
    render_respond,
)
from .prompt import build_system_prompt
from .session import AgentSession
from .tools import ToolContext, ToolError, build_registry

DEFAULT_STEP_TIMEOUT_S = 60.0

_REPAIR_TEMPLATE = (
    "The plan was invalid: {error}\n"
    "Reply again with a single corrected ```plan fence and nothing else."
)


class PlanningFailure(Exception):
    """The LLM failed to produce a valid plan, repair attempt included."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class ExecutionError(Exception):
    """A plan step failed; carries the step id and tool name."""

    def __init__(self, step_id: str, tool: str, message: str):
        self.step_id = step_id
        self.tool = tool
        super().__init__(f"step {step_id!r} ({tool}): {message}")


@dataclass
class AgentReply:
    text: str
    artifacts: list[dict] = field(default_factory=list)
    plan: ToolPlan | None = None
    results: dict = field(default_factory=dict)


class Agent:
    def __init__(
        self,
        store: ArtifactStore,
        model: ChangeCaptioner,
        vocab: Vocabulary,
        llm: LlmClient,
        resolution_m_per_px: float = 0.5,
        step_timeout_s: float = DEFAULT_STEP_TIMEOUT_S,
    ):
        self.store = store
        self.model = model
        self.vocab = vocab
        self.llm = llm
        self.resolution_m_per_px = resolution_m_per_px
        self.step_timeout_s = step_timeout_s
        self.system_prompt = build_system_prompt(
            build_registry(self._context({}))
        )

    def _context(self, bindings: dict[str, str]) -> ToolContext:
        return ToolContext(
            store=self.store,
            model=self.model,
            vocab=self.vocab,
            resolution_m_per_px=self.resolution_m_per_px,
            bindings=dict(bindings),
        )

    def handle(self, session: AgentSession, text: str) -> AgentReply:
        with session.lock:
            session.touch()
            messages = (
                [{"role": "system", "content": self.system_prompt}]
                + list(session.history)
                + [{"role": "user", "content": text}]
            )
            raw = self.llm.complete(messages)
            block = extract_plan_block(raw)
            ctx = self._context(session.bindings())
            registry = build_registry(ctx)

            if block is None:
                session.history.append({"role": "user", "content": text})
                session.history.append({"role": "assistant", "content": raw})
                return AgentReply(text=raw.strip())

            try:
                plan = parse_plan(block, registry)
            except PlanError as first:
                repair = messages + [
                    {"role": "assistant", "content": raw},
                    {"role": "user", "content": _REPAIR_TEMPLATE.format(error=first)},
                ]
                raw2 = self.llm.complete(repair)
                block2 = extract_plan_block(raw2)
                if block2 is None:
                    raise PlanningFailure(
                        [str(first), "repair reply contained no plan block"]
                    ) from None
                try:
                    plan = parse_plan(block2, registry)
                except PlanError as second:
                    raise PlanningFailure([str(first), str(second)]) from None
                raw = raw2

            reply = self._execute(plan, ctx, registry)
            session.history.append({"role": "user", "content": text})
            session.history.append({"role": "assistant", "content": raw})
            if reply.results:
                summary = "; ".join(f"{k} = {_short(v)}" for k, v in reply.results.items())
                session.history.append(
                    {"role": "system", "content": f"Tool results: {summary}"}
                )
            return reply

    def _execute(self, plan: ToolPlan, ctx: ToolContext, registry: dict) -> AgentReply:
        results: dict[str, object] = {}
        with ThreadPoolExecutor(max_workers=1) as pool:
            for step in plan.steps:
                spec, fn = registry[step.tool]
                kwargs = {}
                for name, value in step.args.items():
                    if isinstance(value, Ref):
                        if value.target in results:
                            kwargs[name] = results[value.target]
                        elif value.target in ctx.bindings:
                            kwargs[name] = ctx.bindings[value.target]
                        else:
                            raise ExecutionError(
                                step.id, step.tool,
                                f"unbound reference {value.target!r} (no pair uploaded?)",
                            )
                    else:
                        kwargs[name] = value
                # param names with python keywords (class) are positional in fn
                future = pool.submit(fn, *[kwargs[n] for n, _ in spec.params])
                try:
                    results[step.id] = future.result(timeout=self.step_timeout_s)
                except FutureTimeout:
                    raise ExecutionError(
                        step.id, step.tool, f"timed out after {self.step_timeout_s:.0f}s"
                    ) from None
                except ToolError as exc:
                    raise ExecutionError(step.id, step.tool, str(exc)) from None
                except Exception as exc:  # noqa: BLE001 - typed wrapper by contract
                    raise ExecutionError(step.id, step.tool, f"{type(exc).__name__}: {exc}") from None

        if plan.respond is not None:
            text = render_respond(plan.respond, results)
        elif plan.steps:
            text = "Done. " + "; ".join(f"{k} = {_short(v)}" for k, v in results.items())
        else:
            text = "No actions were needed."
        return AgentReply(
            text=text, artifacts=ctx.drain_artifacts(), plan=plan, results=results
        )


def _short(value: object, limit: int = 80) -> str:
    s = str(value)
    return s if len(s) <= limit else s[: limit - 3] + "..."


__all__ = [
    "Agent",
    "AgentReply",
    "DirectAnswer",
    "ExecutionError",
    "PlanningFailure",
]
