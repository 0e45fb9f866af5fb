from .core import Agent, AgentReply, ExecutionError, PlanningFailure
from .llm import (
    HttpLlmClient,
    LlmClient,
    LlmUnreachable,
    MockLlmClient,
    UnconfiguredLlmClient,
    client_from_env,
)
from .plan import DirectAnswer, PlanError, PlanStep, Ref, ToolPlan, parse_plan
from .prompt import build_system_prompt
from .session import AgentSession
from .tools import ToolContext, ToolError, ToolSpec, build_registry

__all__ = [
    "Agent",
    "AgentReply",
    "ExecutionError",
    "PlanningFailure",
    "LlmClient",
    "LlmUnreachable",
    "HttpLlmClient",
    "MockLlmClient",
    "UnconfiguredLlmClient",
    "client_from_env",
    "DirectAnswer",
    "PlanError",
    "PlanStep",
    "Ref",
    "ToolPlan",
    "parse_plan",
    "build_system_prompt",
    "AgentSession",
    "ToolContext",
    "ToolError",
    "ToolSpec",
    "build_registry",
]
