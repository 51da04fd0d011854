from uqengine.executors.ensemble import EnsembleExecutor
from uqengine.executors.modelexec import ExecutionResult, ModelExecutor, model_execute
from uqengine.executors.pool import PoolExecutor, TaskFailure
from uqengine.executors.routing import RouteInstruction, RoutingPlan, route_plan

__all__ = [
    "PoolExecutor",
    "TaskFailure",
    "EnsembleExecutor",
    "RouteInstruction",
    "RoutingPlan",
    "route_plan",
    "ModelExecutor",
    "ExecutionResult",
    "model_execute",
]
