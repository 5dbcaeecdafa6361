"""Модели данных решателя"""

from .coordination import CoordinationResult, EtaSchedule, InexactnessBudget, InexactnessMode
from .network import COORDINATOR, CommLedger, Message, MessageTag, TraceRecord
from .nlp import AgentProblem, AssignmentMap, ConsistencyViolation, PartitionedNlp
from .problems import QuarticToyParams, RandomQpParams, RobotOcpConfig
from .run import (
    InnerParams,
    IterationRecord,
    OuterParams,
    OuterState,
    OutputParams,
    RunConfig,
    RunSummary,
    Variant,
)
from .sensitivities import AgentSensitivities, CondensedContribution, LocalStepResult

__all__ = [
    "AgentProblem",
    "AgentSensitivities",
    "AssignmentMap",
    "COORDINATOR",
    "CommLedger",
    "CondensedContribution",
    "ConsistencyViolation",
    "CoordinationResult",
    "EtaSchedule",
    "InexactnessBudget",
    "InexactnessMode",
    "InnerParams",
    "IterationRecord",
    "LocalStepResult",
    "Message",
    "MessageTag",
    "OuterParams",
    "OuterState",
    "OutputParams",
    "PartitionedNlp",
    "QuarticToyParams",
    "RandomQpParams",
    "RobotOcpConfig",
    "RunConfig",
    "RunSummary",
    "TraceRecord",
    "Variant",
]
