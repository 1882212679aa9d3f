"""Cyber exposure profiling, likelihood scoring and countermeasure ranking."""

from .errors import (
    ConflictError,
    ConvergenceError,
    DimensionError,
    DocumentSyntaxError,
    DomainError,
    EmptyCorpusError,
    EmptyMappingError,
    EngineError,
    InsufficientPointsError,
    IntegrityError,
    NotFoundError,
    RangeError,
    SchemaError,
    UnknownNodeError,
)
from .kb_graph import (
    ControlWeightTable,
    EdgeKind,
    KbEdge,
    KbNode,
    KnowledgeGraph,
    NodeKind,
    Severity,
    ValidationIssue,
    control_weights,
    countermeasures_for,
    load_kb,
    serialize_kb,
    techniques_for_baseline,
    validate_kb,
)
from .metrics import (
    Direction,
    MetricSpec,
    MetricValue,
    Variable,
    VariableScores,
    compute_variable_scores,
    default_registry,
    evaluate_metric,
)
from .scoring import (
    CptParams,
    IsunfFactors,
    LikelihoodParams,
    LikelihoodResult,
    RiskValue,
    isunf_likelihood,
    likelihood,
    probability_weight,
    prospect_value,
    risk_value,
)
from .telemetry import (
    AssetInventory,
    Device,
    LoggingPosture,
    MotivationInputs,
    NetworkSurface,
    OrgProfile,
    UpdatePosture,
    UserInventory,
    UserRecord,
    merge_profile,
    parse_account_file,
    parse_port_scan_xml,
    parse_profile,
    serialize_profile,
)

__version__ = "0.1.0"
