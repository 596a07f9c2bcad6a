"""Intent-based SDN policy engine and flow-level network simulator.

Administrators state what the network should do as one-line policies; the
engine detects and resolves conflicts between them, compiles them into
prioritized per-switch match-action rules along computed paths, and replays
scenarios deterministically on a simulated data plane.
"""

from .errors import (
    DuplicateIdError,
    FormatError,
    InvalidConflictClassError,
    NoPathError,
    NotFoundError,
    OsdfError,
    ParseError,
    PolicyNotApplicableError,
    SemanticError,
    UnknownApplicationError,
    UnresolvableHostError,
    ValidationError,
)
from .policy import (
    DEFAULT_PRIORITY,
    DEFAULT_REGISTRY,
    AddressSpace,
    ApplicationRegistry,
    NetworkOperation,
    OperationKind,
    Policy,
    Span,
    TrafficCondition,
    TrafficConditionKind,
    TrafficProfile,
    TrafficType,
    Transport,
    Waypoint,
    default_registry,
    parse_policy,
    render_policy,
)
from .store import PolicyStore
from .conflicts import (
    ConflictClass,
    ConflictReport,
    RemovePolicy,
    ReplaceBoth,
    ResolutionAction,
    UpdateAddressSpace,
    apply_resolution,
    classify_pair,
    detect_all,
    recommend,
)
from .network import (
    FlowSpan,
    Host,
    Link,
    NetworkConfig,
    PortRef,
    Region,
    Topology,
    config_from_dict,
    load_config,
)
from .compiler import (
    CompiledFlow,
    FlowRule,
    ForwardToPort,
    Drop,
    Hop,
    LogAndDrop,
    MatchFields,
    MeterSpec,
    Path,
    build_selector,
    compile_flow,
    compile_policy,
    policy_covers_flow,
    select_path,
)
from .simulator import (
    AddPolicyStep,
    FlowRequest,
    FlowStep,
    Mode,
    RemovePolicyStep,
    SimEvent,
    SimLog,
    Simulator,
    ThroughputReport,
    load_script,
    parse_script,
    run_scenario,
    winning_policy,
)

__version__ = "0.1.0"
