"""Explicit-state verification and leakage analysis for digital twins.

The toolkit has three layers.  `pgm` describes a twin's variables and
dependences structurally and rewrites distributed dependences into
explicit channels.  `kernel`, `checker`, and `uav` turn such a design
into an executable state machine, enumerate its reachable states, and
check invariants, progress, and termination under process fairness.
`leakage` quantifies what the telemetry stream such a system emits
reveals to an interceptor.  `cli` exposes the lot as a command line.
"""

from .checker import (
    ActionInvariant,
    Bounds,
    CheckResult,
    Counterexample,
    Counts,
    LeadsTo,
    PartialExplorationError,
    SizeLimitError,
    StateGraph,
    StateInvariant,
    brute_force_explore,
    check_action_invariant,
    check_leads_to,
    check_state_invariant,
    check_termination,
    explore,
    export_dot,
    format_trace,
    trace_records,
)
from .kernel import (
    ChannelError,
    DomainError,
    Fairness,
    Model,
    ModelError,
    ProcessDef,
    SystemState,
    VarSpec,
    canonical_digest,
    channel_push,
    channel_take,
)
from .leakage import (
    EpisodeTrace,
    HealthModel,
    LeakageError,
    deviation_bound,
    estimate,
    leakage_report,
    monte_carlo_check,
    required_samples,
    simulate,
)
from .pgm import Pgm, PgmError, ProcessSignature, augment, derive_processes, emit_pgm, parse_pgm
from .uav import ConfigError, UavConfig, build_model, load_config, parse_config, property_catalog

__version__ = "0.1.0"
