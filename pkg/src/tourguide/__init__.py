"""Phase-driven travel-planning dialogue orchestrator.

Five scenario phases carry a customer from greeting to a confirmed
two-spot day plan: sign/turn-cap transitions, streaming punctuation-cut
speech segments, model-course selection, backend spot extraction,
route-to-text templating, and a rule-governed spot/map display. Mock
backends make every path verifiable offline.
"""

from .config import Resources, ServerConfig, load_resources
from .phases import (
    END_SIGN,
    ActionCue,
    Phase,
    PhaseConfig,
    TransitionDecision,
    check_transition,
    default_phase_configs,
    strip_end_sign,
)
from .session import SessionEngine, SessionState, SessionStatus, TravelPlan, TurnResult

__version__ = "0.1.0"

__all__ = [
    "ActionCue",
    "END_SIGN",
    "Phase",
    "PhaseConfig",
    "Resources",
    "ServerConfig",
    "SessionEngine",
    "SessionState",
    "SessionStatus",
    "TransitionDecision",
    "TravelPlan",
    "TurnResult",
    "check_transition",
    "default_phase_configs",
    "load_resources",
    "strip_end_sign",
    "__version__",
]
