"""Trust-aware multi-robot task allocation and symbolic motion planning."""

from .allocation import (
    AllocationAutomaton,
    AllocationPath,
    AllocState,
    MultiAction,
    RobotProfile,
    SingleAction,
    max_trust_path,
    project_path,
    resynthesize,
    synthesize,
)
from .automata import (
    Automaton,
    ResidualLanguage,
    Word,
    enumerate_acyclic_words,
    parse_automaton,
)
from .sim import EventLog, HumanModel, Session, metrics, run, start
from .trust import (
    HumanObservation,
    TrustBelief,
    TrustFactors,
    TrustParams,
    filter_step,
    intervention_probability,
)
from .world import (
    GridWorld,
    RobotState,
    ScenarioConfig,
    load_bundled_scenario,
    load_scenario,
)

__version__ = "0.1.0"
