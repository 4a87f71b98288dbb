"""skillprobe: a conversation-driven compliance harness for voice skills.

Crawls skills (simulated in process or reached through an external speech
adapter), records their responses under a fixed set of elicitation probes,
classifies compliance with eight interaction-design guidelines, and
aggregates the verdicts into per-guideline and per-category analyses.
"""

from .connectors import AdapterConnector, ConnectorEvent, EventKind, SessionHandle
from .crawler import CommandSet, ElicitationPlan, extract_commands, run_crawl
from .evaluator import MarkerLexicon, SkillEvaluation, evaluate_corpus, evaluate_skill
from .ingestion import Roster, load_roster, select_top
from .model import (
    SILENCE,
    GuidelineId,
    GuidelineVerdict,
    Probe,
    Role,
    Session,
    SkillCategory,
    SkillDescriptor,
    Stage,
    Termination,
    Turn,
    Utterance,
    ValidationError,
    Verdict,
    normalize,
    texts_differ,
)
from .reporting import ComplianceReport, build_report, compliance_rate, emit_report
from .simulator import (
    MemoryMode,
    RepromptMode,
    SimConnector,
    SimProfile,
    generate_profiles,
    ground_truth,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "AdapterConnector",
    "CommandSet",
    "ComplianceReport",
    "ConnectorEvent",
    "ElicitationPlan",
    "EventKind",
    "GuidelineId",
    "GuidelineVerdict",
    "MarkerLexicon",
    "MemoryMode",
    "Probe",
    "RepromptMode",
    "Role",
    "Roster",
    "SILENCE",
    "Session",
    "SessionHandle",
    "SimConnector",
    "SimProfile",
    "SkillCategory",
    "SkillDescriptor",
    "SkillEvaluation",
    "Stage",
    "Termination",
    "Turn",
    "Utterance",
    "ValidationError",
    "Verdict",
    "build_report",
    "compliance_rate",
    "emit_report",
    "evaluate_corpus",
    "evaluate_skill",
    "extract_commands",
    "generate_profiles",
    "ground_truth",
    "load_roster",
    "normalize",
    "run_crawl",
    "select_top",
    "step",
    "texts_differ",
]
