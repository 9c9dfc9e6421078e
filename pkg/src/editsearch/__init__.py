"""Tree search over image-editing rounds with reference retrieval.

The public surface: configuration derivation, the search loop, the simulated
world used for benchmarks, and the topology document format.
"""

from .config import (
    PRESETS,
    RunConfig,
    apply_overrides,
    config_digest,
    config_from_doc,
    config_to_doc,
    derive_config,
)
from .engine import (
    TERMINATION_BACKTRACK,
    TERMINATION_BUDGET,
    TERMINATION_COMPLETED,
    Control,
    QueueControls,
    RunLoop,
    RunResult,
    ScriptedControls,
    run,
)
from .errors import ConfigError, EditSearchError
from .evaluator import Checklist, Evaluation, build_checklist, cif, evaluate_state, vqa_score
from .ports import Backends
from .serialize import (
    document_to_topology,
    read_document,
    topology_to_document,
    write_document,
)
from .simworld import (
    SimActor,
    SimActorParams,
    SimChat,
    SimEmbedder,
    SimImage,
    SimScorer,
    SimTask,
    gen_tasks,
)
from .topology import ImageRef, InferenceTopology, LogicalClock, State, create_root

__version__ = "0.1.0"

__all__ = [
    "PRESETS",
    "RunConfig",
    "apply_overrides",
    "config_digest",
    "config_from_doc",
    "config_to_doc",
    "derive_config",
    "TERMINATION_BACKTRACK",
    "TERMINATION_BUDGET",
    "TERMINATION_COMPLETED",
    "Control",
    "QueueControls",
    "RunLoop",
    "RunResult",
    "ScriptedControls",
    "run",
    "ConfigError",
    "EditSearchError",
    "Checklist",
    "Evaluation",
    "build_checklist",
    "cif",
    "evaluate_state",
    "vqa_score",
    "Backends",
    "document_to_topology",
    "read_document",
    "topology_to_document",
    "write_document",
    "SimActor",
    "SimActorParams",
    "SimChat",
    "SimEmbedder",
    "SimImage",
    "SimScorer",
    "SimTask",
    "gen_tasks",
    "ImageRef",
    "InferenceTopology",
    "LogicalClock",
    "State",
    "create_root",
    "__version__",
]
