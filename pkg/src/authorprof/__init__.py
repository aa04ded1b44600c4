"""Community-based author profiling for abusive-language classification."""

from .config import METHODS, ExperimentConfig, desk_config, full_config
from .corpus import ingest
from .errors import AuthorProfError
from .experiment import EvalReport, ExperimentResult, run_experiment
from .graph import CommunityGraph
from .node2vec import AuthorProfileTable, WalkConfig, embed_graph
from .synthetic import SyntheticSpec, default_spec, generate_synthetic, null_spec
from .text import LABELS, LabeledDocument

__version__ = "0.1.0"

__all__ = [
    "LABELS", "METHODS", "AuthorProfError", "AuthorProfileTable", "CommunityGraph", "EvalReport",
    "ExperimentConfig", "ExperimentResult", "LabeledDocument", "SyntheticSpec", "WalkConfig",
    "default_spec", "desk_config", "embed_graph", "generate_synthetic", "ingest", "null_spec",
    "full_config", "run_experiment",
]
