"""Crown jewel analysis of attack graphs with reinforcement learning."""

from cjarl.cja import (
    CjaReport,
    MultiCjSummary,
    analyze_paths,
    reachable_initial_nodes,
    run_cja,
    summarize_multi_cj,
    two_hop,
)
from cjarl.graph_io import (
    AttackGraph,
    Complexity,
    CvssAnnotation,
    Edge,
    Service,
    Vertex,
    VertexKind,
    emit_dot,
    generate_synthetic,
    parse_graph,
    serialize_graph,
)
from cjarl.path import AttackPath
from cjarl.rl_engine import LearnerConfig, QTable, TrainResult, extract_path, train, value_iteration
from cjarl.terrain_mdp import Mdp, TerrainConfig, compile_mdp

__all__ = [
    "AttackGraph",
    "AttackPath",
    "CjaReport",
    "Complexity",
    "CvssAnnotation",
    "Edge",
    "LearnerConfig",
    "Mdp",
    "MultiCjSummary",
    "QTable",
    "Service",
    "TerrainConfig",
    "TrainResult",
    "Vertex",
    "VertexKind",
    "analyze_paths",
    "compile_mdp",
    "emit_dot",
    "extract_path",
    "generate_synthetic",
    "parse_graph",
    "reachable_initial_nodes",
    "run_cja",
    "serialize_graph",
    "summarize_multi_cj",
    "train",
    "two_hop",
    "value_iteration",
]
