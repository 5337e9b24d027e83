"""Composable DAG orchestration for multimodal model-service pipelines."""

from .adapters import (
    CAPABILITIES,
    AdapterCapability,
    AdapterConfig,
    AdapterRegistry,
    RetryPolicy,
    build_mock_registry,
    build_remote_registry,
)
from .agent import AgentConfig, AgentService, Turn, assemble_prompt, truncate_history
from .errors import (
    AdapterError,
    AdapterErrorKind,
    BusyError,
    ConfigError,
    GraphValidationError,
    ModalflowError,
    RunFailedError,
    UnknownSessionError,
)
from .executor import CacheStore, NodeState, RunResult, RunTrace, execute, write_trace
from .graph import EdgeSpec, NodeSpec, PipelineGraph, build_graph, topological_order, validate_types
from .harness import DatasetManifest, MetricReport, load_manifest, run_task_eval, write_report
from .metrics import corpus_bleu, normalize_answer, recall_at_k, vqa_accuracy
from .mock_backend import MockBackend, MockSettings
from .payload import (
    Modality,
    Payload,
    coerce,
    content_hash,
    from_wire,
    to_wire,
    vision_description_block,
)
from .pipelines import build_retrieval_config, build_s2st_config, build_vqa_config
from .transforms import (
    T1,
    T1Q,
    cosine_similarity,
    fuse_scores,
    normalize_scores,
    prompt_from_vision,
    rank_candidates,
    render,
)

__version__ = "0.1.0"
