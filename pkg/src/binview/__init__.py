"""Multi-view embeddings and auditable similarity scores for PE program artifacts."""

__version__ = "0.1.0"

from .comparison import SimilarityBreakdown, WeightVector, compare, compare_batch, compare_fields, compare_views, global_similarity
from .encoder import EmbeddingVector, Encoder, EncoderConfig, ExternalEncoder, encode_token_multiset, hash_encode_token
from .ingest import merge_artifact, parse_static_export, parse_trace_log
from .model import ArtifactBundle
from .pe_inspect import Bitness, PEIdentity, detect_bitness
from .registers import RegisterFamily, canonicalize_register, summarize_registers
from .report import render_report
from .views import ArtifactViews, ViewKind, build_views

__all__ = [
    "ArtifactBundle", "ArtifactViews", "Bitness", "EmbeddingVector", "Encoder", "EncoderConfig",
    "ExternalEncoder", "PEIdentity", "RegisterFamily", "SimilarityBreakdown", "ViewKind", "WeightVector",
    "build_views", "canonicalize_register", "compare", "compare_batch", "compare_fields", "compare_views",
    "detect_bitness", "encode_token_multiset", "global_similarity", "hash_encode_token", "merge_artifact",
    "parse_static_export", "parse_trace_log", "render_report", "summarize_registers",
]
