"""Per-artifact view embeddings: functions, imports, exports, traces, registers.

Each view keeps one pooled vector plus a fixed, ordered list of per-field
sub-vectors so that field-level agreement can be audited later. Absent
evidence produces flagged-zero vectors, never errors.

The function view's pooled vector is stored *before* standardization; the
numeric descriptor block is standardized at comparison time against the
comparison population (see :mod:`binview.comparison`).
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .encoder import EmbeddingVector, Encoder, EncoderConfig, encode_token_multiset, l2_norm, l2_normalize, multiset_image
from .errors import FormatError
from .model import CATEGORIES, ArtifactBundle, ProvenanceTag, SymbolRecord, TraceEvent
from .numerics import column_fsum, cosine, mean_pool
from .pe_inspect import Bitness
from .registers import FAMILY_ORDER, summarize_registers

VIEWS_FORMAT = "bin2vec-views-v1"
FIELD_LAYOUT_VERSION = "fields-v1"
TRACE_WINDOW = 256
DEFAULT_NGRAM = 2


class ViewKind(str, enum.Enum):
    functions = "functions"
    imports = "imports"
    exports = "exports"
    traces = "traces"
    registers = "registers"


VIEW_ORDER: tuple[ViewKind, ...] = tuple(ViewKind)

FUNCTION_NUMERIC = ("params", "locals", "in_degree", "out_degree", "size")
FIELD_LAYOUT: dict[ViewKind, tuple[str, ...]] = {
    ViewKind.functions: FUNCTION_NUMERIC + ("convention", "varargs", "name", "address"),
    ViewKind.imports: ("name", "library", "address", "namespace", "is_primary", "source"),
    ViewKind.exports: ("name", "library", "address", "namespace", "is_primary", "source"),
    ViewKind.traces: ("bag_of_ops", "op_ngrams", "activity"),
    ViewKind.registers: ("update_frequency", "read_write_ratio", "context_entropy"),
}

# evidence list backing each view, for provenance joins
VIEW_EVIDENCE = {
    ViewKind.functions: "functions",
    ViewKind.imports: "imports",
    ViewKind.exports: "exports",
    ViewKind.traces: "trace",
    ViewKind.registers: "trace",
}

IS_PRIMARY_TOKEN = "<is_primary>"


@dataclass(frozen=True)
class FieldEmbedding:
    field_name: str
    vector: EmbeddingVector
    # norm of the pooled field before L2 normalization, relative to its
    # constituents: 1.0 when every element agrees, smaller when they scatter
    raw_norm: float


@dataclass(frozen=True)
class ViewEmbedding:
    view: ViewKind
    fields: tuple[FieldEmbedding, ...]
    pooled: EmbeddingVector
    element_count: int
    pooled_pca: EmbeddingVector | None = None
    descriptor_rows: np.ndarray | None = None  # functions: raw numeric descriptors
    windows: tuple[np.ndarray, ...] = ()  # traces: pooled vector per window
    coherence: Mapping[str, float] = field(default_factory=dict)  # traces
    mnemonics: tuple[str, ...] = ()  # traces: distinct mnemonics, sorted
    channels: Mapping[str, tuple[float, ...]] = field(default_factory=dict)  # registers, raw

    @property
    def absent(self) -> bool:
        return self.pooled.is_zero

    def field(self, name: str) -> FieldEmbedding:
        for f in self.fields:
            if f.field_name == name:
                return f
        raise KeyError(name)


@dataclass(frozen=True)
class ArtifactViews:
    artifact_id: str
    bitness: Bitness
    encoder: EncoderConfig
    ngram_n: int
    views: Mapping[ViewKind, ViewEmbedding]
    provenance: Mapping[str, tuple[ProvenanceTag, ...]]
    layout_version: str = FIELD_LAYOUT_VERSION

    @property
    def encoder_id(self) -> str:
        return self.encoder.encoder_id

    def __getitem__(self, kind: ViewKind) -> ViewEmbedding:
        return self.views[ViewKind(kind)]


# field pooling helpers

def _pool_tokens(tokens: Sequence[str], encoder: Encoder) -> tuple[EmbeddingVector, float]:
    """Mean of per-element unit vectors; empty tokens contribute zero."""
    n = len(tokens)
    counts = Counter(t for t in tokens if t)
    if n == 0 or not counts:
        return encoder.zero(), 0.0
    rows = np.array([c * encoder.encode(t).values for t, c in sorted(counts.items())])
    mean = column_fsum(rows) / n
    return l2_normalize(mean, encoder.encoder_id), l2_norm(mean)


def _token_field(name: str, tokens: Sequence[str], encoder: Encoder) -> FieldEmbedding:
    vec, raw = _pool_tokens(tokens, encoder)
    return FieldEmbedding(name, vec, raw)


def _multiset_field(name: str, tokens: Sequence[str], encoder: Encoder) -> FieldEmbedding:
    if not tokens:
        return FieldEmbedding(name, encoder.zero(), 0.0)
    counts = Counter(tokens)
    image = multiset_image(list(counts), [float(c) for c in counts.values()], encoder)
    spread = math.fsum(c * l2_norm(encoder.image(t)) for t, c in counts.items())
    vec = encode_token_multiset(list(counts), [float(c) for c in counts.values()], encoder)
    return FieldEmbedding(name, vec, l2_norm(image) / spread if spread else 0.0)


def _embed_small(values: Sequence[float], dimension: int) -> np.ndarray:
    out = np.zeros(dimension)
    out[:len(values)] = values
    return out


def _dense_field(name: str, values: Sequence[float], encoder: Encoder) -> FieldEmbedding:
    padded = _embed_small(values, encoder.dimension)
    return FieldEmbedding(name, l2_normalize(padded, encoder.encoder_id), l2_norm(np.asarray(values, dtype=float)))


def _hex(value: int) -> str:
    return f"0x{value:x}"


def _size_bucket(size: int) -> str:
    return f"2^{int(math.floor(math.log2(1 + size)))}"


def _pooled(parts: Sequence[np.ndarray], encoder: Encoder) -> EmbeddingVector:
    return l2_normalize(mean_pool(parts), encoder.encoder_id)


# builders

def function_descriptor(f) -> list[float]:
    return [float(f.parameter_count), float(f.local_count), float(f.call_in_degree),
            float(f.call_out_degree), math.log2(1 + f.size_bytes)]


def build_function_view(bundle: ArtifactBundle, encoder: Encoder) -> ViewEmbedding:
    funcs = sorted(bundle.functions, key=lambda f: f.address)
    names = FIELD_LAYOUT[ViewKind.functions]
    d = encoder.dimension
    if not funcs:
        return ViewEmbedding(ViewKind.functions, tuple(FieldEmbedding(n, encoder.zero(), 0.0) for n in names),
                             EmbeddingVector.zero(len(FUNCTION_NUMERIC) + d + 1, encoder.encoder_id), 0,
                             descriptor_rows=np.zeros((0, len(FUNCTION_NUMERIC))))

    rows = np.array([function_descriptor(f) for f in funcs])
    columns = {
        "params": [str(f.parameter_count) for f in funcs],
        "locals": [str(f.local_count) for f in funcs],
        "in_degree": [str(f.call_in_degree) for f in funcs],
        "out_degree": [str(f.call_out_degree) for f in funcs],
        "size": [_size_bucket(f.size_bytes) for f in funcs],
        "convention": [f.calling_convention for f in funcs],
        "varargs": ["varargs" if f.is_varargs else "fixed" for f in funcs],
        "name": [f.name for f in funcs],
        "address": [_hex(f.address) for f in funcs],
    }
    fields = tuple(_token_field(n, columns[n], encoder) for n in names)

    elements = np.array([
        np.concatenate([row, encoder.encode(f.calling_convention).values, [1.0 if f.is_varargs else 0.0]])
        for row, f in zip(rows, funcs)
    ])
    pooled = EmbeddingVector(column_fsum(elements) / len(funcs), False, encoder.encoder_id)
    return ViewEmbedding(ViewKind.functions, fields, pooled, len(funcs), descriptor_rows=rows)


def build_symbol_view(bundle: ArtifactBundle, kind: str, encoder: Encoder) -> ViewEmbedding:
    view = ViewKind.imports if kind == "import" else ViewKind.exports
    symbols: Sequence[SymbolRecord] = bundle.imports if kind == "import" else bundle.exports
    names = FIELD_LAYOUT[view]
    if not symbols:
        return ViewEmbedding(view, tuple(FieldEmbedding(n, encoder.zero(), 0.0) for n in names),
                             encoder.zero(), 0)

    primary_unit = encoder.encode(IS_PRIMARY_TOKEN).values
    n = len(symbols)

    def enc(text: str) -> np.ndarray:
        return encoder.encode(text).values if text else np.zeros(encoder.dimension)

    # identical symbols share field vectors; pooling cost scales with distinct records
    counts = Counter((s.name, s.library, s.address, s.namespace, s.is_primary, s.source) for s in symbols)
    keys = sorted(counts, key=repr)
    distinct = {
        key: {
            "name": enc(key[0]),
            "library": enc(key[1]),
            "address": enc(_hex(key[2])),
            "namespace": enc(key[3]),
            "is_primary": primary_unit * (1.0 if key[4] else 0.0),
            "source": enc(key[5]),
        }
        for key in keys
    }

    fields = []
    for fname in names:
        rows = np.array([counts[k] * distinct[k][fname] for k in keys])
        mean = column_fsum(rows) / n
        fields.append(FieldEmbedding(fname, l2_normalize(mean, encoder.encoder_id), l2_norm(mean)))

    element_rows = np.array([counts[k] * mean_pool([distinct[k][f] for f in names]) for k in keys])
    pooled = l2_normalize(column_fsum(element_rows) / n, encoder.encoder_id)
    return ViewEmbedding(view, tuple(fields), pooled, n)


def ngram_tokens(mnemonics: Sequence[str], n: int) -> list[str]:
    return ["|".join(mnemonics[i:i + n]) for i in range(len(mnemonics) - n + 1)]


def activity_frequencies(events: Sequence[TraceEvent]) -> list[float]:
    counts = Counter(e.category for e in events)
    total = len(events)
    return [counts[c] / total for c in CATEGORIES] if total else [0.0] * len(CATEGORIES)


def _trace_fields(events: Sequence[TraceEvent], ngram_n: int, encoder: Encoder) -> tuple[FieldEmbedding, ...]:
    mnemonics = [e.mnemonic for e in events]
    bag = _multiset_field("bag_of_ops", mnemonics, encoder)
    # fewer events than n: the n-gram field is flagged-zero, the view survives
    grams = _multiset_field("op_ngrams", ngram_tokens(mnemonics, ngram_n), encoder)
    activity = _dense_field("activity", activity_frequencies(events), encoder)
    return bag, grams, activity


def _consecutive_coherence(vectors: Sequence[EmbeddingVector]) -> float:
    sims = [cosine(a, b) for a, b in zip(vectors, vectors[1:]) if not a.is_zero and not b.is_zero]
    if not sims:
        return 1.0
    return math.fsum(sims) / len(sims)


def build_trace_view(bundle: ArtifactBundle, encoder: Encoder, ngram_n: int = DEFAULT_NGRAM,
                     window: int = TRACE_WINDOW) -> ViewEmbedding:
    if ngram_n < 1:
        raise ValueError("ngram_n must be >= 1")
    events = sorted(bundle.trace, key=lambda e: e.sequence)
    names = FIELD_LAYOUT[ViewKind.traces]
    if not events:
        return ViewEmbedding(ViewKind.traces, tuple(FieldEmbedding(n, encoder.zero(), 0.0) for n in names),
                             encoder.zero(), 0, coherence={n: 1.0 for n in names})

    fields = _trace_fields(events, ngram_n, encoder)
    pooled = _pooled([f.vector.values for f in fields], encoder)

    chunks = [events[i:i + window] for i in range(0, len(events), window)]
    window_fields = [_trace_fields(chunk, ngram_n, encoder) for chunk in chunks]
    windows = tuple(_pooled([f.vector.values for f in wf], encoder).values for wf in window_fields)
    coherence = {
        name: _consecutive_coherence([wf[i].vector for wf in window_fields])
        for i, name in enumerate(names)
    }
    return ViewEmbedding(ViewKind.traces, fields, pooled, len(events), windows=windows,
                         coherence=coherence, mnemonics=tuple(sorted({e.mnemonic for e in events})))


def shannon_entropy(histogram: Mapping[str, int]) -> float:
    total = sum(histogram.values())
    if total == 0:
        return 0.0
    return -math.fsum((c / total) * math.log2(c / total) for c in histogram.values() if c)


def register_channels(bundle: ArtifactBundle) -> dict[str, tuple[float, ...]]:
    summaries = {s.family: s for s in summarize_registers(bundle.trace, bundle.bitness)}
    total = len(bundle.trace)
    update, ratio, entropy = [], [], []
    for fam in FAMILY_ORDER:
        s = summaries.get(fam)
        update.append(s.update_count / total if s and total else 0.0)
        ratio.append(s.read_write_ratio if s else 0.0)
        entropy.append(shannon_entropy(s.context_histogram) if s else 0.0)
    return {"update_frequency": tuple(update), "read_write_ratio": tuple(ratio),
            "context_entropy": tuple(entropy)}


def build_register_view(bundle: ArtifactBundle, encoder: Encoder) -> ViewEmbedding:
    names = FIELD_LAYOUT[ViewKind.registers]
    channels = register_channels(bundle)
    active = len(summarize_registers(bundle.trace, bundle.bitness))
    if active == 0:
        return ViewEmbedding(ViewKind.registers, tuple(FieldEmbedding(n, encoder.zero(), 0.0) for n in names),
                             encoder.zero(), 0, channels=channels)
    fields = tuple(_dense_field(n, channels[n], encoder) for n in names)
    pooled = _pooled([f.vector.values for f in fields], encoder)
    return ViewEmbedding(ViewKind.registers, fields, pooled, active, channels=channels)


def build_views(bundle: ArtifactBundle, encoder: Encoder | None = None,
                ngram_n: int = DEFAULT_NGRAM) -> ArtifactViews:
    encoder = encoder or Encoder()
    views = {
        ViewKind.functions: build_function_view(bundle, encoder),
        ViewKind.imports: build_symbol_view(bundle, "import", encoder),
        ViewKind.exports: build_symbol_view(bundle, "export", encoder),
        ViewKind.traces: build_trace_view(bundle, encoder, ngram_n),
        ViewKind.registers: build_register_view(bundle, encoder),
    }
    provenance = {
        "functions": tuple(f.provenance for f in bundle.functions),
        "imports": tuple(s.provenance for s in bundle.imports),
        "exports": tuple(s.provenance for s in bundle.exports),
        "trace": tuple(e.provenance for e in bundle.trace),
    }
    return ArtifactViews(bundle.artifact_id, bundle.bitness, encoder.config, ngram_n, views, provenance)


# bin2vec-views-v1 serialization

def _vec_list(values: np.ndarray) -> list[float]:
    return [float(x) for x in values]


def views_to_dict(av: ArtifactViews) -> dict:
    out_views = []
    for kind in VIEW_ORDER:
        v = av.views[kind]
        entry = {
            "view": kind.value,
            "element_count": v.element_count,
            "fields": [
                {"field_name": f.field_name, "normalized": f.vector.normalized,
                 "raw_norm": f.raw_norm, "vector": _vec_list(f.vector.values)}
                for f in v.fields
            ],
            "pooled_normalized": v.pooled.normalized,
            "pooled": _vec_list(v.pooled.values),
        }
        if v.pooled_pca is not None:
            entry["pooled_pca"] = _vec_list(v.pooled_pca.values)
        if kind is ViewKind.functions:
            entry["descriptor_columns"] = list(FUNCTION_NUMERIC)
            entry["descriptor_rows"] = [_vec_list(r) for r in v.descriptor_rows]
        if kind is ViewKind.traces:
            entry["coherence"] = {k: v.coherence[k] for k in FIELD_LAYOUT[kind] if k in v.coherence}
            entry["mnemonics"] = list(v.mnemonics)
            entry["windows"] = [_vec_list(w) for w in v.windows]
        if kind is ViewKind.registers:
            entry["families"] = [f.value for f in FAMILY_ORDER]
            entry["channels"] = {k: list(v.channels[k]) for k in FIELD_LAYOUT[kind] if k in v.channels}
        out_views.append(entry)

    return {
        "format": VIEWS_FORMAT,
        "artifact_id": av.artifact_id,
        "bitness": av.bitness.value,
        "encoder_id": av.encoder_id,
        "encoder": av.encoder.to_dict(),
        "ngram_n": av.ngram_n,
        "window_size": TRACE_WINDOW,
        "field_layout": av.layout_version,
        "views": out_views,
        "provenance": {k: [t.to_list() for t in tags] for k, tags in av.provenance.items()},
    }


def views_from_dict(doc: dict) -> ArtifactViews:
    if doc.get("format") != VIEWS_FORMAT:
        raise FormatError(f"expected a {VIEWS_FORMAT} document, got {doc.get('format')!r}")
    encoder = EncoderConfig.from_dict(doc["encoder"])
    eid = doc["encoder_id"]
    views = {}
    for entry in doc["views"]:
        kind = ViewKind(entry["view"])
        fields = tuple(
            FieldEmbedding(f["field_name"], EmbeddingVector(np.array(f["vector"], dtype=float), f["normalized"], eid),
                           float(f["raw_norm"]))
            for f in entry["fields"]
        )
        pca = entry.get("pooled_pca")
        views[kind] = ViewEmbedding(
            view=kind,
            fields=fields,
            pooled=EmbeddingVector(np.array(entry["pooled"], dtype=float), entry["pooled_normalized"], eid),
            element_count=int(entry["element_count"]),
            pooled_pca=EmbeddingVector(np.array(pca, dtype=float), True, eid) if pca is not None else None,
            descriptor_rows=(np.array(entry["descriptor_rows"], dtype=float).reshape(-1, len(FUNCTION_NUMERIC))
                             if "descriptor_rows" in entry else None),
            windows=tuple(np.array(w, dtype=float) for w in entry.get("windows", [])),
            coherence=dict(entry.get("coherence", {})),
            mnemonics=tuple(entry.get("mnemonics", [])),
            channels={k: tuple(v) for k, v in entry.get("channels", {}).items()},
        )
    missing = [k.value for k in VIEW_ORDER if k not in views]
    if missing:
        raise FormatError(f"views document lacks views {missing}")
    provenance = {k: tuple(ProvenanceTag.from_list(t) for t in tags) for k, tags in doc["provenance"].items()}
    return ArtifactViews(doc["artifact_id"], Bitness(doc["bitness"]), encoder, int(doc["ngram_n"]),
                         views, provenance, doc.get("field_layout", FIELD_LAYOUT_VERSION))
