"""Per-field, per-view, weighted-mean and global similarity between artifacts."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .encoder import EmbeddingVector, l2_normalize
from .errors import DuplicateArtifactId, EncoderMismatch, LayoutMismatch, NoCommonViews
from .numerics import PCAModel, Population, StandardizationStats, apply_standardizer, cosine, fit_standardizer, pca_fit, pca_transform
from .views import FIELD_LAYOUT, FUNCTION_NUMERIC, VIEW_ORDER, ArtifactViews, ViewKind

FieldKey = tuple[ViewKind, str]


@dataclass(frozen=True)
class WeightVector:
    weights: Mapping[ViewKind, float]
    normalized: bool = False

    def __post_init__(self):
        if set(self.weights) != set(VIEW_ORDER):
            raise ValueError("weights must cover every view")
        if any(not (w > 0 and math.isfinite(w)) for w in self.weights.values()):
            raise ValueError("weights must be positive and finite")

    @classmethod
    def uniform(cls) -> "WeightVector":
        return cls({v: 0.2 for v in VIEW_ORDER}, normalized=True)

    @classmethod
    def parse(cls, text: str) -> "WeightVector":
        """Parse ``functions=0.3,traces=0.1``; unnamed views keep 0.2."""
        weights = dict(cls.uniform().weights)
        for item in filter(None, (p.strip() for p in text.split(","))):
            name, _, value = item.partition("=")
            try:
                weights[ViewKind(name.strip())] = float(value)
            except ValueError:
                raise ValueError(f"bad weight entry {item!r}") from None
        return cls(weights).normalize()

    def normalize(self) -> "WeightVector":
        total = math.fsum(self.weights.values())
        return WeightVector({v: self.weights[v] / total for v in VIEW_ORDER}, normalized=True)

    def to_dict(self) -> dict:
        return {v.value: self.weights[v] for v in VIEW_ORDER}


@dataclass(frozen=True)
class SimilarityBreakdown:
    artifact_a: str
    artifact_b: str
    field_scores: Mapping[FieldKey, float | None]
    view_scores: Mapping[ViewKind, float | None]
    weighted_mean: float
    global_cosine: float
    weights_used: WeightVector
    encoder_id: str
    std_population: Population
    zeroed_blocks: tuple[ViewKind, ...] = ()
    global_cosine_pca: float | None = None
    pca_k: int | None = None


@dataclass(frozen=True)
class ComparisonContext:
    """Population-level state fitted once before any pair is scored."""

    population: Population = Population.batch
    function_stats: StandardizationStats | None = None
    pca: PCAModel | None = None


def check_compatible(a: ArtifactViews, b: ArtifactViews) -> None:
    if a.encoder != b.encoder:
        raise EncoderMismatch(
            f"{a.artifact_id} used {a.encoder.to_dict()}, {b.artifact_id} used {b.encoder.to_dict()}"
        )
    if a.layout_version != b.layout_version or a.ngram_n != b.ngram_n:
        raise LayoutMismatch(
            f"field layouts differ: {a.layout_version}/n={a.ngram_n} vs {b.layout_version}/n={b.ngram_n}"
        )
    for kind in VIEW_ORDER:
        fa = [f.field_name for f in a[kind].fields]
        fb = [f.field_name for f in b[kind].fields]
        if fa != fb or fa != list(FIELD_LAYOUT[kind]):
            raise LayoutMismatch(f"{kind.value} fields differ: {fa} vs {fb}")


def _score(x: EmbeddingVector, y: EmbeddingVector) -> float | None:
    if x.is_zero or y.is_zero:
        return None
    return cosine(x, y)


def compare_fields(a: ArtifactViews, b: ArtifactViews) -> dict[FieldKey, float | None]:
    check_compatible(a, b)
    scores = {}
    for kind in VIEW_ORDER:
        for fa, fb in zip(a[kind].fields, b[kind].fields):
            scores[(kind, fa.field_name)] = _score(fa.vector, fb.vector)
    return scores


def fit_function_stats(population: Sequence[ArtifactViews], kind: Population) -> StandardizationStats | None:
    rows = [r for av in population for r in av[ViewKind.functions].descriptor_rows]
    return fit_standardizer(rows, kind) if rows else None


def fit_trace_pca(population: Sequence[ArtifactViews], k: int) -> PCAModel:
    rows = [w for av in population for w in av[ViewKind.traces].windows]
    return pca_fit(rows, k)


def prepare_context(population: Sequence[ArtifactViews], std_population: Population = Population.batch,
                    pca_k: int | None = None) -> ComparisonContext:
    stats = fit_function_stats(population, Population.batch) if std_population is Population.batch else None
    pca = fit_trace_pca(population, pca_k) if pca_k else None
    return ComparisonContext(Population(std_population), stats, pca)


def effective_pooled(av: ArtifactViews, kind: ViewKind, stats: StandardizationStats | None) -> EmbeddingVector:
    """Pooled vector as compared: standardized (functions) and unit length."""
    view = av[kind]
    if view.element_count == 0 or view.pooled.is_zero:
        return EmbeddingVector.zero(view.pooled.dimension, av.encoder_id)
    values = np.array(view.pooled.values)
    if kind is ViewKind.functions and stats is not None:
        m = len(FUNCTION_NUMERIC)
        values[:m] = apply_standardizer(values[:m], stats)
    return l2_normalize(values, av.encoder_id)


def pca_pooled(av: ArtifactViews, model: PCAModel) -> EmbeddingVector:
    view = av[ViewKind.traces]
    if view.pooled.is_zero:
        return EmbeddingVector.zero(model.k, av.encoder_id)
    return l2_normalize(pca_transform(view.pooled.values, model), av.encoder_id)


def _pair_stats(a: ArtifactViews, b: ArtifactViews, context: ComparisonContext) -> StandardizationStats | None:
    if context.population is Population.pair or context.function_stats is None:
        return fit_function_stats([a, b], Population.pair if context.population is Population.pair
                                  else Population.batch)
    return context.function_stats


def compare_views(a: ArtifactViews, b: ArtifactViews,
                  context: ComparisonContext | None = None) -> dict[ViewKind, float | None]:
    check_compatible(a, b)
    context = context or ComparisonContext()
    stats = _pair_stats(a, b, context)
    return {k: _score(effective_pooled(a, k, stats), effective_pooled(b, k, stats)) for k in VIEW_ORDER}


def weighted_mean(view_scores: Mapping[ViewKind, float | None], weights: WeightVector) -> float:
    present = [v for v in VIEW_ORDER if view_scores.get(v) is not None]
    if not present:
        raise NoCommonViews("no view is present on both sides")
    ws = [weights.weights[v] for v in present]
    scores = [view_scores[v] for v in present]
    if all(w == ws[0] for w in ws):
        return math.fsum(scores) / len(scores)
    return math.fsum(w * s for w, s in zip(ws, scores)) / math.fsum(ws)


def _concat_cosine(blocks_a: Sequence[EmbeddingVector], blocks_b: Sequence[EmbeddingVector]) -> tuple[float, list[int]]:
    parts_a, parts_b, zeroed = [], [], []
    for i, (x, y) in enumerate(zip(blocks_a, blocks_b)):
        if x.is_zero or y.is_zero:
            # absent on either side: zero the block on both sides
            parts_a.append(np.zeros(x.dimension))
            parts_b.append(np.zeros(y.dimension))
            zeroed.append(i)
        else:
            parts_a.append(x.values)
            parts_b.append(y.values)
    if len(zeroed) == len(blocks_a):
        raise NoCommonViews("no view is present on both sides")
    return cosine(np.concatenate(parts_a), np.concatenate(parts_b)), zeroed


def global_similarity(a: ArtifactViews, b: ArtifactViews, weights: WeightVector | None = None,
                      context: ComparisonContext | None = None) -> tuple[float, float]:
    br = compare(a, b, weights, context)
    return br.global_cosine, br.weighted_mean


def compare(a: ArtifactViews, b: ArtifactViews, weights: WeightVector | None = None,
            context: ComparisonContext | None = None) -> SimilarityBreakdown:
    check_compatible(a, b)
    weights = weights or WeightVector.uniform()
    context = context or ComparisonContext()
    stats = _pair_stats(a, b, context)

    blocks_a = [effective_pooled(a, k, stats) for k in VIEW_ORDER]
    blocks_b = [effective_pooled(b, k, stats) for k in VIEW_ORDER]
    view_scores = {k: _score(x, y) for k, x, y in zip(VIEW_ORDER, blocks_a, blocks_b)}
    global_cos, zeroed = _concat_cosine(blocks_a, blocks_b)

    global_pca = None
    if context.pca is not None:
        t = VIEW_ORDER.index(ViewKind.traces)
        pa, pb = list(blocks_a), list(blocks_b)
        pa[t], pb[t] = pca_pooled(a, context.pca), pca_pooled(b, context.pca)
        global_pca, _ = _concat_cosine(pa, pb)

    return SimilarityBreakdown(
        artifact_a=a.artifact_id,
        artifact_b=b.artifact_id,
        field_scores=compare_fields(a, b),
        view_scores=view_scores,
        weighted_mean=weighted_mean(view_scores, weights),
        global_cosine=global_cos,
        weights_used=weights if weights.normalized else weights.normalize(),
        encoder_id=a.encoder_id,
        std_population=context.population,
        zeroed_blocks=tuple(VIEW_ORDER[i] for i in zeroed),
        global_cosine_pca=global_pca,
        pca_k=context.pca.k if context.pca is not None else None,
    )


def batch_pairs(views: Sequence[ArtifactViews]) -> list[tuple[ArtifactViews, ArtifactViews]]:
    """All unordered pairs, ordered lexically by (artifact_a, artifact_b)."""
    ids = [v.artifact_id for v in views]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise DuplicateArtifactId(f"artifact ids repeat within the batch: {dupes}")
    ordered = sorted(views, key=lambda v: v.artifact_id)
    return list(combinations(ordered, 2))


def compare_batch(views: Sequence[ArtifactViews], weights: WeightVector | None = None,
                  std_population: Population = Population.batch, pca_k: int | None = None,
                  jobs: int = 1) -> tuple[ComparisonContext, list[SimilarityBreakdown]]:
    pairs = batch_pairs(views)
    for a, b in pairs:
        check_compatible(a, b)
    # two passes: population statistics first, then pairs
    context = prepare_context(views, std_population, pca_k)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(lambda p: compare(p[0], p[1], weights, context), pairs))
    return context, results
