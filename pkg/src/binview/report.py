"""Report documents and chart-ready series, serialized as canonical JSON.

Floats are written with exactly nine decimals (round-half-even on the exact
binary value) and negative zero is printed as zero, so re-rendering the same
inputs gives identical bytes.
"""

from __future__ import annotations

import json
import math
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Any, Mapping

from .comparison import SimilarityBreakdown
from .errors import FormatError
from .registers import FAMILY_ORDER
from .views import FIELD_LAYOUT, VIEW_EVIDENCE, VIEW_ORDER, ArtifactViews, ViewKind

REPORT_FORMAT = "bin2vec-report-v1"
CHARTS_FORMAT = "bin2vec-charts-v1"
BATCH_FORMAT = "bin2vec-batch-v1"

CHART_KINDS = ("bar_fieldwise", "radar_cosine", "radar_trace_coherence_coverage", "bar_registers")

_QUANTUM = Decimal("1e-9")


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    text = format(Decimal(x).quantize(_QUANTUM, rounding=ROUND_HALF_EVEN), "f")
    if text.startswith("-") and Decimal(text) == 0:
        text = text[1:]
    return text


def _scalar(value: Any) -> str:
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=True)
    raise TypeError(f"unsupported value {value!r}")


def canonical_dumps(obj: Any, indent: int = 0) -> str:
    """Deterministic JSON: insertion-ordered keys, scalar lists on one line."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=True)}: {canonical_dumps(v, indent + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (Mapping, list, tuple)) for v in obj):
            return "[" + ", ".join(_scalar(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + canonical_dumps(v, indent + 1) for v in obj) + "\n" + end + "]"
    return _scalar(obj)


def write_canonical(obj: Any) -> bytes:
    return (canonical_dumps(obj) + "\n").encode("ascii")


def breakdown_to_dict(br: SimilarityBreakdown) -> dict:
    return {
        "artifact_a": br.artifact_a,
        "artifact_b": br.artifact_b,
        "encoder_id": br.encoder_id,
        "std_population": br.std_population.value,
        "global_cosine": br.global_cosine,
        "global_cosine_pca": br.global_cosine_pca,
        "pca_k": br.pca_k,
        "weighted_mean": br.weighted_mean,
        "weights_used": br.weights_used.to_dict(),
        "view_scores": {v.value: br.view_scores[v] for v in VIEW_ORDER},
        "field_scores": {
            v.value: {f: br.field_scores[(v, f)] for f in FIELD_LAYOUT[v]} for v in VIEW_ORDER
        },
        "zeroed_blocks": [v.value for v in br.zeroed_blocks],
        "blocks_l2_normalized": True,
    }


def _chart(kind: str, chart_id: str, axes, series: dict, caption: str) -> dict:
    axes = list(axes)
    for key, values in series.items():
        if len(values) != len(axes):
            raise ValueError(f"{chart_id}: series {key} has {len(values)} values for {len(axes)} axes")
    return {"chart_id": chart_id, "chart_kind": kind, "axis_labels": axes, "series": series, "caption": caption}


def trace_coverage(a: ArtifactViews, b: ArtifactViews) -> tuple[float | None, float | None]:
    """Distinct mnemonics seen by each side over distinct mnemonics of the pair."""
    ma, mb = set(a[ViewKind.traces].mnemonics), set(b[ViewKind.traces].mnemonics)
    union = ma | mb
    if not union:
        return None, None
    return (len(ma) / len(union) if ma else None), (len(mb) / len(union) if mb else None)


def build_charts(br: SimilarityBreakdown, a: ArtifactViews, b: ArtifactViews) -> list[dict]:
    sides = [(a.artifact_id, a), (b.artifact_id, b)]
    pair_id = f"{a.artifact_id}|{b.artifact_id}"
    charts = []

    for view in VIEW_ORDER:
        names = FIELD_LAYOUT[view]
        series = {aid: [av[view].field(n).raw_norm for n in names] for aid, av in sides}
        charts.append(_chart(
            "bar_fieldwise", f"bar_fieldwise/{view.value}", names, series,
            f"Field-wise {view.value} comparison: pooled field magnitude before normalization "
            f"(1.0 = all elements agree)",
        ))

    for view in VIEW_ORDER:
        names = FIELD_LAYOUT[view]
        values = [br.field_scores[(view, n)] for n in names]
        gaps = [n for n, v in zip(names, values) if v is None]
        caption = f"Field-wise {view.value} embeddings comparison (cosine similarity)"
        if gaps:
            caption += f"; gaps where a side has no evidence: {', '.join(gaps)}"
        charts.append(_chart("radar_cosine", f"radar_cosine/{view.value}", names, {pair_id: values}, caption))

    trace_names = FIELD_LAYOUT[ViewKind.traces]
    cov = dict(zip((a.artifact_id, b.artifact_id), trace_coverage(a, b)))
    series, missing = {}, []
    for aid, av in sides:
        tv = av[ViewKind.traces]
        if tv.element_count == 0:
            missing.append(aid)
            continue
        series[aid] = [tv.coherence[n] * cov[aid] for n in trace_names]
    caption = "Field-wise trace embeddings comparison (coherence x coverage)"
    if missing:
        caption += f"; no trace evidence for {', '.join(dict.fromkeys(missing))}, series omitted"
    charts.append(_chart("radar_trace_coherence_coverage", "radar_trace_coherence_coverage/traces",
                         trace_names, series, caption))

    families = [f.value for f in FAMILY_ORDER]
    series, missing = {}, []
    for aid, av in sides:
        rv = av[ViewKind.registers]
        if rv.element_count == 0:
            missing.append(aid)
            continue
        series[aid] = list(rv.channels["update_frequency"])
    caption = "Register-wise comparison: update frequency per canonical family"
    if missing:
        caption += f"; no register activity for {', '.join(dict.fromkeys(missing))}, series omitted"
    charts.append(_chart("bar_registers", "bar_registers/registers", families, series, caption))
    return charts


def provenance_index(*sides: ArtifactViews) -> dict:
    index = {}
    for av in sides:
        for evidence, tags in av.provenance.items():
            for i, tag in enumerate(tags):
                index[f"{av.artifact_id}/{evidence}/{i}"] = {
                    "source_tool": tag.source_tool.value,
                    "source_file": tag.source_file,
                    "record_index": tag.record_index,
                }
    return index


def render_report(br: SimilarityBreakdown, a: ArtifactViews, b: ArtifactViews,
                  config_echo: Mapping | None = None) -> dict:
    return {
        "format_version": REPORT_FORMAT,
        "breakdown": breakdown_to_dict(br),
        "charts": build_charts(br, a, b),
        "view_evidence": {v.value: VIEW_EVIDENCE[v] for v in VIEW_ORDER},
        "provenance_index": provenance_index(a, b),
        "config_echo": dict(config_echo or {}),
    }


def charts_document(report: Mapping) -> dict:
    if report.get("format_version") != REPORT_FORMAT:
        raise FormatError(f"expected a {REPORT_FORMAT} document, got {report.get('format_version')!r}")
    charts = report["charts"]
    for chart in charts:
        if chart.get("chart_kind") not in CHART_KINDS:
            raise FormatError(f"unknown chart kind {chart.get('chart_kind')!r}")
        for key, values in chart["series"].items():
            if len(values) != len(chart["axis_labels"]):
                raise FormatError(f"{chart['chart_id']}: series {key} length differs from its axes")
    br = report["breakdown"]
    return {"format": CHARTS_FORMAT, "artifact_a": br["artifact_a"], "artifact_b": br["artifact_b"],
            "charts": charts}
