"""Command-line front end: inspect, ingest, embed, compare, batch, report.

Exit codes: 0 success, 1 input or validation error (JSON object on stderr),
2 internal error. Every output file is written atomically.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .comparison import WeightVector, compare, compare_batch, prepare_context
from .encoder import HASHING_ENCODER_ID, VECTORS_FORMAT, Encoder, EncoderConfig, ExternalEncoder, load_vector_table
from .errors import BinviewError, FormatError
from .ingest import BUNDLE_FORMAT, STATIC_FORMAT, TRACE_FORMAT, bundle_from_dict, bundle_to_dict, merge_artifact, parse_static_export, parse_trace_log
from .numerics import Population
from .pe_inspect import detect_bitness
from .report import BATCH_FORMAT, CHARTS_FORMAT, REPORT_FORMAT, charts_document, render_report, write_canonical
from .views import DEFAULT_NGRAM, FIELD_LAYOUT_VERSION, TRACE_WINDOW, VIEWS_FORMAT, build_views, views_from_dict, views_to_dict

SEED_ENV = "BIN2VEC_SEED"
DEFAULT_PCA_K = 4

FORMATS = {
    "static": STATIC_FORMAT,
    "trace": TRACE_FORMAT,
    "bundle": BUNDLE_FORMAT,
    "vectors": VECTORS_FORMAT,
    "views": VIEWS_FORMAT,
    "report": REPORT_FORMAT,
    "charts": CHARTS_FORMAT,
    "batch": BATCH_FORMAT,
}


@dataclass
class RunConfig:
    seed: int = 42
    dimension: int = 384
    hashes_per_token: int = 4
    ngram_n: int = DEFAULT_NGRAM
    pca_k: int | None = None
    std_population: Population = Population.batch
    weights: WeightVector = field(default_factory=WeightVector.uniform)
    encoder: str = "hashing"
    vectors_path: str | None = None

    def echo(self, encoder_id: str) -> dict:
        return {
            "tool_version": __version__,
            "formats": dict(FORMATS),
            "encoder": self.encoder,
            "encoder_id": encoder_id,
            "vectors_path": self.vectors_path,
            "seed": self.seed,
            "dimension": self.dimension,
            "hashes_per_token": self.hashes_per_token,
            "ngram_n": self.ngram_n,
            "trace_window": TRACE_WINDOW,
            "field_layout": FIELD_LAYOUT_VERSION,
            "pca_k": self.pca_k,
            "std_population": self.std_population.value,
            "weights": self.weights.to_dict(),
        }


def atomic_write(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, ensure_ascii=True, separators=(",", ":")) + "\n").encode("ascii")


def _load_json(path: str, what: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: not a valid {what} JSON document ({exc})", file=path) from None


def _default_seed() -> int:
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 42
    try:
        return int(env, 0)
    except ValueError:
        raise BinviewError(f"{SEED_ENV}={env!r} is not an integer") from None


# subcommands

def cmd_inspect(args) -> int:
    raw = Path(args.file).read_bytes()
    ident = detect_bitness(raw, args.artifact_id or Path(args.file).stem)
    print(json.dumps({"artifact_id": ident.artifact_id, "bitness": ident.bitness.value,
                      "machine_code": ident.machine_code}))
    return 0


def cmd_ingest(args) -> int:
    if not args.static and not args.trace:
        raise BinviewError("ingest needs --static and/or --trace")
    identity = detect_bitness(Path(args.binary).read_bytes(), args.artifact_id or Path(args.binary).stem)
    static = parse_static_export(args.static) if args.static else None
    trace = parse_trace_log(args.trace, identity.bitness) if args.trace else None
    bundle = merge_artifact(identity, static, trace)
    atomic_write(args.out, _json_bytes(bundle_to_dict(bundle)))
    return 0


def _encoder_from_args(args) -> Encoder:
    cfg = EncoderConfig(HASHING_ENCODER_ID, args.dim, args.seed, args.hashes_per_token)
    if args.encoder == "external":
        if not args.vectors:
            raise BinviewError("--encoder external requires --vectors FILE")
        return ExternalEncoder(load_vector_table(args.vectors), Path(args.vectors).stem, cfg)
    return Encoder(cfg)


def cmd_embed(args) -> int:
    bundle = bundle_from_dict(_load_json(args.bundle, "bundle"))
    views = build_views(bundle, _encoder_from_args(args), args.ngram_n)
    atomic_write(args.out, _json_bytes(views_to_dict(views)))
    return 0


def _run_config(args, encoder_cfg: EncoderConfig, ngram_n: int, pca_k: int | None) -> RunConfig:
    encoder = "external" if encoder_cfg.encoder_id.startswith("external:") else "hashing"
    return RunConfig(seed=encoder_cfg.seed, dimension=encoder_cfg.dimension,
                     hashes_per_token=encoder_cfg.hashes_per_token, ngram_n=ngram_n, pca_k=pca_k,
                     std_population=Population(args.std_population),
                     weights=WeightVector.parse(args.weights) if args.weights else WeightVector.uniform(),
                     encoder=encoder)


def _pca_k(args, views) -> int | None:
    if args.pca_k:
        return args.pca_k
    if args.pca:
        windows = sum(len(v["traces"].windows) for v in views)
        return max(1, min(DEFAULT_PCA_K, windows - 1))
    return None


def cmd_compare(args) -> int:
    a = views_from_dict(_load_json(args.a, "views"))
    b = views_from_dict(_load_json(args.b, "views"))
    pca_k = _pca_k(args, [a, b])
    cfg = _run_config(args, a.encoder, a.ngram_n, pca_k)
    context = prepare_context([a, b], cfg.std_population, pca_k)
    br = compare(a, b, cfg.weights, context)
    report = render_report(br, a, b, cfg.echo(a.encoder_id))
    atomic_write(args.out, write_canonical(report))
    return 0


def _safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", text)


def cmd_batch(args) -> int:
    views = [views_from_dict(_load_json(p, "views")) for p in args.views]
    if len(views) < 2:
        raise BinviewError("batch needs at least two views files")
    pca_k = _pca_k(args, views)
    cfg = _run_config(args, views[0].encoder, views[0].ngram_n, pca_k)
    _, results = compare_batch(views, cfg.weights, cfg.std_population, pca_k, jobs=args.jobs)

    by_id = {v.artifact_id: v for v in views}
    ids = sorted(by_id)
    echo = cfg.echo(views[0].encoder_id)
    reports = [render_report(br, by_id[br.artifact_a], by_id[br.artifact_b], echo) for br in results]

    matrix = {key: [[1.0 if i == j else None for j in ids] for i in ids]
              for key in ("global_cosine", "weighted_mean")}
    pos = {aid: i for i, aid in enumerate(ids)}
    for br in results:
        i, j = pos[br.artifact_a], pos[br.artifact_b]
        for key, value in (("global_cosine", br.global_cosine), ("weighted_mean", br.weighted_mean)):
            matrix[key][i][j] = matrix[key][j][i] = value

    if args.reports_dir:
        for rep, br in zip(reports, results):
            name = f"{_safe_name(br.artifact_a)}__{_safe_name(br.artifact_b)}.json"
            atomic_write(Path(args.reports_dir) / name, write_canonical(rep))

    doc = {"format": BATCH_FORMAT, "artifacts": ids, **matrix,
           "pairs": [[br.artifact_a, br.artifact_b] for br in results],
           "config_echo": echo, "reports": reports}
    atomic_write(args.out, write_canonical(doc))
    return 0


def cmd_report(args) -> int:
    report = _load_json(args.report, "report")
    atomic_write(args.charts_out, write_canonical(charts_document(report)))
    return 0


def _add_compare_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--weights", help="per-view weights, e.g. functions=0.3,traces=0.1")
    p.add_argument("--pca", action="store_true", help=f"add the PCA-reduced trace variant (k={DEFAULT_PCA_K})")
    p.add_argument("--pca-k", type=int, help="PCA target dimension for trace windows")
    p.add_argument("--std-population", choices=[p.value for p in Population], default="batch")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="binview", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="store_true", help="print tool and on-disk format versions")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("inspect", help="classify a PE file as PE32 or PE32+")
    p.add_argument("file")
    p.add_argument("--artifact-id")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("ingest", help="merge static export and trace into a bundle")
    p.add_argument("--binary", required=True)
    p.add_argument("--static")
    p.add_argument("--trace")
    p.add_argument("--artifact-id", help="defaults to the binary's file stem")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("embed", help="build the five view embeddings of a bundle")
    p.add_argument("bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help=f"hash seed (falls back to ${SEED_ENV}, then 42)")
    p.add_argument("--dim", type=int, default=384)
    p.add_argument("--hashes-per-token", type=int, default=4)
    p.add_argument("--encoder", choices=["hashing", "external"], default="hashing")
    p.add_argument("--vectors", help=f"{VECTORS_FORMAT} token vector file")
    p.add_argument("--ngram-n", type=int, default=DEFAULT_NGRAM)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("compare", help="score two views files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--out", required=True)
    _add_compare_options(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("batch", help="score every pair among N views files")
    p.add_argument("views", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--reports-dir")
    p.add_argument("--jobs", type=int, default=1)
    _add_compare_options(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("report", help="extract chart series from a report")
    p.add_argument("report")
    p.add_argument("--charts-out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.version:
        print(json.dumps({"version": __version__, "formats": FORMATS}))
        return 0
    if not args.command:
        parser.print_usage(sys.stderr)
        return 1
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        return args.func(args)
    except BinviewError as exc:
        print(json.dumps(exc.to_json()), file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, OSError) and exc.filename:
            err["file"] = str(exc.filename)
        print(json.dumps(err), file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(json.dumps({"error": "InternalError", "message": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
