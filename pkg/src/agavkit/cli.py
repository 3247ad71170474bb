"""Command line entry points.

Every analysis subcommand emits a single JSON report to stdout (or, with
--out, atomically to a file). Reports carry the tool version, the seed, and
sha256 digests of every input file, and contain no timestamps, so rerunning
a command on identical inputs yields byte-identical output.

Flags can also be supplied through AGAVKIT_* environment variables
(AGAVKIT_SEED, AGAVKIT_BACKEND, ...); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from collections import Counter
from pathlib import Path

from . import __version__
from .backends import BackendError, HttpBackendConfig, backend_from_spec
from .corpus import (
    corpus_sha256,
    read_source_items_jsonl,
    synthesize_corpus,
    write_corpus_jsonl,
)
from .harness import (
    build_pair_questions,
    evaluate_pair_multi_input,
    evaluate_pair_single_input,
    evaluate_scoring,
    random_baseline,
)
from .manifests import file_sha256, read_groups_jsonl, read_items_jsonl
from .study import StudyService, StudyError, load_study_config
from .subjective import (
    DIMENSIONS,
    build_matrix,
    compute_mos,
    inter_dimension_srcc,
    krippendorff_alpha,
    read_ratings_jsonl,
    split_half_srcc,
    write_mos_jsonl,
    zscore_normalize,
)
from .webapp import create_app


def _env(name: str) -> str | None:
    return os.environ.get(f"AGAVKIT_{name}")


def _env_int(name: str, fallback: int) -> int:
    raw = _env(name)
    if raw is None:
        return fallback
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"AGAVKIT_{name} must be an integer, got {raw!r}") from None


def _env_float(name: str, fallback: float) -> float:
    raw = _env(name)
    if raw is None:
        return fallback
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"AGAVKIT_{name} must be a number, got {raw!r}") from None


def _add_path_flag(parser: argparse.ArgumentParser, flag: str, env: str, help_text: str) -> None:
    default = _env(env)
    parser.add_argument(flag, default=default, required=default is None, help=help_text)


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _emit_report(report: dict, out: str | None) -> None:
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if out:
        _write_atomic(Path(out), text)
    else:
        sys.stdout.write(text)


def _envelope(command: str, *, seed: int | None = None, inputs: dict | None = None) -> dict:
    report: dict = {
        "command": command,
        "tool": {"name": "agavkit", "version": __version__},
    }
    if seed is not None:
        report["seed"] = seed
    if inputs:
        report["inputs"] = {
            name: {"path": str(p), "sha256": file_sha256(p)}
            for name, p in sorted(inputs.items())
        }
    return report


def _parse_targets(text: str) -> dict[str, int]:
    targets: dict[str, int] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        name, sep, value = part.partition("=")
        if not sep:
            raise ValueError(f"bad target {part!r}; expected scenario=count")
        try:
            targets[name.strip()] = int(value)
        except ValueError:
            raise ValueError(f"bad target count {value!r} for {name.strip()!r}") from None
    if not targets:
        raise ValueError("no corpus targets given")
    return targets


def _build_backend(args, *, items=None, groups=None):
    http_config = None
    if args.backend.strip() == "http":
        if not args.base_url:
            raise ValueError("--base-url (or AGAVKIT_BASE_URL) is required with --backend http")
        http_config = HttpBackendConfig(
            base_url=args.base_url,
            timeout=args.timeout,
            max_retries=args.retries,
        )
    return backend_from_spec(
        args.backend, seed=args.seed, items=items, groups=groups, http_config=http_config
    )


# -- subcommands -------------------------------------------------------------


def cmd_synth_corpus(args) -> int:
    sources = read_source_items_jsonl(args.sources)
    targets = _parse_targets(args.targets)
    result = synthesize_corpus(sources, targets, seed=args.seed, out_dir=args.media_dir)
    write_corpus_jsonl(args.manifest_out, result.pairs)

    report = _envelope("synth-corpus", seed=args.seed, inputs={"sources": args.sources})
    report.update(
        {
            "pairs_total": len(result.pairs),
            "per_scenario": dict(sorted(Counter(p.scenario for p in result.pairs).items())),
            "per_label": dict(sorted(Counter(p.label for p in result.pairs).items())),
            "per_provenance": dict(sorted(Counter(p.provenance for p in result.pairs).items())),
            "skipped_swaps": [
                {"item_id": s.item_id, "reason": s.reason} for s in result.skipped
            ],
            "corpus_sha256": corpus_sha256(result.pairs),
            "manifest_path": str(args.manifest_out),
            "media_dir": str(args.media_dir),
        }
    )
    _emit_report(report, args.out)
    return 0


def cmd_aggregate_mos(args) -> int:
    records = read_ratings_jsonl(args.ratings)
    matrix = build_matrix(records)
    normalized = zscore_normalize(matrix)
    mos = compute_mos(normalized.matrix)
    if args.mos_out:
        write_mos_jsonl(args.mos_out, mos)

    report = _envelope("aggregate-mos", inputs={"ratings": args.ratings})
    report.update(
        {
            "subjects": len(matrix.subjects),
            "items": len(matrix.items),
            "ratings_total": len(records),
            "exclusions": [
                {"subject_id": e.subject_id, "dimension": e.dimension, "reason": e.reason}
                for e in normalized.exclusions
            ],
            "mos": [r.to_json_dict() for r in mos],
        }
    )
    if args.mos_out:
        report["mos_path"] = str(args.mos_out)
    _emit_report(report, args.out)
    return 0


def cmd_reliability(args) -> int:
    records = read_ratings_jsonl(args.ratings)
    matrix = build_matrix(records)
    normalized = zscore_normalize(matrix)
    mos = compute_mos(normalized.matrix)

    split_half = {}
    for dim in DIMENSIONS:
        result = split_half_srcc(
            normalized.matrix.grid(dim), repetitions=args.repetitions, seed=args.seed
        )
        split_half[dim] = {
            "mean": result.mean,
            "per_repetition": list(result.per_repetition),
        }

    report = _envelope("reliability", seed=args.seed, inputs={"ratings": args.ratings})
    report.update(
        {
            "alpha": {dim: krippendorff_alpha(matrix.grid(dim)) for dim in DIMENSIONS},
            "split_half_srcc": split_half,
            "inter_dimension_srcc": inter_dimension_srcc(mos),
            "exclusions": [
                {"subject_id": e.subject_id, "dimension": e.dimension, "reason": e.reason}
                for e in normalized.exclusions
            ],
            "subjects": len(matrix.subjects),
            "items": len(matrix.items),
        }
    )
    _emit_report(report, args.out)
    return 0


def cmd_eval_score(args) -> int:
    items = read_items_jsonl(args.manifest)
    backend = _build_backend(args, items=items)
    result = evaluate_scoring(backend, items, k=args.k, seed=args.seed, workers=args.workers)

    report = _envelope("eval-score", seed=args.seed, inputs={"manifest": args.manifest})
    report["backend"] = args.backend
    report.update(result.to_json_dict())
    _emit_report(report, args.out)
    return 0 if result.valid else 1


def cmd_eval_pair(args) -> int:
    groups = read_groups_jsonl(args.groups)
    items = [item for group in groups for item in group.items]
    backend = _build_backend(args, items=items, groups=groups)
    if args.protocol == "multi":
        questions = build_pair_questions(groups, seed=args.seed)
        result = evaluate_pair_multi_input(backend, questions, workers=args.workers)
    else:
        result = evaluate_pair_single_input(backend, groups, workers=args.workers)

    report = _envelope("eval-pair", seed=args.seed, inputs={"groups": args.groups})
    report["backend"] = args.backend
    report["random_baseline"] = random_baseline(groups)
    report.update(result.to_json_dict())
    _emit_report(report, args.out)
    clean = result.violations == 0 and result.failures == 0
    return 0 if clean else 1


def cmd_random_baseline(args) -> int:
    groups = read_groups_jsonl(args.groups)
    report = _envelope("random-baseline", inputs={"groups": args.groups})
    report.update(
        {
            "baseline": random_baseline(groups),
            "groups": len(groups),
            "questions": sum(len(g.items) for g in groups),
        }
    )
    _emit_report(report, args.out)
    return 0


def _service_from_args(args) -> StudyService:
    config = load_study_config(args.config, media_base=args.media_root)
    storage = args.storage or config.storage_dir
    if storage is None:
        raise ValueError("config has no storage_dir; pass --storage")
    return StudyService(config, storage)


def cmd_serve(args) -> int:
    import uvicorn

    service = _service_from_args(args)
    ui_dir = Path(args.ui) if args.ui else None
    app = create_app(service, ui_dir=ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_export(args) -> int:
    service = _service_from_args(args)
    rows = [rec.to_json_dict() for rec in service.export_ratings()]
    if args.format == "json":
        text = json.dumps(rows, sort_keys=True, indent=2) + "\n"
    else:
        text = "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows)
    if args.out:
        _write_atomic(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


# -- parser ------------------------------------------------------------------


def _add_seed(parser) -> None:
    parser.add_argument("--seed", type=int, default=_env_int("SEED", 0))


def _add_out(parser) -> None:
    parser.add_argument("--out", default=_env("OUT"), help="write the report here instead of stdout")


def _add_backend_flags(parser) -> None:
    _add_path_flag(parser, "--backend", "BACKEND", "backend spec, e.g. oracle-triple or http")
    parser.add_argument("--workers", type=int, default=_env_int("WORKERS", 1))
    parser.add_argument("--base-url", default=_env("BASE_URL"))
    parser.add_argument("--timeout", type=float, default=_env_float("TIMEOUT", 10.0))
    parser.add_argument("--retries", type=int, default=_env_int("RETRIES", 2))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agavkit",
        description="Benchmark toolkit for scoring AI-generated audio-visual content.",
    )
    parser.add_argument("--version", action="version", version=f"agavkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-corpus", help="build a balanced instruction corpus")
    _add_path_flag(p, "--sources", "SOURCES", "source items manifest (jsonl)")
    _add_path_flag(p, "--targets", "TARGETS", "per-scenario counts, e.g. audio-video=16,music-text=8")
    p.add_argument("--media-dir", default=_env("MEDIA_DIR") or "reversed_media",
                   help="directory for generated reversed audio")
    p.add_argument("--manifest-out", default=_env("MANIFEST_OUT") or "pairs.jsonl",
                   help="where to write the corpus manifest")
    _add_seed(p)
    _add_out(p)
    p.set_defaults(func=cmd_synth_corpus)

    p = sub.add_parser("aggregate-mos", help="normalize ratings and compute per-item scores")
    _add_path_flag(p, "--ratings", "RATINGS", "ratings manifest (jsonl)")
    p.add_argument("--mos-out", default=_env("MOS_OUT"), help="also write per-item scores as jsonl")
    _add_out(p)
    p.set_defaults(func=cmd_aggregate_mos)

    p = sub.add_parser("reliability", help="agreement and split-half consistency of ratings")
    _add_path_flag(p, "--ratings", "RATINGS", "ratings manifest (jsonl)")
    p.add_argument("--repetitions", type=int, default=_env_int("REPETITIONS", 10))
    _add_seed(p)
    _add_out(p)
    p.set_defaults(func=cmd_reliability)

    p = sub.add_parser("eval-score", help="k-fold correlation of a backend against ground truth")
    _add_path_flag(p, "--manifest", "MANIFEST", "items manifest with ground truth (jsonl)")
    p.add_argument("--k", type=int, default=_env_int("K", 5))
    _add_backend_flags(p)
    _add_seed(p)
    _add_out(p)
    p.set_defaults(func=cmd_eval_score)

    p = sub.add_parser("eval-pair", help="matching accuracy over candidate groups")
    _add_path_flag(p, "--groups", "GROUPS", "pair groups manifest (jsonl)")
    p.add_argument("--protocol", choices=("multi", "single"),
                   default=_env("PROTOCOL") or "multi")
    _add_backend_flags(p)
    _add_seed(p)
    _add_out(p)
    p.set_defaults(func=cmd_eval_pair)

    p = sub.add_parser("random-baseline", help="expected accuracy of uniform guessing")
    _add_path_flag(p, "--groups", "GROUPS", "pair groups manifest (jsonl)")
    _add_out(p)
    p.set_defaults(func=cmd_random_baseline)

    p = sub.add_parser("serve", help="run the rating study web service")
    _add_path_flag(p, "--config", "CONFIG", "study config (json)")
    p.add_argument("--storage", default=_env("STORAGE"), help="override the event log directory")
    p.add_argument("--media-root", default=_env("MEDIA_ROOT"),
                   help="base directory for relative media paths in the config")
    p.add_argument("--host", default=_env("HOST") or "127.0.0.1")
    p.add_argument("--port", type=int, default=_env_int("PORT", 8000))
    p.add_argument("--ui", default=_env("UI"),
                   help="directory of static web UI files to serve at /")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export", help="dump latest-wins ratings from a study event log")
    _add_path_flag(p, "--config", "CONFIG", "study config (json)")
    p.add_argument("--storage", default=_env("STORAGE"), help="override the event log directory")
    p.add_argument("--media-root", default=_env("MEDIA_ROOT"))
    p.add_argument("--format", choices=("ndjson", "json"), default=_env("FORMAT") or "ndjson")
    _add_out(p)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, OSError, BackendError, StudyError) as exc:
        print(f"agavkit: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
