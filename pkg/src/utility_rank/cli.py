"""Batch CLI for the utility-aware passage ranking pipeline.

Exit codes: 0 success, 1 validation error, 2 provider error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import annotate, corpus, pipeline, report, scoring, trace
from .errors import ProviderError, ValidationError


class Parser(argparse.ArgumentParser):
    """ArgumentParser that exits 1 (validation) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common_flags() -> Parser:
    common = Parser(add_help=False)
    common.add_argument("--config", help="TOML/JSON run-config file")
    common.add_argument("--mock", help="canonical JSONL used as the mock-provider fixture")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--concurrency", type=int, help="max in-flight provider requests")
    return common


def build_parser() -> Parser:
    common = _common_flags()
    parser = Parser(prog="utility-rank", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("ingest", parents=[common], help="normalize a dataset into canonical JSONL")
    p.add_argument("--format", required=True, choices=corpus.FORMATS)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)

    p = sub.add_parser("trace", parents=[common], help="generate reasoning traces")
    p.add_argument("--in", dest="input", required=True, help="canonical JSONL")
    p.add_argument("--out", dest="output", required=True, help="trace JSONL")

    p = sub.add_parser("annotate", parents=[common], help="annotate passage utility scores")
    p.add_argument("--in", dest="input", required=True, help="canonical JSONL")
    p.add_argument("--traces", help="trace JSONL (required unless --oracle)")
    p.add_argument("--out", dest="output", required=True, help="annotation JSONL")
    p.add_argument("--oracle", action="store_true", help="gold-derived 5/1 annotations")

    p = sub.add_parser("export-train", parents=[common], help="export training data")
    p.add_argument("--in", dest="input", required=True, help="canonical JSONL")
    p.add_argument("--annotations", required=True, help="annotation JSONL")
    p.add_argument("--mode", required=True, choices=("pointwise", "listwise"))
    p.add_argument("--out", dest="output", required=True)

    p = sub.add_parser(
        "export-pairs", parents=[common],
        help="export {question_id,passage_id,question,passage} rows for an external scorer",
    )
    p.add_argument("--in", dest="input", required=True, help="canonical JSONL")
    p.add_argument("--out", dest="output", required=True)

    p = sub.add_parser("rerank", parents=[common], help="rerank candidates under one scorer")
    p.add_argument("--scorer", required=True, choices=scoring.SCORER_NAMES)
    p.add_argument("--scores", help="external score JSONL (scorer=external)")
    p.add_argument("--in", dest="input", required=True, help="canonical JSONL")
    p.add_argument("--out", dest="output", required=True, help="ranked JSONL")

    p = sub.add_parser("answer", parents=[common], help="answer questions from top-k ranked passages")
    p.add_argument("--in", dest="input", required=True, help="canonical JSONL")
    p.add_argument("--ranked", required=True, help="ranked JSONL")
    p.add_argument("--out", dest="output", required=True, help="answer JSONL")
    p.add_argument("--k", type=int, default=5, help="passages fed to the answerer")

    p = sub.add_parser("eval", parents=[common], help="evaluate scorers and write report files")
    p.add_argument("--in", dest="input", required=True, help="canonical JSONL")
    p.add_argument("--scorer", action="append", required=True, choices=scoring.SCORER_NAMES,
                   help="repeatable; one report row per scorer")
    p.add_argument("--scores", help="external score JSONL (scorer=external)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--label", help="method label override (single scorer only)")
    p.add_argument("--answer-k", type=int, default=5)
    p.add_argument("--no-figure", action="store_true", help="skip the report PNG")

    p = sub.add_parser("report", parents=[common], help="re-render a report JSON")
    p.add_argument("--in", dest="input", required=True, help="report.json")
    p.add_argument("--out-dir", help="write report.txt/.csv/.png here")
    p.add_argument("--no-figure", action="store_true")

    p = sub.add_parser("synthesize", parents=[common], help="traces + annotations + training files")
    p.add_argument("--in", dest="input", required=True, help="canonical JSONL")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--target-pairs", type=int, help="sample questions until this many pairs")

    return parser


def _run_config(args, **extra) -> pipeline.RunConfig:
    data = dict(pipeline.load_config_file(args.config)) if args.config else {}
    if getattr(args, "input", None):
        data["dataset"] = args.input
    if args.mock:
        data["mock"] = args.mock
    if args.seed is not None:
        data["seed"] = args.seed
    if args.concurrency is not None:
        data.setdefault("provider", {})
        data["provider"] = {**data["provider"], "concurrency": args.concurrency}
    data.update({k: v for k, v in extra.items() if v is not None})
    return pipeline.config_from_dict(data)


def cmd_ingest(args) -> int:
    dataset = corpus.load_dataset(args.input, args.format)
    corpus.write_canonical(dataset, args.output)
    print(f"ingested {len(dataset)} questions ({dataset.total_passages()} passages) -> {args.output}")
    return 0


def cmd_trace(args) -> int:
    config = _run_config(args)
    dataset = pipeline.load_tagged_dataset(config)
    gateway = pipeline.build_gateway(config)
    traces, failures = trace.generate_traces(
        dataset, gateway, concurrency=config.provider.concurrency
    )
    trace.write_traces(traces, args.output)
    print(f"traced {len(traces)}/{len(dataset)} questions -> {args.output}")
    for qid, reason in failures:
        print(f"trace failed for {qid}: {reason}", file=sys.stderr)
    return 0


def cmd_annotate(args) -> int:
    config = _run_config(args)
    dataset = pipeline.load_tagged_dataset(config)
    annotations: list[annotate.UtilityAnnotation] = []
    failures = []
    if args.oracle:
        for record in dataset:
            annotations.extend(annotate.oracle_annotations(record))
    else:
        if not args.traces:
            raise ValidationError("annotate needs --traces (or --oracle)")
        traced = trace.read_traces(args.traces)
        gateway = pipeline.build_gateway(config)
        for record in dataset:
            if record.question_id not in traced:
                failures.append((record.question_id, "*", "no trace"))
                continue
            result = annotate.annotate_candidates(
                record, traced[record.question_id], gateway,
                concurrency=config.provider.concurrency,
            )
            annotations.extend(result.annotations)
            failures.extend((f.question_id, f.passage_id, f.reason) for f in result.failures)
    count = annotate.write_annotations(annotations, args.output)
    print(f"wrote {count} annotations -> {args.output}")
    for qid, pid, reason in failures:
        print(f"annotation failed for ({qid}, {pid}): {reason}", file=sys.stderr)
    return 0


def cmd_export_train(args) -> int:
    dataset = corpus.tag_dataset(corpus.load_dataset(args.input, "canonical"))
    annotations = annotate.read_annotations(args.annotations)
    training = annotate.export_training_data(annotations, dataset, args.mode, args.output)
    print(f"wrote {training.example_count} {training.mode} rows -> {training.path}")
    return 0


def cmd_export_pairs(args) -> int:
    dataset = corpus.load_dataset(args.input, "canonical")
    count = annotate.write_scoring_pairs(dataset, args.output)
    print(f"wrote {count} (question, passage) pairs -> {args.output}")
    return 0


def cmd_rerank(args) -> int:
    config = _run_config(args, scorers=(args.scorer,), scores=args.scores)
    ranked = pipeline.rerank_dataset(config, args.scorer)
    scoring.write_ranked(ranked, args.scorer, args.output)
    print(f"reranked {len(ranked)} questions with {args.scorer} -> {args.output}")
    return 0


def cmd_answer(args) -> int:
    config = _run_config(args)
    dataset = pipeline.load_tagged_dataset(config)
    ranked = scoring.read_ranked(args.ranked)
    gateway = pipeline.build_gateway(config)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with out.open("w", encoding="utf-8") as fh:
        for record in dataset:
            entry = ranked.get(record.question_id)
            if entry is None:
                raise ValidationError(f"no ranking for question {record.question_id!r}")
            top = [record.candidates.by_id(pid) for pid in entry.order[: args.k]]
            answer = pipeline.generate_answer(
                record.question_text, top, gateway, question_id=record.question_id
            )
            fh.write(json.dumps({"question_id": record.question_id, "answer": answer},
                                ensure_ascii=False) + "\n")
            count += 1
    print(f"answered {count} questions -> {args.output}")
    return 0


def cmd_eval(args) -> int:
    config = _run_config(
        args,
        scorers=tuple(args.scorer),
        scores=args.scores,
        label=args.label,
        answer_k=args.answer_k,
        output_dir=args.out_dir,
        figure=not args.no_figure,
    )
    reports = pipeline.run_eval(config)
    paths = report.write_report_files(
        reports, config.output_dir, figure=config.figure
    )
    sys.stdout.write(report.render_report(reports))
    print(f"report files: {', '.join(str(p) for p in paths.values())}")
    return 0


def cmd_report(args) -> int:
    reports = report.load_report(args.input)
    sys.stdout.write(report.render_report(reports))
    if args.out_dir:
        paths = report.write_report_files(reports, args.out_dir, figure=not args.no_figure)
        print(f"report files: {', '.join(str(p) for p in paths.values())}")
    return 0


def cmd_synthesize(args) -> int:
    config = _run_config(args, output_dir=args.out_dir, target_pairs=args.target_pairs)
    result = pipeline.run_synthesis(config)
    m = result.manifest
    print(
        f"synthesized {m['traces']}/{m['questions']} traces, {m['annotations']} annotations, "
        f"{m['rows']['pointwise']} pointwise rows, {m['rows']['listwise']} listwise rows "
        f"-> {config.output_dir}"
    )
    if m["trace_failures"] or m["annotation_failures"]:
        print(
            f"failures: {len(m['trace_failures'])} traces, "
            f"{len(m['annotation_failures'])} annotations (see manifest.json)",
            file=sys.stderr,
        )
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "trace": cmd_trace,
    "annotate": cmd_annotate,
    "export-train": cmd_export_train,
    "export-pairs": cmd_export_pairs,
    "rerank": cmd_rerank,
    "answer": cmd_answer,
    "eval": cmd_eval,
    "report": cmd_report,
    "synthesize": cmd_synthesize,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
