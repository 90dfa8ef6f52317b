"""End-to-end orchestration: eval runs, answer generation, data synthesis."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from . import annotate, corpus, metrics, scoring, trace
from .errors import UtilityRankError, ValidationError
from .gateway import (
    ChatRequest,
    GatewayConfig,
    MockFixture,
    Provider,
    build_live_provider,
    mock_provider,
)

log = logging.getLogger("utility_rank")


@dataclass
class RunConfig:
    """Settings for one batch run (config file merged with CLI flags)."""

    dataset: Optional[Path] = None
    scorers: tuple[str, ...] = ("bm25",)
    cutoffs: tuple[int, ...] = metrics.DEFAULT_CUTOFFS
    answer_k: int = 5
    mock_fixture: Optional[Path] = None
    provider: GatewayConfig = field(default_factory=GatewayConfig)
    output_dir: Path = Path("run-output")
    seed: int = 0
    target_pairs: Optional[int] = None
    scores_path: Optional[Path] = None
    label: Optional[str] = None
    figure: bool = True

    def __post_init__(self):
        if self.answer_k < 1:
            raise ValidationError("answer_k must be >= 1")
        if not self.scorers:
            raise ValidationError("at least one scorer must be selected")
        if self.label is not None and len(self.scorers) > 1:
            raise ValidationError("--label only applies to a single-scorer run")


def load_config_file(path: str | Path) -> dict:
    """Parse a TOML or JSON run-config file into a flat dict."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    raw = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: malformed JSON config: {exc}") from exc
    else:
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
            import tomli as tomllib
        try:
            data = tomllib.loads(raw)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"{path}: malformed TOML config: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: config must be a table/object")
    return data


def config_from_dict(data: Mapping) -> RunConfig:
    try:
        provider = GatewayConfig(**data.get("provider", {}))
    except TypeError as exc:
        raise ValidationError(f"bad provider config: {exc}") from exc
    known = {
        "dataset", "scorers", "cutoffs", "answer_k", "mock", "output_dir",
        "seed", "target_pairs", "scores", "label", "figure", "provider",
    }
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    scorers = data.get("scorers") or ("bm25",)
    if isinstance(scorers, str):
        scorers = (scorers,)
    return RunConfig(
        dataset=Path(data["dataset"]) if data.get("dataset") else None,
        scorers=tuple(scorers),
        cutoffs=tuple(data.get("cutoffs") or metrics.DEFAULT_CUTOFFS),
        answer_k=int(data.get("answer_k", 5)),
        mock_fixture=Path(data["mock"]) if data.get("mock") else None,
        provider=provider,
        output_dir=Path(data.get("output_dir", "run-output")),
        seed=int(data.get("seed", 0)),
        target_pairs=int(data["target_pairs"]) if data.get("target_pairs") else None,
        scores_path=Path(data["scores"]) if data.get("scores") else None,
        label=data.get("label"),
        figure=bool(data.get("figure", True)),
    )


def build_gateway(config: RunConfig) -> Provider:
    if config.mock_fixture is not None:
        return mock_provider(MockFixture.from_file(config.mock_fixture))
    return build_live_provider(config.provider)


def load_tagged_dataset(config: RunConfig) -> corpus.Dataset:
    if config.dataset is None:
        raise ValidationError("no dataset configured (--in or config 'dataset')")
    dataset = corpus.load_dataset(config.dataset, "canonical")
    return corpus.tag_dataset(dataset)


# --- answer generation ------------------------------------------------------

def build_answer_prompt(question: str, top_passages: Sequence[corpus.Passage]) -> str:
    lines = ["Answer the question using only the passages below.", ""]
    for p in top_passages:
        header = f"[Passage {p.tag}]" if p.tag else "[Passage]"
        lines.append(f"{header} {p.title}: {p.text}" if p.title else f"{header} {p.text}")
    lines += ["", f"Question: {question}", "", "Reply with the answer only."]
    return "\n".join(lines)


def generate_answer(
    question: str,
    top_passages: Sequence[corpus.Passage],
    gateway: Provider,
    question_id: str = "",
) -> str:
    """One gateway call over the reranked top passages; returns trimmed text."""
    if not top_passages:
        raise ValidationError("cannot answer with an empty passage list")
    request = ChatRequest(
        role_tag="answer",
        prompt=build_answer_prompt(question, top_passages),
        metadata={"question_id": question_id},
    )
    return gateway.complete(request).text.strip()


# --- evaluation -------------------------------------------------------------

def run_eval(config: RunConfig) -> dict[str, metrics.MetricReport]:
    """Score, rerank, and evaluate every configured scorer on the dataset."""
    dataset = load_tagged_dataset(config)
    gateway = build_gateway(config)
    external_tables = None
    if "external" in config.scorers:
        if config.scores_path is None:
            raise ValidationError("external scorer needs --scores <file>")
        external_tables = scoring.load_external_scores(config.scores_path, dataset)
    concurrency = config.provider.concurrency
    reports: dict[str, metrics.MetricReport] = {}
    for name in config.scorers:
        scorer = scoring.make_scorer(
            name,
            gateway=gateway,
            external_tables=external_tables,
            concurrency=concurrency,
        )
        per_question: dict[str, dict[str, float]] = {}
        excluded: list[str] = []
        for record in dataset:
            try:
                table = scorer(record)
                ranked = scoring.rerank(table, record.candidates)
                top = [
                    record.candidates.by_id(pid)
                    for pid in ranked.order[: config.answer_k]
                ]
                answer = generate_answer(
                    record.question_text, top, gateway, question_id=record.question_id
                )
                em = metrics.exact_match(answer, record.gold_answers)
                per_question[record.question_id] = metrics.question_metrics(
                    ranked.order,
                    record.gold_passage_ids,
                    cutoffs=config.cutoffs,
                    em=em,
                )
            except UtilityRankError as exc:
                log.warning("excluding question %s under scorer %s: %s", record.question_id, name, exc)
                excluded.append(record.question_id)
        reports[config.label or name] = metrics.aggregate(per_question, excluded=excluded)
    return reports


def rerank_dataset(config: RunConfig, scorer_name: str) -> list[scoring.RankedList]:
    """Rerank every question under one scorer (the `rerank` subcommand)."""
    dataset = load_tagged_dataset(config)
    gateway = None
    if scorer_name == "llm":
        gateway = build_gateway(config)
    external_tables = None
    if scorer_name == "external":
        if config.scores_path is None:
            raise ValidationError("external scorer needs --scores <file>")
        external_tables = scoring.load_external_scores(config.scores_path, dataset)
    scorer = scoring.make_scorer(
        scorer_name,
        gateway=gateway,
        external_tables=external_tables,
        concurrency=config.provider.concurrency,
    )
    return [scoring.rerank(scorer(record), record.candidates) for record in dataset]


# --- synthesis --------------------------------------------------------------

@dataclass(frozen=True)
class SynthesisResult:
    trace_file: Path
    annotation_file: Path
    pointwise: annotate.TrainingFile
    listwise: annotate.TrainingFile
    manifest_file: Path
    manifest: dict


def run_synthesis(config: RunConfig) -> SynthesisResult:
    """Traces -> annotations -> training files, with a gap manifest.

    Partial failures never abort the run: questions whose trace or
    annotations failed are listed in the manifest and left out of the
    training files.
    """
    dataset = load_tagged_dataset(config)
    if config.target_pairs is not None:
        dataset = corpus.sample_training_questions(dataset, config.target_pairs, config.seed)
    gateway = build_gateway(config)
    concurrency = config.provider.concurrency
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    traces, trace_failures = trace.generate_traces(dataset, gateway, concurrency=concurrency)
    trace_file = out_dir / "traces.jsonl"
    trace.write_traces(traces, trace_file)
    traced = {t.question_id: t for t in traces}

    annotations: list[annotate.UtilityAnnotation] = []
    annotation_failures: list[annotate.AnnotationFailure] = []
    complete_records = []
    for record in dataset:
        if record.question_id not in traced:
            continue
        result = annotate.annotate_candidates(
            record, traced[record.question_id], gateway, concurrency=concurrency
        )
        annotations.extend(result.annotations)
        annotation_failures.extend(result.failures)
        if not result.failures:
            complete_records.append(record)
    annotation_file = out_dir / "annotations.jsonl"
    annotate.write_annotations(annotations, annotation_file)

    complete = corpus.Dataset(name=dataset.name, records=tuple(complete_records))
    complete_ids = {r.question_id for r in complete_records}
    complete_annotations = [a for a in annotations if a.question_id in complete_ids]
    pointwise = annotate.export_training_data(
        complete_annotations, complete, "pointwise", out_dir / "train_pointwise.jsonl"
    )
    listwise = annotate.export_training_data(
        complete_annotations, complete, "listwise", out_dir / "train_listwise.jsonl"
    )

    manifest = {
        "seed": config.seed,
        "questions": len(dataset),
        "traces": len(traces),
        "trace_failures": [
            {"question_id": qid, "reason": reason}
            for qid, reason in sorted(trace_failures)
        ],
        "annotations": len(annotations),
        "annotation_failures": [
            {"question_id": f.question_id, "passage_id": f.passage_id, "reason": f.reason}
            for f in sorted(annotation_failures, key=lambda f: (f.question_id, f.passage_id))
        ],
        "complete_questions": len(complete_records),
        "files": {
            "traces": trace_file.name,
            "annotations": annotation_file.name,
            "pointwise": pointwise.path.name,
            "listwise": listwise.path.name,
        },
        "rows": {"pointwise": pointwise.example_count, "listwise": listwise.example_count},
    }
    manifest_file = out_dir / "manifest.json"
    manifest_file.write_text(
        json.dumps(manifest, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return SynthesisResult(
        trace_file=trace_file,
        annotation_file=annotation_file,
        pointwise=pointwise,
        listwise=listwise,
        manifest_file=manifest_file,
        manifest=manifest,
    )
