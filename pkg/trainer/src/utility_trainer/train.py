"""MSE regression fine-tuning: Adam(W), linear warmup schedule, accumulation.

The reported loss is always the plain mean squared error between the scalar
predictions and the 1-5 targets, so an independent recomputation on any
batch must agree with the loop's numbers.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from torch.optim import AdamW
from torch.optim.lr_scheduler import LambdaLR

from .data import DataError, TrainingExample, Vocab, encode_pair, load_pointwise
from .model import (
    TinyEncoderRegressor,
    build_hf_backend,
    collate,
    dims_from_config,
    dims_to_dict,
    save_artifact,
)

log = logging.getLogger("utility_trainer")


@dataclass
class TrainerConfig:
    epochs: int = 3
    learning_rate: float = 2e-5
    weight_decay: float = 0.01
    warmup_ratio: float = 0.1
    batch_size: int = 8
    grad_accum: int = 2
    mixed_precision: bool = False
    seed: int = 0
    encoder: str = "tiny"
    max_length: int = 128
    hidden_size: int = 64
    num_layers: int = 2
    num_heads: int = 4
    ffn_size: int = 128
    dropout: float = 0.1

    def __post_init__(self):
        if self.epochs < 1:
            raise DataError("epochs must be >= 1")
        if self.batch_size < 1:
            raise DataError("batch_size must be >= 1")
        if self.grad_accum < 1:
            raise DataError("grad_accum must be >= 1")
        if not 0.0 <= self.warmup_ratio <= 1.0:
            raise DataError("warmup_ratio must be in [0, 1]")


@dataclass
class TrainingSummary:
    final_loss: float
    epoch_losses: list[float] = field(default_factory=list)
    batch_losses: list[float] = field(default_factory=list)
    optimizer_steps: int = 0
    examples: int = 0


def mse_loss(predictions: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """(1/N) sum of squared prediction errors over one batch."""
    return ((predictions - targets) ** 2).mean()


def compute_batch_loss(model, batch: dict, targets: torch.Tensor) -> torch.Tensor:
    """The exact loss the training loop optimizes for one batch."""
    return mse_loss(model(**batch), targets)


def linear_warmup_schedule(optimizer, warmup_steps: int, total_steps: int) -> LambdaLR:
    def lr_lambda(step: int) -> float:
        if step < warmup_steps:
            return step / max(1, warmup_steps)
        return max(0.0, (total_steps - step) / max(1, total_steps - warmup_steps))

    return LambdaLR(optimizer, lr_lambda)


class _TinyBatcher:
    """Pre-encoded batches for the built-in from-scratch encoder."""

    def __init__(self, examples: list[TrainingExample], vocab: Vocab, max_length: int):
        self.encoded = [
            encode_pair(vocab, e.question, e.passage, max_length) for e in examples
        ]
        self.targets = torch.tensor([e.target for e in examples], dtype=torch.float32)

    def batch(self, indices: list[int]) -> tuple[dict, torch.Tensor]:
        return collate([self.encoded[i] for i in indices]), self.targets[indices]


class _HFBatcher:
    """Tokenize-on-demand batches for a pretrained HuggingFace encoder."""

    def __init__(self, examples: list[TrainingExample], tokenizer, max_length: int):
        self.examples = examples
        self.tokenizer = tokenizer
        self.max_length = max_length
        self.targets = torch.tensor([e.target for e in examples], dtype=torch.float32)

    def batch(self, indices: list[int]) -> tuple[dict, torch.Tensor]:
        chunk = [self.examples[i] for i in indices]
        encoded = self.tokenizer(
            [e.question for e in chunk],
            [e.passage for e in chunk],
            truncation="only_second",
            max_length=self.max_length,
            padding=True,
            return_tensors="pt",
        )
        return dict(encoded), self.targets[indices]


def train(
    train_path: str | Path,
    out_dir: str | Path,
    config: TrainerConfig | None = None,
) -> tuple[Path, TrainingSummary]:
    """Fine-tune the regressor on a pointwise file and save the artifact."""
    config = config or TrainerConfig()
    examples = load_pointwise(train_path)
    torch.manual_seed(config.seed)

    vocab = None
    if config.encoder.startswith("hf:"):
        model, tokenizer = build_hf_backend(config.encoder, config.max_length)
        batcher = _HFBatcher(examples, tokenizer, config.max_length)
        hf_forward = model

        def forward(**batch):
            return hf_forward(**batch).logits.squeeze(-1)

        run_model = forward
    else:
        if config.encoder != "tiny":
            raise DataError(f"unknown encoder {config.encoder!r} (use 'tiny' or 'hf:<name>')")
        vocab = Vocab.build(examples)
        model = TinyEncoderRegressor(
            vocab_size=len(vocab),
            max_length=config.max_length,
            dims=dims_from_config(config),
        )
        batcher = _TinyBatcher(examples, vocab, config.max_length)
        run_model = model

    use_amp = config.mixed_precision and torch.cuda.is_available()
    if config.mixed_precision and not use_amp:
        log.warning("mixed_precision requested but CUDA is unavailable; training in fp32")

    n = len(examples)
    batches_per_epoch = math.ceil(n / config.batch_size)
    steps_per_epoch = math.ceil(batches_per_epoch / config.grad_accum)
    total_steps = steps_per_epoch * config.epochs
    warmup_steps = math.ceil(config.warmup_ratio * total_steps)
    optimizer = AdamW(
        model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )
    scheduler = linear_warmup_schedule(optimizer, warmup_steps, total_steps)
    scaler = torch.amp.GradScaler("cuda", enabled=use_amp)

    generator = torch.Generator().manual_seed(config.seed)
    summary = TrainingSummary(final_loss=math.nan, examples=n)
    model.train()
    for epoch in range(config.epochs):
        order = torch.randperm(n, generator=generator).tolist()
        squared_error_sum = 0.0
        pending = 0
        optimizer.zero_grad()
        for start in range(0, n, config.batch_size):
            indices = order[start : start + config.batch_size]
            batch, targets = batcher.batch(indices)
            if use_amp:
                with torch.autocast("cuda", dtype=torch.float16):
                    loss = compute_batch_loss(run_model, batch, targets)
                scaler.scale(loss / config.grad_accum).backward()
            else:
                loss = compute_batch_loss(run_model, batch, targets)
                (loss / config.grad_accum).backward()
            batch_mse = float(loss.detach())
            summary.batch_losses.append(batch_mse)
            squared_error_sum += batch_mse * len(indices)
            pending += 1
            last_batch = start + config.batch_size >= n
            if pending == config.grad_accum or last_batch:
                if use_amp:
                    scaler.step(optimizer)
                    scaler.update()
                else:
                    optimizer.step()
                optimizer.zero_grad()
                scheduler.step()
                summary.optimizer_steps += 1
                pending = 0
        epoch_mse = squared_error_sum / n
        summary.epoch_losses.append(epoch_mse)
        log.info("epoch %d/%d: mse=%.5f", epoch + 1, config.epochs, epoch_mse)
    summary.final_loss = summary.epoch_losses[-1]

    metadata = {
        "encoder": config.encoder,
        "max_length": config.max_length,
        "vocab_size": len(vocab) if vocab is not None else None,
        "dims": dims_to_dict(dims_from_config(config)),
        "seed": config.seed,
        "trainer": asdict(config),
        "examples": n,
        "final_loss": summary.final_loss,
    }
    out_dir = Path(out_dir)
    if vocab is not None:
        save_artifact(out_dir, model, vocab, metadata)
    else:
        out_dir.mkdir(parents=True, exist_ok=True)
        torch.save(model.state_dict(), out_dir / "weights.pt")
        (out_dir / "config.json").write_text(
            json.dumps(metadata, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
    (out_dir / "training_summary.json").write_text(
        json.dumps(asdict(summary), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return out_dir, summary
