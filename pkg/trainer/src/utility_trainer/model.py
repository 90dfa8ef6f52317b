"""Compact bidirectional transformer regressor with a single-scalar head.

The built-in "tiny" encoder trains from scratch on the pointwise corpus;
`encoder = "hf:<model>"` swaps in a pretrained HuggingFace encoder when one
is available locally (not required by any test).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn

from .data import PAD, Vocab, encode_pair


@dataclass
class EncoderDims:
    hidden_size: int = 64
    num_layers: int = 2
    num_heads: int = 4
    ffn_size: int = 128
    dropout: float = 0.1


class TinyEncoderRegressor(nn.Module):
    """Token/position/segment/match embeddings -> transformer encoder ->
    masked mean pooling -> scalar head.

    The exact-match embedding (see data.encode_pair) is what makes this
    from-scratch encoder competitive in a few epochs: cross-segment overlap
    arrives as an input feature instead of having to emerge inside attention.
    """

    def __init__(self, vocab_size: int, max_length: int, dims: EncoderDims):
        super().__init__()
        self.dims = dims
        self.max_length = max_length
        self.tok_emb = nn.Embedding(vocab_size, dims.hidden_size, padding_idx=PAD)
        self.pos_emb = nn.Embedding(max_length, dims.hidden_size)
        self.seg_emb = nn.Embedding(2, dims.hidden_size)
        self.match_emb = nn.Embedding(2, dims.hidden_size)
        self.norm = nn.LayerNorm(dims.hidden_size)
        self.dropout = nn.Dropout(dims.dropout)
        layer = nn.TransformerEncoderLayer(
            d_model=dims.hidden_size,
            nhead=dims.num_heads,
            dim_feedforward=dims.ffn_size,
            dropout=dims.dropout,
            batch_first=True,
            norm_first=True,
        )
        self.encoder = nn.TransformerEncoder(
            layer, num_layers=dims.num_layers, enable_nested_tensor=False
        )
        self.head = nn.Linear(dims.hidden_size, 1)
        self.apply(self._init_weights)

    @staticmethod
    def _init_weights(module: nn.Module) -> None:
        if isinstance(module, (nn.Linear, nn.Embedding)):
            nn.init.normal_(module.weight, mean=0.0, std=0.02)
            if isinstance(module, nn.Linear) and module.bias is not None:
                nn.init.zeros_(module.bias)

    def forward(
        self,
        input_ids: torch.Tensor,
        segment_ids: torch.Tensor,
        match_flags: torch.Tensor,
        attention_mask: torch.Tensor,
    ) -> torch.Tensor:
        """Returns one scalar prediction per sequence."""
        positions = torch.arange(input_ids.size(1), device=input_ids.device)
        x = (
            self.tok_emb(input_ids)
            + self.pos_emb(positions)
            + self.seg_emb(segment_ids)
            + self.match_emb(match_flags)
        )
        x = self.dropout(self.norm(x))
        x = self.encoder(x, src_key_padding_mask=~attention_mask)
        mask = attention_mask.unsqueeze(-1).to(x.dtype)
        pooled = (x * mask).sum(dim=1) / mask.sum(dim=1)
        return self.head(pooled).squeeze(-1)


def collate(
    encoded: list[tuple[list[int], list[int], list[int]]],
    device: torch.device | str = "cpu",
) -> dict[str, torch.Tensor]:
    """Pad a batch of (token_ids, segment_ids, match_flags) to one length."""
    width = max(len(ids) for ids, _, _ in encoded)
    input_ids = torch.full((len(encoded), width), PAD, dtype=torch.long)
    segment_ids = torch.zeros((len(encoded), width), dtype=torch.long)
    match_flags = torch.zeros((len(encoded), width), dtype=torch.long)
    attention_mask = torch.zeros((len(encoded), width), dtype=torch.bool)
    for i, (ids, segments, flags) in enumerate(encoded):
        input_ids[i, : len(ids)] = torch.tensor(ids, dtype=torch.long)
        segment_ids[i, : len(segments)] = torch.tensor(segments, dtype=torch.long)
        match_flags[i, : len(flags)] = torch.tensor(flags, dtype=torch.long)
        attention_mask[i, : len(ids)] = True
    return {
        "input_ids": input_ids.to(device),
        "segment_ids": segment_ids.to(device),
        "match_flags": match_flags.to(device),
        "attention_mask": attention_mask.to(device),
    }


class ScoringModel:
    """A loaded artifact: deterministic inference over (question, passage) pairs."""

    def __init__(self, model: nn.Module, vocab: Vocab, max_length: int, encoder: str):
        self.model = model.eval()
        self.vocab = vocab
        self.max_length = max_length
        self.encoder = encoder

    @torch.no_grad()
    def predict_pairs(self, pairs: list[tuple[str, str]], batch_size: int = 64) -> list[float]:
        scores: list[float] = []
        for start in range(0, len(pairs), batch_size):
            chunk = pairs[start : start + batch_size]
            encoded = [
                encode_pair(self.vocab, q, p, self.max_length) for q, p in chunk
            ]
            batch = collate(encoded)
            preds = self.model(**batch)
            scores.extend(float(v) for v in preds)
        return scores

    def predict(self, question: str, passage: str) -> float:
        return self.predict_pairs([(question, passage)])[0]


# --- artifact save/load -----------------------------------------------------

def save_artifact(
    out_dir: str | Path,
    model: TinyEncoderRegressor,
    vocab: Vocab,
    metadata: dict,
) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out_dir / "weights.pt")
    vocab.save(out_dir / "vocab.json")
    (out_dir / "config.json").write_text(
        json.dumps(metadata, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return out_dir


def load_artifact(model_dir: str | Path) -> ScoringModel:
    model_dir = Path(model_dir)
    config_path = model_dir / "config.json"
    if not config_path.exists():
        raise FileNotFoundError(f"no model artifact at {model_dir} (missing config.json)")
    metadata = json.loads(config_path.read_text(encoding="utf-8"))
    encoder = metadata.get("encoder", "tiny")
    if encoder.startswith("hf:"):
        return _load_hf_artifact(model_dir, metadata)
    vocab = Vocab.load(model_dir / "vocab.json")
    dims = EncoderDims(**metadata["dims"])
    model = TinyEncoderRegressor(
        vocab_size=metadata["vocab_size"],
        max_length=metadata["max_length"],
        dims=dims,
    )
    model.load_state_dict(torch.load(model_dir / "weights.pt", map_location="cpu"))
    return ScoringModel(model, vocab, metadata["max_length"], encoder)


# --- optional pretrained HF backend ----------------------------------------

class HFScoringModel:
    """Pretrained-encoder variant; mirrors ScoringModel's surface."""

    def __init__(self, model, tokenizer, max_length: int, encoder: str):
        self.model = model.eval()
        self.tokenizer = tokenizer
        self.max_length = max_length
        self.encoder = encoder

    @torch.no_grad()
    def predict_pairs(self, pairs: list[tuple[str, str]], batch_size: int = 32) -> list[float]:
        scores: list[float] = []
        for start in range(0, len(pairs), batch_size):
            chunk = pairs[start : start + batch_size]
            batch = self.tokenizer(
                [q for q, _ in chunk],
                [p for _, p in chunk],
                truncation="only_second",
                max_length=self.max_length,
                padding=True,
                return_tensors="pt",
            )
            logits = self.model(**batch).logits.squeeze(-1)
            scores.extend(float(v) for v in logits)
        return scores

    def predict(self, question: str, passage: str) -> float:
        return self.predict_pairs([(question, passage)])[0]


def build_hf_backend(name: str, max_length: int):
    """Load a pretrained encoder + pair tokenizer; requires transformers."""
    try:
        from transformers import AutoModelForSequenceClassification, AutoTokenizer
    except ImportError as exc:  # pragma: no cover - optional dependency
        raise RuntimeError(f"encoder {name!r} needs the transformers package") from exc
    model_id = name.removeprefix("hf:")
    tokenizer = AutoTokenizer.from_pretrained(model_id)
    model = AutoModelForSequenceClassification.from_pretrained(
        model_id, num_labels=1, problem_type="regression"
    )
    return model, tokenizer


def _load_hf_artifact(model_dir: Path, metadata: dict) -> HFScoringModel:
    model, tokenizer = build_hf_backend(metadata["encoder"], metadata["max_length"])
    state = torch.load(model_dir / "weights.pt", map_location="cpu")
    model.load_state_dict(state)
    return HFScoringModel(model, tokenizer, metadata["max_length"], metadata["encoder"])


def dims_from_config(config) -> EncoderDims:
    return EncoderDims(
        hidden_size=config.hidden_size,
        num_layers=config.num_layers,
        num_heads=config.num_heads,
        ffn_size=config.ffn_size,
        dropout=config.dropout,
    )


def dims_to_dict(dims: EncoderDims) -> dict:
    return asdict(dims)
