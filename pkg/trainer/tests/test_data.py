import pytest

from utility_trainer.data import (
    CLS,
    SEP,
    UNK,
    DataError,
    TrainingExample,
    Vocab,
    encode_pair,
    load_pointwise,
)

from conftest import make_training_rows, write_jsonl


class TestLoadPointwise:
    def test_loads_examples(self, training_file):
        examples = load_pointwise(training_file)
        assert len(examples) == 64
        assert {e.target for e in examples} == {1.0, 5.0}

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(DataError, match="empty"):
            load_pointwise(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_pointwise(tmp_path / "nope.jsonl")

    def test_target_out_of_range_carries_line_number(self, tmp_path):
        rows = make_training_rows(2, seed=0)
        rows[2]["score"] = 9
        path = write_jsonl(rows, tmp_path / "bad.jsonl")
        with pytest.raises(DataError, match=r"bad\.jsonl:3"):
            load_pointwise(path)

    def test_malformed_row_carries_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"question": "q", "passage": "p", "score": 3}\n{"nope": 1}\n')
        with pytest.raises(DataError, match=r"bad\.jsonl:2"):
            load_pointwise(path)


class TestTrainingExample:
    def test_bounds(self):
        with pytest.raises(DataError):
            TrainingExample("q", "p", 0.5)
        with pytest.raises(DataError):
            TrainingExample("q", "p", 5.5)
        assert TrainingExample("q", "p", 3.0).target == 3.0


class TestVocab:
    def test_build_is_reproducible(self, training_file):
        examples = load_pointwise(training_file)
        a = Vocab.build(examples)
        b = Vocab.build(examples)
        assert a.token_to_id == b.token_to_id

    def test_specials_reserved(self, training_file):
        vocab = Vocab.build(load_pointwise(training_file))
        assert vocab.token_to_id["[PAD]"] == 0
        assert vocab.token_to_id["[CLS]"] == CLS

    def test_unknown_token_maps_to_unk(self, training_file):
        vocab = Vocab.build(load_pointwise(training_file))
        assert vocab.encode("zzzneverseen")[0] == UNK

    def test_save_load_round_trip(self, training_file, tmp_path):
        vocab = Vocab.build(load_pointwise(training_file))
        vocab.save(tmp_path / "vocab.json")
        assert Vocab.load(tmp_path / "vocab.json").token_to_id == vocab.token_to_id

    def test_max_size_cap(self, training_file):
        vocab = Vocab.build(load_pointwise(training_file), max_size=10)
        assert len(vocab) == 10


class TestEncodePair:
    def _vocab(self):
        examples = [TrainingExample("alpha beta gamma", "beta delta epsilon", 3.0)]
        return Vocab.build(examples)

    def test_structure(self):
        vocab = self._vocab()
        ids, segments, flags = encode_pair(vocab, "alpha beta", "beta delta", 32)
        assert ids[0] == CLS
        assert ids.count(SEP) == 2
        assert len(ids) == len(segments) == len(flags)
        assert segments == [0, 0, 0, 0, 1, 1, 1]

    def test_match_flags_mark_shared_tokens(self):
        vocab = self._vocab()
        ids, _, flags = encode_pair(vocab, "alpha beta", "beta delta", 32)
        # layout: CLS alpha beta SEP beta delta SEP
        assert flags == [0, 0, 1, 0, 1, 0, 0]

    def test_passage_truncated_first(self):
        vocab = self._vocab()
        question = "alpha beta gamma"
        passage = "delta " * 30
        ids, segments, flags = encode_pair(vocab, question, passage, 16)
        assert len(ids) == 16
        # all question tokens survive
        assert segments[:5] == [0] * 5  # CLS + 3 question tokens + SEP
        assert len(ids) == len(flags)

    def test_deterministic(self):
        vocab = self._vocab()
        assert encode_pair(vocab, "alpha", "beta", 16) == encode_pair(vocab, "alpha", "beta", 16)
