import json
import math

import pytest
import torch
import torch.nn.functional as F

from hemitrace_extract import formats
from hemitrace_extract.checkpoint import CheckpointRef, load_checkpoint
from hemitrace_extract.logprobs import dump_logprobs, sequence_logprobs

SENTENCES = [
    "Alice was happy.",
    "Bob went to the old house.",
    "Why not try again?",
    "The thing is blue and round.",
    "Once upon a time, a dog ran.",
    "I wish you were here.",
    "This is a very plain sentence.",
    "Yet the rain kept falling.",
    "A blue bird sat on the fence.",
    "Are you sure about that?",
    "36 + 41 = 77",
    "36 × 41 = 1476",
    "( ( ) [ ] ) { }",
    "cats see dogs.",
    "the cat runs fast.",
    "dogs and cats play.",
    "she read the book twice.",
    "numbers like 12 and 305 count.",
    "short one.",
    "a final sample sentence ends here.",
]


def write_suite(path, sides):
    lines = [
        json.dumps({"id": f"p-{i:03d}", "good": good, "bad": bad, "paradigm": "toy"})
        for i, (good, bad) in enumerate(sides)
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestSequenceLogprobs:
    def test_one_value_per_token_with_bos(self, checkpoint_ref):
        model, tokenizer = load_checkpoint(checkpoint_ref)
        text = "Alice was happy."
        values = sequence_logprobs(model, tokenizer, text, name="t")
        n_tokens = len(tokenizer(text, add_special_tokens=False).input_ids)
        assert len(values) == n_tokens
        assert all(v <= 0.0 for v in values)

    def test_sum_matches_cross_entropy(self, checkpoint_ref):
        # independent route: sequence log-likelihood via the cross-entropy
        # loss over the same teacher-forced pass, in double precision
        model, tokenizer = load_checkpoint(checkpoint_ref)
        worst = 0.0
        for text in SENTENCES:
            values = sequence_logprobs(model, tokenizer, text, name="t")
            ids = tokenizer(text, add_special_tokens=False, return_tensors="pt").input_ids[0]
            full = torch.cat([torch.tensor([tokenizer.bos_token_id]), ids])
            with torch.no_grad():
                logits = model(full.unsqueeze(0)).logits[0].double()
            ll = -F.cross_entropy(logits[:-1], full[1:], reduction="sum")
            worst = max(worst, abs(math.fsum(values) - float(ll)))
        assert worst < 1e-4

    def test_empty_tokenization_names_the_text(self, checkpoint_ref):
        model, tokenizer = load_checkpoint(checkpoint_ref)
        with pytest.raises(ValueError, match="pair 'x' good side"):
            sequence_logprobs(model, tokenizer, "   ", name="pair 'x' good side")


class TestDumpLogprobs:
    def test_dump_and_meta(self, checkpoint_ref, tmp_path):
        suite = tmp_path / "suite.jsonl"
        write_suite(suite, [("the cat runs.", "the cat run."), ("dogs see.", "dogs sees.")])
        out = tmp_path / "dump.jsonl"
        dump_logprobs(checkpoint_ref, suite, out)
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert [(r["pair_id"], r["side"]) for r in records] == [
            ("p-000", "good"), ("p-000", "bad"), ("p-001", "good"), ("p-001", "bad"),
        ]
        assert all(v <= 0.0 for r in records for v in r["logprobs"])
        meta = json.loads((tmp_path / "dump.jsonl.meta.json").read_text())
        assert meta["tokens_seen"] == checkpoint_ref.tokens_seen
        assert meta["n_pairs"] == 2

    def test_rerun_byte_identical(self, checkpoint_ref, tmp_path):
        suite = tmp_path / "suite.jsonl"
        write_suite(suite, [("a cat sat.", "a cat sit.")])
        out = tmp_path / "dump.jsonl"
        dump_logprobs(checkpoint_ref, suite, out)
        first = out.read_bytes()
        dump_logprobs(checkpoint_ref, suite, out)
        assert out.read_bytes() == first

    def test_empty_side_errors_with_pair_id(self, checkpoint_ref, tmp_path):
        suite = tmp_path / "suite.jsonl"
        write_suite(suite, [("fine text.", " ")])
        with pytest.raises(ValueError, match="pair 'p-000' bad side"):
            dump_logprobs(checkpoint_ref, suite, tmp_path / "dump.jsonl")

    def test_duplicate_suite_id_rejected(self, checkpoint_ref, tmp_path):
        suite = tmp_path / "suite.jsonl"
        record = json.dumps({"id": "dup", "good": "a.", "bad": "b.", "paradigm": "t"})
        suite.write_text(record + "\n" + record + "\n", encoding="utf-8")
        with pytest.raises(ValueError, match="duplicate pair id"):
            dump_logprobs(checkpoint_ref, suite, tmp_path / "dump.jsonl")


class TestCheckpointRef:
    def test_validation(self):
        with pytest.raises(ValueError, match="tokens_seen"):
            CheckpointRef(model_id="m", tokens_seen=0)
        with pytest.raises(ValueError, match="model_id"):
            CheckpointRef(model_id="", tokens_seen=5)

    def test_describe_includes_revision(self):
        ref = CheckpointRef(model_id="m", tokens_seen=5, revision="step1000")
        assert ref.describe() == {"model_id": "m", "tokens_seen": 5, "revision": "step1000"}


class TestSuiteReader:
    def test_missing_key_line_numbered(self, tmp_path):
        path = tmp_path / "s.jsonl"
        path.write_text('{"id": "a", "good": "x", "bad": "y"}\n', encoding="utf-8")
        with pytest.raises(ValueError, match=":1: missing key 'paradigm'"):
            formats.read_suite(path)
