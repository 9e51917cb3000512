"""Shared fixtures: tiny randomly initialized checkpoints built on disk.

The tokenizer is character-level BPE (no merges) over lowercase and
uppercase letters, digits, and common punctuation, with a whitespace
pre-tokenizer, so every multi-character word maps to several tokens. The
causal LM is a 2-layer, 32-dim GPT-2-style network; weights are seeded so
the checkpoints are reproducible. Everything is built locally, no
downloads.
"""

import pytest
import torch
from tokenizers import Tokenizer, models, pre_tokenizers
from transformers import (
    GPT2Config,
    GPT2ForSequenceClassification,
    GPT2LMHeadModel,
    PreTrainedTokenizerFast,
)

from hemitrace_extract.checkpoint import CheckpointRef

CHARS = (
    "abcdefghijklmnopqrstuvwxyz"
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    "0123456789"
    ".,!?=+×()[]{}'\"-:;"
)
TOKENS_SEEN = 3_000_000


def _save_tokenizer(path) -> dict:
    vocab = {"<pad>": 0, "<s>": 1, "</s>": 2, "<unk>": 3}
    for ch in CHARS:
        vocab[ch] = len(vocab)
    tok = Tokenizer(models.BPE(vocab=vocab, merges=[], unk_token="<unk>"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok,
        bos_token="<s>",
        eos_token="</s>",
        pad_token="<pad>",
        unk_token="<unk>",
    )
    fast.save_pretrained(path)
    return vocab


def _base_config(vocab, **extra) -> GPT2Config:
    return GPT2Config(
        vocab_size=len(vocab),
        n_positions=768,
        n_embd=32,
        n_layer=2,
        n_head=2,
        bos_token_id=vocab["<s>"],
        eos_token_id=vocab["</s>"],
        pad_token_id=vocab["<pad>"],
        **extra,
    )


def build_checkpoint_dir(path) -> str:
    vocab = _save_tokenizer(path)
    torch.manual_seed(20240815)
    GPT2LMHeadModel(_base_config(vocab)).save_pretrained(path)
    return str(path)


def build_classifier_dir(path) -> str:
    vocab = _save_tokenizer(path)
    config = _base_config(
        vocab,
        num_labels=2,
        label2id={"unacceptable": 0, "acceptable": 1},
        id2label={0: "unacceptable", 1: "acceptable"},
    )
    torch.manual_seed(20240816)
    GPT2ForSequenceClassification(config).save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def checkpoint_dir(tmp_path_factory):
    return build_checkpoint_dir(tmp_path_factory.mktemp("ckpt"))


@pytest.fixture(scope="session")
def checkpoint_ref(checkpoint_dir):
    return CheckpointRef(model_id=checkpoint_dir, tokens_seen=TOKENS_SEEN)


@pytest.fixture(scope="session")
def classifier_dir(tmp_path_factory):
    return build_classifier_dir(tmp_path_factory.mktemp("judge"))
