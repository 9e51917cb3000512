"""Checkpoint references and loading.

A checkpoint is identified by a model id (Hugging Face hub id or local
directory) plus an optional revision label, and carries the number of
training tokens it has seen. tokens_seen must come from the checkpoint's
training metadata; nothing here infers it.
"""

import os
from dataclasses import dataclass

CACHE_ENV = "HEMITRACE_MODEL_CACHE"


@dataclass(frozen=True)
class CheckpointRef:
    model_id: str
    tokens_seen: int
    revision: str | None = None

    def __post_init__(self):
        if not self.model_id:
            raise ValueError("model_id must not be empty")
        if self.tokens_seen <= 0:
            raise ValueError(f"tokens_seen must be positive, got {self.tokens_seen}")

    def describe(self) -> dict:
        doc = {"model_id": self.model_id, "tokens_seen": self.tokens_seen}
        if self.revision is not None:
            doc["revision"] = self.revision
        return doc


def load_checkpoint(ref: CheckpointRef, device: str = "cpu"):
    """Load (model, tokenizer) for a checkpoint, in eval mode.

    Respects the HEMITRACE_MODEL_CACHE environment variable for the hub
    cache directory. One checkpoint is held in memory at a time by design;
    callers drop the returned model before loading the next.
    """
    import torch
    from transformers import AutoModelForCausalLM, AutoTokenizer

    kwargs = {}
    if ref.revision is not None:
        kwargs["revision"] = ref.revision
    cache_dir = os.environ.get(CACHE_ENV)
    if cache_dir:
        kwargs["cache_dir"] = cache_dir
    tokenizer = AutoTokenizer.from_pretrained(ref.model_id, **kwargs)
    model = AutoModelForCausalLM.from_pretrained(ref.model_id, **kwargs)
    model.to(torch.device(device))
    model.eval()
    return model, tokenizer
