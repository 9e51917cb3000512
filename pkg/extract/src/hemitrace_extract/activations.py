"""Per-layer hidden-state matrices for onset-aligned transcripts.

A transcript is a words file (one word per line) plus an onsets file (one
seconds value per line, same count). Each layer yields one matrix with a
row per word; multi-token words are represented by their last token's
hidden state by default, since a causal model has accumulated the whole
word only at its final token. Mean pooling over the word's tokens is
available behind a flag.
"""

from pathlib import Path

import numpy as np
import torch

from . import formats
from .checkpoint import CheckpointRef, load_checkpoint


def read_words(path: "str | Path") -> list[str]:
    words = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip()
            if word:
                words.append(word)
    return words


def _word_token_spans(tokenizer, words: list[str]) -> tuple[torch.Tensor, list[tuple[int, int]]]:
    """Tokenize words in running context; return ids and per-word [start, end) spans."""
    ids: list[int] = []
    bos = tokenizer.bos_token_id
    if bos is not None:
        ids.append(bos)
    spans = []
    for i, word in enumerate(words):
        # the leading space keeps tokenizers with space-aware vocabularies
        # (byte-level BPE) from merging across word boundaries
        text = word if i == 0 else " " + word
        word_ids = tokenizer(text, add_special_tokens=False).input_ids
        if not word_ids:
            raise ValueError(f"word {i} ({word!r}): tokenization produced no tokens")
        spans.append((len(ids), len(ids) + len(word_ids)))
        ids.extend(word_ids)
    return torch.tensor(ids, dtype=torch.long), spans


def dump_activations(
    ref: CheckpointRef,
    words_path: "str | Path",
    onsets_path: "str | Path",
    layers: "list[int] | tuple[int, ...]",
    out_dir: "str | Path",
    run_index: int = 0,
    pool: str = "last",
    device: str = "cpu",
) -> list[Path]:
    """Write one feature matrix (plus sidecar) per requested layer.

    Layer indices address the model's hidden-state stack: 0 is the embedding
    output, 1..n the transformer block outputs. Returns the matrix paths.
    """
    if pool not in ("last", "mean"):
        raise ValueError(f"pool must be 'last' or 'mean', got {pool!r}")
    if not layers:
        raise ValueError("no layers requested")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    words = read_words(words_path)
    onsets = formats.read_onsets(onsets_path)
    if len(words) != len(onsets):
        raise ValueError(
            f"transcript has {len(words)} words but {len(onsets)} onsets"
        )
    if not words:
        raise ValueError("empty transcript")

    model, tokenizer = load_checkpoint(ref, device=device)
    ids, spans = _word_token_spans(tokenizer, words)
    max_positions = getattr(model.config, "n_positions", None)
    if max_positions is not None and len(ids) > max_positions:
        raise ValueError(
            f"transcript tokenizes to {len(ids)} tokens, over the model limit {max_positions}"
        )
    with torch.no_grad():
        hidden = model(ids.unsqueeze(0), output_hidden_states=True).hidden_states
    for layer in layers:
        if not 0 <= layer < len(hidden):
            raise ValueError(f"layer {layer} out of range 0..{len(hidden) - 1}")

    onsets_name = f"run{run_index:02d}.onsets.txt"
    formats.write_onsets(out_dir / onsets_name, onsets)

    written = []
    for layer in layers:
        states = hidden[layer][0]
        if pool == "last":
            rows = [states[end - 1] for _, end in spans]
        else:
            rows = [states[start:end].mean(dim=0) for start, end in spans]
        matrix = torch.stack(rows).cpu().numpy().astype(np.float32)
        path = out_dir / f"features_layer{layer:02d}_r{run_index:02d}.f32"
        formats.write_matrix(
            path,
            matrix,
            kind="features",
            onsets_path=onsets_name,
            layer_index=int(layer),
            checkpoint_tokens=int(ref.tokens_seen),
            run_index=int(run_index),
        )
        written.append(path)
    return written
