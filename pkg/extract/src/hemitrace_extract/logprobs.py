"""Per-token log-probabilities for minimal-pair suites under teacher forcing."""

from pathlib import Path

import torch
import torch.nn.functional as F

from . import formats
from .checkpoint import CheckpointRef, load_checkpoint


def sequence_logprobs(model, tokenizer, text: str, name: str) -> list[float]:
    """Natural-log probability of each token of `text` under the model.

    When the tokenizer defines a BOS token it is prepended so every text
    token gets a conditional probability; otherwise the first token has no
    context and is not scored.
    """
    ids = tokenizer(text, add_special_tokens=False, return_tensors="pt").input_ids[0]
    if ids.numel() == 0:
        raise ValueError(f"{name}: tokenization produced an empty sequence")
    bos = tokenizer.bos_token_id
    if bos is not None:
        full = torch.cat([torch.tensor([bos], dtype=ids.dtype), ids])
    else:
        full = ids
        if full.numel() < 2:
            raise ValueError(
                f"{name}: single token and no BOS token, nothing to condition on"
            )
    with torch.no_grad():
        logits = model(full.unsqueeze(0)).logits[0]
    # logits at position i predict full[i + 1]
    logprobs = F.log_softmax(logits[:-1], dim=-1)
    scored = logprobs.gather(1, full[1:].unsqueeze(1)).squeeze(1)
    return [float(x) for x in scored]


def dump_logprobs(
    ref: CheckpointRef, suite_path: "str | Path", out_path: "str | Path",
    device: str = "cpu",
) -> Path:
    """Score every pair side of a suite; write the dump plus a meta sidecar.

    The sidecar (<out>.meta.json) records the checkpoint identity and
    tokens_seen so dumps and activation matrices can be checked for
    referring to the same checkpoint.
    """
    out_path = Path(out_path)
    pairs = formats.read_suite(suite_path)
    model, tokenizer = load_checkpoint(ref, device=device)
    records = []
    for pair in pairs:
        for side in ("good", "bad"):
            values = sequence_logprobs(
                model, tokenizer, pair[side], name=f"pair {pair['id']!r} {side} side"
            )
            records.append((pair["id"], side, values))
    formats.atomic_write_text(out_path, formats.logprob_dump_lines(records))
    meta = dict(ref.describe(), suite=Path(suite_path).name, n_pairs=len(pairs))
    formats.write_json(out_path.with_name(out_path.name + ".meta.json"), meta)
    return out_path
