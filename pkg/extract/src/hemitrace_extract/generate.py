"""Seeded generation sweeps: prompts x seeds, bounded continuation length."""

from pathlib import Path

import torch

from . import formats
from .checkpoint import CheckpointRef, load_checkpoint

DEFAULT_PROMPTS = (
    "Why not",
    "Are you",
    "This is",
    "Alice was",
    "Bob went",
    "The thing",
    "Yet the",
    "A blue",
    "I wish",
    "Once upon",
)
DEFAULT_SEEDS = (0, 1, 2, 3, 4)
RETRY_SEED_OFFSET = 100003


def _continuation(model, tokenizer, prompt_ids, seed, min_new, max_new, greedy,
                  temperature, top_p):
    torch.manual_seed(seed)
    suppress = [
        t for t in (tokenizer.bos_token_id, tokenizer.pad_token_id, tokenizer.unk_token_id)
        if t is not None and t != tokenizer.eos_token_id
    ]
    with torch.no_grad():
        out = model.generate(
            prompt_ids,
            do_sample=not greedy,
            temperature=temperature,
            top_p=top_p,
            min_new_tokens=min_new,
            max_new_tokens=max_new,
            suppress_tokens=suppress or None,
            pad_token_id=tokenizer.pad_token_id
            if tokenizer.pad_token_id is not None
            else tokenizer.eos_token_id,
        )
    new_ids = out[0][prompt_ids.shape[1]:]
    specials = {t for t in (tokenizer.eos_token_id, tokenizer.pad_token_id) if t is not None}
    n_text_tokens = int(sum(1 for t in new_ids.tolist() if t not in specials))
    text = tokenizer.decode(new_ids, skip_special_tokens=True)
    return text, n_text_tokens


def generate_sweep(
    ref: CheckpointRef,
    out_dir: "str | Path",
    prompts: "tuple[str, ...]" = DEFAULT_PROMPTS,
    seeds: "tuple[int, ...]" = DEFAULT_SEEDS,
    min_new_tokens: int = 192,
    max_new_tokens: int = 256,
    greedy: bool = False,
    temperature: float = 1.0,
    top_p: float = 1.0,
    device: str = "cpu",
) -> list[dict]:
    """Generate one continuation per (prompt, seed); write texts + manifest.

    Continuations shorter than min_new_tokens are retried once with a
    derived seed and flagged if still short. The manifest records sampling
    parameters, per-file token counts, and the short/filtered flags (no
    safety filtering pass runs here; the flag is reserved for one).
    """
    if not prompts:
        raise ValueError("no prompts given")
    if not seeds:
        raise ValueError("no seeds given")
    if min_new_tokens <= 0 or max_new_tokens < min_new_tokens:
        raise ValueError(
            f"need 0 < min_new_tokens <= max_new_tokens, got {min_new_tokens}, {max_new_tokens}"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model, tokenizer = load_checkpoint(ref, device=device)

    entries = []
    for ip, prompt in enumerate(prompts):
        prompt_ids = tokenizer(prompt, return_tensors="pt").input_ids
        if prompt_ids.shape[1] == 0:
            raise ValueError(f"prompt {ip} ({prompt!r}): tokenization produced no tokens")
        for seed in seeds:
            text, n_tokens = _continuation(
                model, tokenizer, prompt_ids, seed,
                min_new_tokens, max_new_tokens, greedy, temperature, top_p,
            )
            retried = False
            if n_tokens < min_new_tokens:
                retried = True
                text, n_tokens = _continuation(
                    model, tokenizer, prompt_ids, seed + RETRY_SEED_OFFSET,
                    min_new_tokens, max_new_tokens, greedy, temperature, top_p,
                )
            name = f"gen_p{ip:02d}_s{seed:02d}.txt"
            formats.atomic_write_text(out_dir / name, text + "\n")
            entries.append(
                {
                    "file": name,
                    "prompt": prompt,
                    "seed": int(seed),
                    "n_tokens": n_tokens,
                    "retried": retried,
                    "short": n_tokens < min_new_tokens,
                    "filtered": False,
                }
            )

    manifest = dict(
        ref.describe(),
        sampling={
            "greedy": greedy,
            "temperature": temperature,
            "top_p": top_p,
            "min_new_tokens": min_new_tokens,
            "max_new_tokens": max_new_tokens,
        },
        texts=entries,
    )
    formats.write_json(out_dir / "sweep_manifest.json", manifest)
    return entries
