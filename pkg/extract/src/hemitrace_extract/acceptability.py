"""Acceptability scoring of generated texts into a trajectory CSV.

A scorer is anything with score(sentence) -> float in [0, 1]; two
implementations ship here: a constant stub for offline tests and a wrapper
around a local sequence-classification checkpoint (a CoLA-style judge).
Sentences come from a documented regex splitter: the text is split after
'.', '!' or '?' followed by whitespace.
"""

import re
import sys
from pathlib import Path

from . import formats

_SENTENCE_BOUNDARY = re.compile(r"(?<=[.!?])\s+")


def split_sentences(text: str) -> list[str]:
    return [part.strip() for part in _SENTENCE_BOUNDARY.split(text.strip()) if part.strip()]


class ConstantScorer:
    """Stub scorer returning the same value for every sentence."""

    def __init__(self, value: float):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"value must be in [0, 1], got {value}")
        self.value = float(value)

    def score(self, sentence: str) -> float:
        return self.value


class ClassifierScorer:
    """Scorer backed by a local sequence-classification checkpoint.

    `label` picks which class probability counts as acceptability (for a
    two-class acceptability judge this is the positive class).
    """

    def __init__(self, model_id: str, label: "str | int" = 1, device: str = "cpu"):
        import torch
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForSequenceClassification.from_pretrained(model_id)
        self.model.to(torch.device(device))
        self.model.eval()
        if isinstance(label, str):
            if label.lstrip("-").isdigit():
                label = int(label)
            elif label in self.model.config.label2id:
                label = self.model.config.label2id[label]
            else:
                names = sorted(self.model.config.label2id)
                raise ValueError(f"unknown label {label!r} (model labels: {names})")
        if not 0 <= int(label) < self.model.config.num_labels:
            raise ValueError(
                f"label index {label} out of range for {self.model.config.num_labels} classes"
            )
        self.label = int(label)

    def score(self, sentence: str) -> float:
        enc = self.tokenizer(sentence, return_tensors="pt", truncation=True)
        with self._torch.no_grad():
            logits = self.model(**enc).logits[0]
        return float(logits.softmax(dim=-1)[self.label])


def text_score(text: str, scorer) -> "float | None":
    """Mean per-sentence score, or None when the text has no sentences."""
    sentences = split_sentences(text)
    if not sentences:
        return None
    values = [float(scorer.score(s)) for s in sentences]
    return sum(values) / len(values)


def acceptability_scores(text_paths, scorer) -> list[tuple[Path, float]]:
    """Score each text file; empty texts are skipped with a warning."""
    results = []
    for path in text_paths:
        path = Path(path)
        value = text_score(path.read_text(encoding="utf-8"), scorer)
        if value is None:
            print(f"warning: {path}: empty text, skipped", file=sys.stderr)
            continue
        results.append((path, value))
    return results


def sweep_trajectory(
    per_checkpoint: "dict[int, list]", scorer, label: str = "acceptability"
) -> str:
    """Mean text score per checkpoint, as a trajectory CSV string.

    `per_checkpoint` maps tokens_seen to the checkpoint's text files. A
    checkpoint whose texts are all empty is an error; a constant scorer
    yields a flat trajectory, which the transition fitter downstream marks
    degenerate.
    """
    rows = []
    for tokens_seen in sorted(per_checkpoint):
        scored = acceptability_scores(per_checkpoint[tokens_seen], scorer)
        if not scored:
            raise ValueError(f"checkpoint {tokens_seen}: no scorable texts")
        mean = sum(v for _, v in scored) / len(scored)
        rows.append((int(tokens_seen), mean))
    return formats.trajectory_csv({label: rows})
