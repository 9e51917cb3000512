"""Sentence scoring from per-token log-probabilities, suite accuracy, and a
small additive-smoothed n-gram model for desk-scale verification runs.
"""

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import MinimalPair, tokenize_symbols

START = "<s>"
END = "</s>"


@dataclass(frozen=True)
class TokenLogProbs:
    """Per-token natural-log probabilities for one side of one pair."""

    pair_id: str
    side: str
    logprobs: tuple[float, ...]

    def __post_init__(self):
        if self.side not in ("good", "bad"):
            raise ValueError(f"side must be 'good' or 'bad', got {self.side!r}")
        if len(self.logprobs) == 0:
            raise ValueError(f"pair {self.pair_id!r}: empty logprob sequence")
        for lp in self.logprobs:
            if lp > 0:
                raise ValueError(f"pair {self.pair_id!r}: log-probability {lp} > 0")


@dataclass(frozen=True)
class SuiteAccuracy:
    suite: str
    overall: float
    per_paradigm: Mapping[str, float]
    n_pairs: int

    def __post_init__(self):
        if not 0.0 <= self.overall <= 1.0:
            raise ValueError(f"overall accuracy {self.overall} outside [0, 1]")
        for paradigm, acc in self.per_paradigm.items():
            if not 0.0 <= acc <= 1.0:
                raise ValueError(f"paradigm {paradigm!r} accuracy {acc} outside [0, 1]")


def sentence_logprob(t: TokenLogProbs) -> float:
    """Sentence log-probability: the exact sum of the per-token values."""
    return math.fsum(t.logprobs)


def _pair_score_x2(good: TokenLogProbs, bad: TokenLogProbs) -> int:
    # Doubled integer score (2 win / 1 tie / 0 loss) so accuracies accumulate
    # exactly and any parallel reduction order gives the same result.
    lp_good = sentence_logprob(good)
    lp_bad = sentence_logprob(bad)
    if lp_good > lp_bad:
        return 2
    if lp_good < lp_bad:
        return 0
    return 1


def pair_accuracy(
    scored: Sequence[tuple[TokenLogProbs, TokenLogProbs]],
    paradigms: Sequence[str] | None = None,
    suite: str = "suite",
) -> SuiteAccuracy:
    """Fraction of pairs where the good side outscores the bad side.

    A pair counts 1 for a win, 0 for a loss, 0.5 for an exact tie. When
    `paradigms` gives one label per pair, per-paradigm means are reported
    alongside the overall mean.
    """
    if not scored:
        raise ValueError("no pairs to score")
    if paradigms is not None and len(paradigms) != len(scored):
        raise ValueError(f"{len(paradigms)} paradigm labels for {len(scored)} pairs")

    total_x2 = 0
    by_paradigm_x2: dict[str, int] = defaultdict(int)
    by_paradigm_n: dict[str, int] = defaultdict(int)
    for idx, (good, bad) in enumerate(scored):
        if good.side != "good" or bad.side != "bad":
            raise ValueError(f"pair {good.pair_id!r}: sides passed in wrong order")
        if good.pair_id != bad.pair_id:
            raise ValueError(f"mismatched pair ids {good.pair_id!r} vs {bad.pair_id!r}")
        s = _pair_score_x2(good, bad)
        total_x2 += s
        if paradigms is not None:
            by_paradigm_x2[paradigms[idx]] += s
            by_paradigm_n[paradigms[idx]] += 1

    n = len(scored)
    per_paradigm = {
        label: by_paradigm_x2[label] / (2 * by_paradigm_n[label])
        for label in sorted(by_paradigm_x2)
    }
    return SuiteAccuracy(
        suite=suite,
        overall=total_x2 / (2 * n),
        per_paradigm=per_paradigm,
        n_pairs=n,
    )


def collate_sides(entries: Iterable[TokenLogProbs]) -> list[tuple[TokenLogProbs, TokenLogProbs]]:
    """Group a flat dump into (good, bad) tuples, erroring on gaps.

    Pairs come back in first-appearance order of their ids.
    """
    by_id: dict[str, dict[str, TokenLogProbs]] = {}
    order: list[str] = []
    for entry in entries:
        slot = by_id.setdefault(entry.pair_id, {})
        if not slot:
            order.append(entry.pair_id)
        if entry.side in slot:
            raise ValueError(f"pair {entry.pair_id!r}: duplicate {entry.side} side")
        slot[entry.side] = entry
    pairs = []
    for pair_id in order:
        slot = by_id[pair_id]
        for side in ("good", "bad"):
            if side not in slot:
                raise ValueError(f"pair {pair_id!r}: missing {side} side")
        pairs.append((slot["good"], slot["bad"]))
    return pairs


def read_logprob_dump(path: "str | Path") -> list[TokenLogProbs]:
    """Read a JSONL dump of {pair_id, side, logprobs} records."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise ValueError(f"{path}:{lineno}: malformed JSON ({err.msg})") from err
            for key in ("pair_id", "side", "logprobs"):
                if key not in record:
                    raise ValueError(f"{path}:{lineno}: missing key {key!r}")
            entries.append(
                TokenLogProbs(
                    pair_id=record["pair_id"],
                    side=record["side"],
                    logprobs=tuple(float(x) for x in record["logprobs"]),
                )
            )
    return entries


def logprob_dump_lines(entries: Iterable[TokenLogProbs]) -> str:
    lines = [
        json.dumps(
            {"pair_id": e.pair_id, "side": e.side, "logprobs": list(e.logprobs)},
            ensure_ascii=False,
        )
        for e in entries
    ]
    return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class NgramModel:
    """Additive-smoothed n-gram model over whitespace or pre-split symbols.

    Contexts are the order-1 preceding symbols, left-padded with START;
    the event space is the training vocabulary plus END, so every smoothed
    next-symbol distribution sums to 1 over exactly |vocabulary| + 1 events.
    """

    order: int
    alpha: float
    vocabulary: frozenset[str]
    counts: Mapping[tuple[str, ...], Counter]
    context_totals: Mapping[tuple[str, ...], int]

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    def event_count(self) -> int:
        return len(self.vocabulary) + 1

    def logprob(self, context: Sequence[str], symbol: str) -> float:
        """Natural-log P(symbol | last order-1 context symbols)."""
        ctx = self._clip(context)
        v = self.event_count()
        total = self.context_totals.get(ctx, 0)
        count = self.counts.get(ctx, Counter())[symbol] if total else 0
        return math.log(count + self.alpha) - math.log(total + self.alpha * v)

    def _clip(self, context: Sequence[str]) -> tuple[str, ...]:
        n = self.order - 1
        if n == 0:
            return ()
        padded = [START] * n + list(context)
        return tuple(padded[-n:])


def train_ngram(corpus: Iterable["str | Sequence[str]"], order: int, alpha: float) -> NgramModel:
    """Count n-grams over START-padded, END-terminated symbol sequences."""
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    counts: dict[tuple[str, ...], Counter] = defaultdict(Counter)
    totals: dict[tuple[str, ...], int] = defaultdict(int)
    vocab: set[str] = set()
    n_sequences = 0
    for seq in corpus:
        symbols = tokenize_symbols(seq)
        n_sequences += 1
        vocab.update(symbols)
        padded = [START] * (order - 1) + symbols + [END]
        for i in range(order - 1, len(padded)):
            ctx = tuple(padded[i - order + 1 : i])
            counts[ctx][padded[i]] += 1
            totals[ctx] += 1
    if n_sequences == 0:
        raise ValueError("empty corpus")
    return NgramModel(
        order=order,
        alpha=alpha,
        vocabulary=frozenset(vocab),
        counts=dict(counts),
        context_totals=dict(totals),
    )


def ngram_logprobs(
    model: NgramModel, s: "str | Sequence[str]", pair_id: str = "", side: str = "good"
) -> TokenLogProbs:
    """Score a sequence left to right: one log-probability per symbol.

    No END event is appended, so summing over all sequences of a fixed
    length yields a proper distribution over that length. Symbols outside
    the training vocabulary are scored like any unseen event (the additive
    smoothing mass), which keeps every sequence scorable.
    """
    symbols = tokenize_symbols(s)
    if not symbols:
        raise ValueError("cannot score an empty sequence")
    lps = []
    for i, sym in enumerate(symbols):
        lps.append(model.logprob(symbols[:i], sym))
    return TokenLogProbs(pair_id=pair_id, side=side, logprobs=tuple(lps))


def score_suite_with_ngram(
    model: NgramModel, pairs: Sequence[MinimalPair], suite: str | None = None
) -> SuiteAccuracy:
    """Convenience wrapper: score every pair of a suite under the model."""
    scored = [
        (
            ngram_logprobs(model, p.good, pair_id=p.id, side="good"),
            ngram_logprobs(model, p.bad, pair_id=p.id, side="bad"),
        )
        for p in pairs
    ]
    paradigms = [p.paradigm for p in pairs]
    name = suite if suite is not None else (pairs[0].suite if pairs else "suite")
    return pair_accuracy(scored, paradigms=paradigms, suite=name)
