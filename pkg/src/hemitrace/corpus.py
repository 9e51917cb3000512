"""Minimal-pair benchmark construction and suite I/O.

Two generated benchmark families (exact arithmetic statements and balanced
bracket sequences) plus a loader for externally authored minimal-pair suites
stored as JSON lines.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

OPEN_BRACKETS = ("(", "[", "{")
CLOSE_BRACKETS = (")", "]", "}")
DEFAULT_ERROR_SET = (-10, -2, -1, 1, 2, 10)

# default inclusive operand ranges per subtask
OPERAND_RANGES = {"addition": (0, 1000), "multiplication": (0, 100)}
OPERATOR_GLYPHS = {"addition": "+", "multiplication": "×"}


@dataclass(frozen=True)
class MinimalPair:
    """One acceptable string and a minimally corrupted counterpart."""

    id: str
    good: str
    bad: str
    paradigm: str
    suite: str
    field_label: str | None = None

    def __post_init__(self):
        if self.good == self.bad:
            raise ValueError(f"pair {self.id!r}: good and bad strings are identical")


@dataclass(frozen=True)
class ArithmeticSpec:
    """Parameters for the arithmetic minimal-pair generator.

    Operand bounds are inclusive; when left as None they default to the
    conventional ranges (0..1000 for addition, 0..100 for multiplication).
    """

    subtask: str
    count: int
    seed: int
    operand_lo: int | None = None
    operand_hi: int | None = None
    error_set: tuple[int, ...] = DEFAULT_ERROR_SET
    operator_glyph: str | None = None

    def __post_init__(self):
        if self.subtask not in OPERAND_RANGES:
            raise ValueError(f"unknown subtask {self.subtask!r}")
        if self.count <= 0:
            raise ValueError("count must be positive")
        if not self.error_set:
            raise ValueError("error_set must not be empty")
        if 0 in self.error_set:
            raise ValueError("error_set must not contain 0")
        lo, hi = self.bounds()
        if lo > hi:
            raise ValueError(f"operand_lo {lo} exceeds operand_hi {hi}")

    def bounds(self) -> tuple[int, int]:
        lo_default, hi_default = OPERAND_RANGES[self.subtask]
        lo = lo_default if self.operand_lo is None else self.operand_lo
        hi = hi_default if self.operand_hi is None else self.operand_hi
        return lo, hi

    def glyph(self) -> str:
        return OPERATOR_GLYPHS[self.subtask] if self.operator_glyph is None else self.operator_glyph


@dataclass(frozen=True)
class DyckSpec:
    """Parameters for the bracket-sequence minimal-pair generator."""

    k: int
    seed: int
    length: int = 32
    count: int = 1024

    def __post_init__(self):
        if self.k not in (1, 2, 3):
            raise ValueError(f"k must be in {{1, 2, 3}}, got {self.k}")
        if self.length <= 0 or self.length % 2 != 0:
            raise ValueError(f"length must be a positive even integer, got {self.length}")
        if self.count <= 0:
            raise ValueError("count must be positive")


def gen_arithmetic(spec: ArithmeticSpec) -> list[MinimalPair]:
    """Generate minimal pairs of exact vs. off-by-an-error statements.

    The good statement is "{x} {op} {y} = {z}" with z arithmetically exact;
    the bad statement replaces z with z + e for an error e drawn uniformly
    from the spec's error set, resampled until z + e >= 0.
    """
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.bounds()
    glyph = spec.glyph()
    errors = np.asarray(spec.error_set, dtype=np.int64)

    pairs = []
    for i in range(spec.count):
        x = int(rng.integers(lo, hi + 1))
        y = int(rng.integers(lo, hi + 1))
        z = x + y if spec.subtask == "addition" else x * y
        if not any(z + int(e) >= 0 for e in errors):
            raise ValueError(f"no error in {spec.error_set} keeps {z} + e >= 0")
        while True:
            e = int(errors[rng.integers(len(errors))])
            if z + e >= 0:
                break
        pairs.append(
            MinimalPair(
                id=f"{spec.subtask}-{i:04d}",
                good=f"{x} {glyph} {y} = {z}",
                bad=f"{x} {glyph} {y} = {z + e}",
                paradigm=spec.subtask,
                suite="arithmetic",
            )
        )
    return pairs


def _bracket_symbols(k: int) -> tuple[tuple[str, ...], tuple[str, ...], dict[str, str]]:
    opens = OPEN_BRACKETS[:k]
    closes = CLOSE_BRACKETS[:k]
    match = dict(zip(closes, opens))
    return opens, closes, match


def tokenize_symbols(s: "str | Sequence[str]") -> list[str]:
    """Split a bracket string into symbols (whitespace-separated if spaced)."""
    if isinstance(s, str):
        return s.split() if any(c.isspace() for c in s) else list(s)
    return list(s)


def validate_dyck(s: "str | Sequence[str]", k: int) -> bool:
    """Stack-discipline check: every closer matches the most recent unmatched
    opener and nothing stays open at the end.

    Symbols outside the 2k-bracket alphabet raise rather than return False.
    """
    if k not in (1, 2, 3):
        raise ValueError(f"k must be in {{1, 2, 3}}, got {k}")
    opens, closes, match = _bracket_symbols(k)
    stack: list[str] = []
    for sym in tokenize_symbols(s):
        if sym in opens:
            stack.append(sym)
        elif sym in closes:
            if not stack or stack[-1] != match[sym]:
                return False
            stack.pop()
        else:
            raise ValueError(f"symbol {sym!r} is not in the Dyck-{k} alphabet")
    return not stack


def _random_balanced(rng: np.random.Generator, length: int, k: int) -> list[str]:
    # Constrained walk: at each step the number of opens we can still afford
    # is (remaining - depth) // 2; open with probability proportional to that
    # budget (vs. the current depth), close the innermost bracket otherwise.
    # Closures are forced once the budget hits zero, so the walk always
    # terminates balanced at exactly `length` symbols.
    opens, closes, _ = _bracket_symbols(k)
    out: list[str] = []
    stack: list[int] = []
    while len(out) < length:
        remaining = length - len(out)
        budget = (remaining - len(stack)) // 2
        if not stack or (budget > 0 and int(rng.integers(budget + len(stack))) < budget):
            t = int(rng.integers(k))
            out.append(opens[t])
            stack.append(t)
        else:
            out.append(closes[stack.pop()])
    return out


def _swap_corruptions(good: list[str], k: int) -> list[int]:
    """Indices i in the second half whose (i, i+1) swap yields an invalid string."""
    length = len(good)
    candidates = []
    for i in range(length // 2, length - 1):
        if good[i] == good[i + 1]:
            continue
        bad = good.copy()
        bad[i], bad[i + 1] = bad[i + 1], bad[i]
        if not validate_dyck(bad, k):
            candidates.append(i)
    return candidates


def gen_dyck(spec: DyckSpec) -> list[MinimalPair]:
    """Generate balanced bracket strings paired with neighbor-swap corruptions.

    The corrupting swap position i is drawn uniformly from the second half
    [length/2, length-2] and resampled until the swapped string is invalid and
    differs from the original, so both sides share the same first half and the
    same symbol multiset. Strings whose second half admits no invalidating
    swap (possible for k=1) are discarded and regenerated.
    """
    rng = np.random.default_rng(spec.seed)
    pairs = []
    for i in range(spec.count):
        while True:
            good = _random_balanced(rng, spec.length, spec.k)
            if _swap_corruptions(good, spec.k):
                break
        while True:
            j = int(rng.integers(spec.length // 2, spec.length - 1))
            bad = good.copy()
            bad[j], bad[j + 1] = bad[j + 1], bad[j]
            if bad != good and not validate_dyck(bad, spec.k):
                break
        pairs.append(
            MinimalPair(
                id=f"dyck{spec.k}-{i:04d}",
                good=" ".join(good),
                bad=" ".join(bad),
                paradigm=f"dyck{spec.k}",
                suite=f"dyck{spec.k}",
            )
        )
    return pairs


SUITE_KEYS = ("id", "good", "bad", "paradigm")


def load_suite(path: "str | Path", suite: str | None = None) -> list[MinimalPair]:
    """Load a JSONL minimal-pair suite (keys id/good/bad/paradigm, optional field).

    Raises with the offending line number on malformed records and names the
    id on duplicates.
    """
    path = Path(path)
    suite_name = suite if suite is not None else path.stem
    pairs: list[MinimalPair] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise ValueError(f"{path}:{lineno}: malformed JSON ({err.msg})") from err
            if not isinstance(record, dict):
                raise ValueError(f"{path}:{lineno}: expected a JSON object")
            missing = [key for key in SUITE_KEYS if key not in record]
            if missing:
                raise ValueError(f"{path}:{lineno}: missing keys {missing}")
            for key in SUITE_KEYS:
                if not isinstance(record[key], str):
                    raise ValueError(f"{path}:{lineno}: key {key!r} must be a string")
            if record["id"] in seen:
                raise ValueError(f"{path}:{lineno}: duplicate id {record['id']!r}")
            seen.add(record["id"])
            pairs.append(
                MinimalPair(
                    id=record["id"],
                    good=record["good"],
                    bad=record["bad"],
                    paradigm=record["paradigm"],
                    suite=suite_name,
                    field_label=record.get("field"),
                )
            )
    return pairs


def suite_to_jsonl(pairs: Sequence[MinimalPair]) -> str:
    """Serialize pairs in the JSONL suite format (one object per line)."""
    lines = []
    for pair in pairs:
        record: dict = {"id": pair.id, "good": pair.good, "bad": pair.bad, "paradigm": pair.paradigm}
        if pair.field_label is not None:
            record["field"] = pair.field_label
        lines.append(json.dumps(record, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")
