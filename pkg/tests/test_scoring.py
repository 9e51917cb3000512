import itertools
import math

import numpy as np
import pytest

from hemitrace import scoring
from toy_grammar import agreement_corpus, agreement_pairs


def tlp(pair_id, side, *lps):
    return scoring.TokenLogProbs(pair_id=pair_id, side=side, logprobs=tuple(lps))


class TestSentenceLogprob:
    def test_examples(self):
        assert scoring.sentence_logprob(tlp("a", "good", -1.0, -2.0)) == -3.0
        assert scoring.sentence_logprob(tlp("a", "good", 0.0)) == 0.0
        assert scoring.sentence_logprob(tlp("a", "good", *([-0.5] * 100))) == -50.0

    def test_validation(self):
        with pytest.raises(ValueError, match="empty"):
            tlp("a", "good")
        with pytest.raises(ValueError, match="> 0"):
            tlp("a", "good", 0.1)
        with pytest.raises(ValueError, match="side"):
            tlp("a", "best", -1.0)


class TestPairAccuracy:
    def test_win_loss_tie(self):
        scored = [
            (tlp("a", "good", -3.0), tlp("a", "bad", -4.0)),
            (tlp("b", "good", -1.0), tlp("b", "bad", -1.0)),
            (tlp("c", "good", -5.0), tlp("c", "bad", -2.0)),
        ]
        acc = scoring.pair_accuracy(scored)
        assert acc.overall == pytest.approx(1.5 / 3)
        assert acc.n_pairs == 3

    def test_three_wins_one_loss(self):
        scored = [
            (tlp(f"p{i}", "good", g), tlp(f"p{i}", "bad", b))
            for i, (g, b) in enumerate([(-1.0, -2.0), (-1.0, -2.0), (-1.0, -2.0), (-2.0, -1.0)])
        ]
        assert scoring.pair_accuracy(scored).overall == 0.75

    def test_single_tie_suite(self):
        scored = [(tlp("a", "good", -1.0), tlp("a", "bad", -1.0))]
        assert scoring.pair_accuracy(scored).overall == 0.5

    def test_per_paradigm_weighted_mean(self):
        rng = np.random.default_rng(0)
        scored = []
        paradigms = []
        for i in range(60):
            g, b = -rng.exponential(size=2)
            scored.append((tlp(f"p{i}", "good", g), tlp(f"p{i}", "bad", b)))
            paradigms.append(f"para{i % 3}")
        acc = scoring.pair_accuracy(scored, paradigms=paradigms)
        weighted = sum(acc.per_paradigm[f"para{j}"] * 20 for j in range(3)) / 60
        assert abs(acc.overall - weighted) < 1e-12

    def test_swap_symmetry(self):
        rng = np.random.default_rng(1)
        scored = []
        swapped = []
        for i in range(101):
            g = -float(rng.integers(1, 5))
            b = -float(rng.integers(1, 5))
            scored.append((tlp(f"p{i}", "good", g), tlp(f"p{i}", "bad", b)))
            swapped.append((tlp(f"p{i}", "good", b), tlp(f"p{i}", "bad", g)))
        acc = scoring.pair_accuracy(scored).overall
        assert scoring.pair_accuracy(swapped).overall == pytest.approx(1.0 - acc)

    def test_constant_shift_keeps_winners(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            n_tokens = int(rng.integers(2, 6))
            g = tuple(-rng.exponential(size=n_tokens))
            b = tuple(-rng.exponential(size=n_tokens))
            base = scoring.pair_accuracy([(tlp("x", "good", *g), tlp("x", "bad", *b))])
            shift = -float(rng.exponential())
            shifted = scoring.pair_accuracy(
                [
                    (
                        tlp("x", "good", *(v + shift for v in g)),
                        tlp("x", "bad", *(v + shift for v in b)),
                    )
                ]
            )
            assert shifted.overall == base.overall

    def test_mismatched_ids_raise(self):
        with pytest.raises(ValueError, match="mismatched"):
            scoring.pair_accuracy([(tlp("a", "good", -1.0), tlp("b", "bad", -2.0))])

    def test_empty_raises(self):
        with pytest.raises(ValueError, match="no pairs"):
            scoring.pair_accuracy([])


class TestCollate:
    def test_groups_in_first_appearance_order(self):
        entries = [
            tlp("b", "bad", -2.0),
            tlp("a", "good", -1.0),
            tlp("b", "good", -1.0),
            tlp("a", "bad", -3.0),
        ]
        pairs = scoring.collate_sides(entries)
        assert [g.pair_id for g, _ in pairs] == ["b", "a"]

    def test_missing_side_names_pair(self):
        with pytest.raises(ValueError, match="pair 'a': missing bad"):
            scoring.collate_sides([tlp("a", "good", -1.0)])

    def test_duplicate_side_names_pair(self):
        with pytest.raises(ValueError, match="pair 'a': duplicate good"):
            scoring.collate_sides([tlp("a", "good", -1.0), tlp("a", "good", -2.0)])


class TestDumpIO:
    def test_round_trip(self, tmp_path):
        entries = [tlp("a", "good", -1.0, -0.25), tlp("a", "bad", -2.5)]
        path = tmp_path / "dump.jsonl"
        path.write_text(scoring.logprob_dump_lines(entries), encoding="utf-8")
        assert scoring.read_logprob_dump(path) == entries

    def test_missing_key_raises(self, tmp_path):
        path = tmp_path / "dump.jsonl"
        path.write_text('{"pair_id": "a", "side": "good"}\n')
        with pytest.raises(ValueError, match="missing key 'logprobs'"):
            scoring.read_logprob_dump(path)


class TestNgram:
    def test_bigram_closed_form(self):
        alpha = 0.5
        model = scoring.train_ngram(["a b", "a b"], order=2, alpha=alpha)
        v = model.event_count()
        assert v == 3  # {a, b} plus the end symbol
        expected = math.log((2 + alpha) / (2 + alpha * v))
        assert model.logprob(["a"], "b") == pytest.approx(expected, abs=1e-12)

    def test_unseen_context_uniform(self):
        model = scoring.train_ngram(["a b", "b a"], order=3, alpha=0.3)
        v = model.event_count()
        assert model.logprob(["b", "b"], "a") == pytest.approx(math.log(1 / v), abs=1e-12)

    def test_distributions_sum_to_one(self):
        rng = np.random.default_rng(3)
        vocab = [f"w{i}" for i in range(6)]
        corpus = [
            " ".join(vocab[j] for j in rng.integers(6, size=rng.integers(1, 8)))
            for _ in range(50)
        ]
        model = scoring.train_ngram(corpus, order=3, alpha=0.2)
        events = sorted(model.vocabulary) + [scoring.END]
        for _ in range(100):
            context = [vocab[j] for j in rng.integers(6, size=rng.integers(0, 4))]
            total = sum(math.exp(model.logprob(context, e)) for e in events)
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_length2_sequences_normalize(self):
        # each conditional is a distribution over vocabulary + end symbol, so
        # P summed over every length-2 string of that event space is exactly 1
        model = scoring.train_ngram(["x y z", "z y", "x x y"], order=2, alpha=0.7)
        vocab = sorted(model.vocabulary)
        assert len(vocab) == 3
        total = 0.0
        for s in itertools.product(vocab + [scoring.END], repeat=2):
            lps = scoring.ngram_logprobs(model, list(s))
            total += math.exp(scoring.sentence_logprob(lps))
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_unigram_scores_sum_of_logs(self):
        model = scoring.train_ngram(["a a b"], order=1, alpha=1.0)
        lps = scoring.ngram_logprobs(model, "a a b")
        expected = 2 * model.logprob([], "a") + model.logprob([], "b")
        assert scoring.sentence_logprob(lps) == pytest.approx(expected, abs=1e-12)

    def test_all_outputs_nonpositive(self):
        model = scoring.train_ngram(["a b c", "c b a"], order=2, alpha=0.5)
        lps = scoring.ngram_logprobs(model, "c a q")  # q is out of vocabulary
        assert all(lp <= 0 for lp in lps.logprobs)

    def test_validation(self):
        with pytest.raises(ValueError, match="order"):
            scoring.train_ngram(["a"], order=0, alpha=0.5)
        with pytest.raises(ValueError, match="alpha"):
            scoring.train_ngram(["a"], order=1, alpha=0.0)
        with pytest.raises(ValueError, match="empty corpus"):
            scoring.train_ngram([], order=1, alpha=0.5)
        model = scoring.train_ngram(["a"], order=1, alpha=0.5)
        with pytest.raises(ValueError, match="empty"):
            scoring.ngram_logprobs(model, [])

    def test_agreement_suite_beats_chance(self):
        model = scoring.train_ngram(agreement_corpus(400, seed=10), order=3, alpha=0.1)
        acc = scoring.score_suite_with_ngram(model, agreement_pairs(80, seed=11))
        assert acc.overall > 0.5
        assert acc.suite == "toy_agreement"
        assert set(acc.per_paradigm) == {"subject_verb_agreement"}


class TestSuiteAccuracyType:
    def test_range_validation(self):
        with pytest.raises(ValueError, match="outside"):
            scoring.SuiteAccuracy(suite="s", overall=1.2, per_paradigm={}, n_pairs=1)
        with pytest.raises(ValueError, match="outside"):
            scoring.SuiteAccuracy(suite="s", overall=0.5, per_paradigm={"p": -0.1}, n_pairs=1)
