import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from storybeam.corpus import BOS_ID, EOS_ID, PAD_ID, UNK_ID, Corpus, build_vocabulary
from storybeam.scoring import (
    NGramModel,
    ValidatingScorer,
    dump_ngram,
    load_ngram,
    load_scorer,
    load_table_scorer,
    train_ngram,
    validate_step_scores,
)

from conftest import make_table, random_table_scorer


class TestTableScorer:
    def test_uniform_default_row(self, uniform_table):
        vocab = uniform_table.vocab
        scores = uniform_table.score_step("img1", [])
        third = math.log(1 / 3)
        for tok in ("a", "b", "<eos>"):
            assert scores[vocab.token_to_id(tok)] == pytest.approx(third, abs=1e-12)
        assert scores[PAD_ID] == -np.inf
        assert scores[BOS_ID] == -np.inf
        assert scores[UNK_ID] == -np.inf

    def test_bitwise_deterministic(self, skewed_table):
        a = skewed_table.score_step("img1", [4, 5])
        b = skewed_table.score_step("img1", [4, 5])
        assert a.tobytes() == b.tobytes()

    def test_condition_row_overrides_default_only_for_that_condition(self):
        table = make_table(
            ["a", "b", "<eos>"], [0.5, 0.3, 0.2],
            rows=[{"condition": "img2", "probs": [0.1, 0.7, 0.2]}])
        vocab = table.vocab
        b = vocab.token_to_id("b")
        default = table.score_step("img1", [])
        overridden = table.score_step("img2", [])
        assert default[b] == pytest.approx(math.log(0.3))
        assert overridden[b] == pytest.approx(math.log(0.7))

    def test_context_suffix_pattern(self):
        table = make_table(
            ["a", "b", "<eos>"], [0.5, 0.3, 0.2],
            rows=[{"context": ["a"], "probs": [0.0, 0.0, 1.0]}])
        vocab = table.vocab
        a = vocab.token_to_id("a")
        after_a = table.score_step("img1", [a])
        assert after_a[EOS_ID] == pytest.approx(0.0)
        assert after_a[a] == -np.inf
        fresh = table.score_step("img1", [])
        assert fresh[a] == pytest.approx(math.log(0.5))

    def test_first_matching_row_wins(self):
        table = make_table(
            ["a", "b", "<eos>"], [0.5, 0.3, 0.2],
            rows=[{"context": ["a"], "probs": [0.0, 0.0, 1.0]},
                  {"context": ["a"], "probs": [1.0, 0.0, 0.0]}])
        a = table.vocab.token_to_id("a")
        assert table.score_step("x", [a])[EOS_ID] == pytest.approx(0.0)

    def test_prefix_with_eos_rejected(self, skewed_table):
        with pytest.raises(ValueError, match="EOS"):
            skewed_table.score_step("img1", [EOS_ID])

    def test_empty_condition_rejected(self, skewed_table):
        with pytest.raises(ValueError, match="condition"):
            skewed_table.score_step("", [])


class TestTableLoading:
    def test_loads_yaml_document(self):
        table = load_table_scorer(
            "vocab: [a, b, <eos>]\ndefault_row: [0.5, 0.3, 0.2]\n")
        assert table.vocab.non_special_tokens == ("a", "b")

    def test_row_sum_off_by_too_much_rejected(self):
        with pytest.raises(ValueError, match="sum"):
            make_table(["a", "b", "<eos>"], [0.5, 0.2, 0.2])

    def test_negative_probability_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            make_table(["a", "b", "<eos>"], [0.7, -0.2, 0.5])

    def test_unknown_context_token_rejected(self):
        with pytest.raises(ValueError, match="unknown context token"):
            make_table(["a", "<eos>"], [0.8, 0.2],
                       rows=[{"context": ["zebra"], "probs": [0.5, 0.5]}])

    def test_pad_bos_cannot_carry_probability(self):
        with pytest.raises(ValueError, match="never generated"):
            make_table(["a", "<bos>"], [0.5, 0.5])

    def test_row_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="probabilities"):
            make_table(["a", "b", "<eos>"], [0.5, 0.5])

    def test_malformed_yaml_rejected(self):
        with pytest.raises(ValueError, match="malformed"):
            load_table_scorer("vocab: [a\n  broken")

    def test_near_one_row_sum_is_renormalized(self):
        # within the 1e-6 acceptance window; scores must still be exact
        table = make_table(["a", "<eos>"], [0.6000001, 0.4])
        scores = table.score_step("c", [])
        total = math.exp(scores[table.vocab.token_to_id("a")]) + math.exp(scores[EOS_ID])
        assert total == pytest.approx(1.0, abs=1e-12)


def tiny_corpus(*lines: str) -> Corpus:
    return Corpus.from_text("\n".join(lines))


class TestNGram:
    def test_unigram_counts_dominate_at_small_alpha(self):
        corpus = tiny_corpus("a a a b")
        vocab = build_vocabulary(corpus, min_count=1)
        model = train_ngram(corpus, vocab, order=1, alpha=1e-9)
        scores = model.score_step("any", [])
        assert math.exp(scores[vocab.token_to_id("a")]) == pytest.approx(3 / 5, abs=1e-6)
        assert math.exp(scores[vocab.token_to_id("b")]) == pytest.approx(1 / 5, abs=1e-6)
        assert math.exp(scores[EOS_ID]) == pytest.approx(1 / 5, abs=1e-6)

    def test_laplace_hand_computed_value(self):
        # corpus {"a"}: count(a)=1, count(EOS)=1, total=2, event space {a, EOS, UNK}
        corpus = tiny_corpus("a")
        vocab = build_vocabulary(corpus, min_count=1)
        assert len(vocab) == 5
        model = train_ngram(corpus, vocab, order=1, alpha=1.0)
        scores = model.score_step("any", [])
        assert math.exp(scores[vocab.token_to_id("a")]) == pytest.approx(0.4, abs=1e-12)
        assert math.exp(scores[EOS_ID]) == pytest.approx(0.4, abs=1e-12)
        assert math.exp(scores[UNK_ID]) == pytest.approx(0.2, abs=1e-12)

    def test_unseen_context_is_uniform(self):
        corpus = tiny_corpus("a b", "b a")
        vocab = build_vocabulary(corpus, min_count=1)
        model = train_ngram(corpus, vocab, order=3, alpha=0.5)
        unk_context = [vocab.token_to_id("a"), vocab.token_to_id("a")]
        assert model.totals.get(tuple(unk_context), 0) == 0
        scores = model.score_step("any", unk_context)
        generable = scores[2:]
        assert np.allclose(generable, generable[0])

    def test_kl_to_uniform_shrinks_with_alpha(self):
        corpus = tiny_corpus("a a a a b", "a b c")
        vocab = build_vocabulary(corpus, min_count=1)
        uniform = 1.0 / (len(vocab) - 2)

        def kl(alpha: float) -> float:
            scores = train_ngram(corpus, vocab, 1, alpha).score_step("x", [])
            probs = np.exp(scores[2:])
            return float(np.sum(probs * np.log(probs / uniform)))

        divergences = [kl(a) for a in (0.1, 1.0, 10.0)]
        assert divergences[0] > divergences[1] > divergences[2]

    def test_condition_ignored(self):
        corpus = tiny_corpus("a b a")
        vocab = build_vocabulary(corpus, min_count=1)
        model = train_ngram(corpus, vocab, order=2, alpha=1.0)
        a = [vocab.token_to_id("a")]
        assert model.score_step("img1", a).tobytes() == model.score_step("img2", a).tobytes()

    def test_invalid_order_and_alpha(self):
        corpus = tiny_corpus("a")
        vocab = build_vocabulary(corpus, min_count=1)
        with pytest.raises(ValueError, match="order"):
            train_ngram(corpus, vocab, order=0, alpha=1.0)
        with pytest.raises(ValueError, match="alpha"):
            train_ngram(corpus, vocab, order=1, alpha=0.0)

    @given(st.integers(min_value=1, max_value=3), st.data())
    def test_scores_depend_only_on_context_window(self, order, data):
        corpus = tiny_corpus("a b a c", "b b a", "c a b")
        vocab = build_vocabulary(corpus, min_count=1)
        model = train_ngram(corpus, vocab, order=order, alpha=0.7)
        ids = [vocab.token_to_id(t) for t in ("a", "b", "c")]
        tail = data.draw(st.lists(st.sampled_from(ids), min_size=order - 1,
                                  max_size=order - 1))
        head_a = data.draw(st.lists(st.sampled_from(ids), max_size=4))
        head_b = data.draw(st.lists(st.sampled_from(ids), max_size=4))
        one = model.score_step("x", head_a + tail)
        other = model.score_step("x", head_b + tail)
        assert one.tobytes() == other.tobytes()

    def test_step_scores_contract_holds(self):
        corpus = tiny_corpus("a b c a", "b c", "a a")
        vocab = build_vocabulary(corpus, min_count=1)
        model = train_ngram(corpus, vocab, order=2, alpha=0.3)
        a = vocab.token_to_id("a")
        for prefix in ([], [a], [a, a]):
            validate_step_scores(model.score_step("x", prefix), len(vocab))


class TestNGramSerialization:
    def test_round_trip_scores_and_bytes(self):
        corpus = tiny_corpus("the cat sat", "the cat ran", "a cat")
        vocab = build_vocabulary(corpus, min_count=1)
        model = train_ngram(corpus, vocab, order=2, alpha=0.5)
        text = dump_ngram(model)
        loaded = load_ngram(text)
        assert dump_ngram(loaded) == text
        the = vocab.token_to_id("the")
        for prefix in ([], [the]):
            assert (loaded.score_step("x", prefix).tobytes()
                    == model.score_step("x", prefix).tobytes())

    def test_loader_dispatches_on_document_kind(self):
        corpus = tiny_corpus("a b")
        vocab = build_vocabulary(corpus, min_count=1)
        ngram_text = dump_ngram(train_ngram(corpus, vocab, 1, 1.0))
        assert isinstance(load_scorer(ngram_text), NGramModel)
        table_text = "vocab: [a, <eos>]\ndefault_row: [0.5, 0.5]\n"
        assert load_scorer(table_text).vocab.non_special_tokens == ("a",)
        with pytest.raises(ValueError, match="neither"):
            load_scorer("foo: bar\n")

    def test_corrupt_model_documents_rejected(self):
        with pytest.raises(ValueError, match="missing field"):
            load_ngram("order: 2\nalpha: 1.0\nvocab: ['<pad>','<bos>','<eos>','<unk>']\n")
        with pytest.raises(ValueError, match="special tokens"):
            load_ngram("order: 1\nalpha: 1.0\nvocab: [a]\ncounts: []\n")
        with pytest.raises(ValueError, match="not in the model vocabulary"):
            load_ngram("order: 1\nalpha: 1.0\n"
                       "vocab: ['<pad>','<bos>','<eos>','<unk>', a]\n"
                       "counts: [[[], zebra, 1]]\n")


class TestValidatingScorer:
    def test_passes_through_valid_scorer(self, skewed_table):
        wrapped = ValidatingScorer(skewed_table)
        scores = wrapped.score_step("img1", [])
        assert wrapped.calls == 1
        assert scores.tobytes() == skewed_table.score_step("img1", []).tobytes()

    def test_rejects_broken_scorer(self, skewed_table):
        class Broken:
            vocab = skewed_table.vocab

            def score_step(self, condition, prefix):
                scores = skewed_table.score_step(condition, prefix)
                return scores * 0.5  # no longer a distribution

        with pytest.raises(ValueError, match="not a distribution"):
            ValidatingScorer(Broken()).score_step("img1", [])

    def test_random_tables_all_satisfy_contract(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            scorer = random_table_scorer(rng, conditions=("c1", "c2"))
            wrapped = ValidatingScorer(scorer)
            wrapped.score_step("c1", [])
            wrapped.score_step("c2", [4])
        assert wrapped.calls == 2
