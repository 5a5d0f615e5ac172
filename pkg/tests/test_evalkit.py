"""Evaluation harness: top-1 accuracy, noun detection, synonyms, AP, latency."""
import time

import pytest
from hypothesis import given, strategies as st

from conftest import make_corpus, make_record
from linkforge.ctxlink import Candidate, LinkResult, build_reference_index, link_bi
from linkforge.embed import stub_encoder
from linkforge.evalkit import (
    SynonymSuggestion,
    average_precision,
    detect_nouns,
    discover_synonyms,
    evaluate_top1,
    render_accuracy_table,
    time_linkers,
)


def bi_result(entity_id, score=0.1):
    return LinkResult(ranked=(Candidate(entity_id=entity_id, score=score, method="bi"),))


def sample_queries(n=10):
    return [
        make_record(f"E{i % 3}", f"name{i % 3}", sentence=f"satz {i} über name{i % 3}.", role="query")
        for i in range(n)
    ]


class TestEvaluateTop1:
    def test_oracle_linker_scores_one(self):
        queries = sample_queries()
        report = evaluate_top1(lambda q: bi_result(q.entity_id), queries)
        assert report.top1_accuracy == 1.0
        assert report.query_count == len(queries)
        assert report.per_method["bi"]["count"] == len(queries)

    def test_constant_wrong_linker_scores_zero(self):
        report = evaluate_top1(lambda q: bi_result("WRONG"), sample_queries())
        assert report.top1_accuracy == 0.0

    def test_unlinkable_gold_excluded(self):
        queries = sample_queries(6)
        report = evaluate_top1(
            lambda q: bi_result(q.entity_id), queries, linkable_entities={"E0", "E1"}
        )
        assert report.excluded_count == 2  # every third query is E2
        assert report.query_count == 4
        assert report.top1_accuracy == 1.0

    def test_empty_results_counted_under_none(self):
        report = evaluate_top1(lambda q: LinkResult(ranked=()), sample_queries(4))
        assert report.per_method["none"]["count"] == 4
        assert report.top1_accuracy == 0.0

    def test_permutation_invariant(self):
        queries = sample_queries(9)
        flaky = lambda q: bi_result(q.entity_id if q.entity_id != "E2" else "WRONG")
        a = evaluate_top1(flaky, queries)
        b = evaluate_top1(flaky, list(reversed(queries)))
        assert a.top1_accuracy == b.top1_accuracy
        assert {k: v["count"] for k, v in a.per_method.items()} == {
            k: v["count"] for k, v in b.per_method.items()
        }

    def test_breakdown_sums_to_query_count(self):
        def mixed(q):
            if q.entity_id == "E0":
                return LinkResult(ranked=(Candidate(entity_id="E0", score=0.0, method="heuristic"),))
            return bi_result(q.entity_id)

        report = evaluate_top1(mixed, sample_queries(9))
        assert sum(b["count"] for b in report.per_method.values()) == report.query_count

    def test_render_table(self):
        report = evaluate_top1(lambda q: bi_result(q.entity_id), sample_queries(4))
        text = render_accuracy_table({"bi": report})
        assert "Classifier" in text and "100.00" in text


class TestDetectNouns:
    def test_german_sentence(self):
        nouns = detect_nouns("Der Kunde hat Ölaustritt an der Frässpindel.")
        surfaces = [n for n, _ in nouns]
        assert surfaces == ["Kunde", "Ölaustritt", "Frässpindel"]
        for noun, (start, end) in nouns:
            assert "Der Kunde hat Ölaustritt an der Frässpindel."[start:end] == noun

    def test_all_lowercase_empty(self):
        assert detect_nouns("alles klein geschrieben hier.") == []

    def test_sentence_initial_capitalized_stopword_excluded(self):
        assert all(n != "Der" for n, _ in detect_nouns("Der Motor läuft."))

    def test_internal_stopword_excluded(self):
        # "Die" capitalized mid-sentence is still a stopword
        nouns = detect_nouns("Heute prüfte Die Firma alles.")
        assert all(n != "Die" for n, _ in nouns)

    def test_custom_tagger_port(self):
        class FixedTagger:
            def nouns(self, sentence):
                return [("Leck", (0, 4))]

        assert detect_nouns("Leck hier", FixedTagger()) == [("Leck", (0, 4))]

    def test_punctuation_stripped_from_spans(self):
        nouns = detect_nouns('Es gab "Riefen" am Teil.')
        assert ("Riefen", (8, 14)) in nouns


class TestDiscoverSynonyms:
    def synonym_corpus(self):
        records = [
            make_record("Leck", "Leck", sentence="Am Ventil ein Leck entdeckt.", role="reference"),
            make_record(
                "Leck", "Ölaustritt",
                sentence="Schon wieder Ölaustritt gemeldet worden.", role="reference",
            ),
            make_record(
                "Leck", "Ölaustritt",
                sentence="Der Monteur sah Ölaustritt beim Test.", role="query",
            ),
            make_record("Flansch", "Flansch", sentence="Der alte Flansch wackelt stark.", role="reference"),
        ]
        return make_corpus(records)

    def make_linker(self, corpus):
        encoder = stub_encoder(seed=5)
        index = build_reference_index(corpus, encoder)
        return lambda mention, sentence, span: link_bi(sentence, span, index, encoder)

    def test_canonical_name_found_at_zero(self):
        corpus = self.synonym_corpus()
        linker = self.make_linker(corpus)
        suggestions = discover_synonyms(corpus.entities["Leck"], corpus, linker)
        by_noun = {s.noun: s for s in suggestions}
        assert "Leck" in by_noun
        assert by_noun["Leck"].distance == pytest.approx(0.0, abs=1e-12)
        assert by_noun["Leck"].known

    def test_synonym_recovered_and_flagged_known(self):
        corpus = self.synonym_corpus()
        suggestions = discover_synonyms(corpus.entities["Leck"], corpus, self.make_linker(corpus))
        by_noun = {s.noun: s for s in suggestions}
        assert "Ölaustritt" in by_noun
        assert by_noun["Ölaustritt"].known  # registered as a reference surface

    def test_empty_corpus(self):
        corpus = self.synonym_corpus()
        empty = make_corpus([])
        linker = self.make_linker(corpus)
        assert discover_synonyms(corpus.entities["Leck"], empty, linker) == []

    def test_sorted_ascending_and_shuffle_stable(self):
        corpus = self.synonym_corpus()
        linker = self.make_linker(corpus)
        a = discover_synonyms(corpus.entities["Leck"], corpus, linker)
        shuffled = make_corpus(list(reversed(corpus.records)))
        b = discover_synonyms(corpus.entities["Leck"], shuffled, linker)
        assert [s.noun for s in a] == [s.noun for s in b]
        assert all(x.distance <= y.distance for x, y in zip(a, a[1:]))


class TestAveragePrecision:
    def suggestion(self, judgment):
        return SynonymSuggestion(noun="x", distance=0.1, record_ref="r", judgment=judgment)

    def test_all_relevant(self):
        items = [self.suggestion("match")] * 3
        assert average_precision(items) == 1.0

    def test_single_relevant_first(self):
        items = [self.suggestion("match"), self.suggestion("non-match"), self.suggestion("non-match")]
        assert average_precision(items) == 1.0

    def test_mixed(self):
        items = [self.suggestion("non-match"), self.suggestion("match"), self.suggestion("match")]
        assert average_precision(items) == pytest.approx((1 / 2 + 2 / 3) / 2)

    def test_zero_relevant_is_zero(self):
        assert average_precision([self.suggestion("non-match")]) == 0.0

    def test_maybe_configurable(self):
        items = [self.suggestion("maybe"), self.suggestion("match")]
        assert average_precision(items) == pytest.approx(1 / 2)
        assert average_precision(items, maybe_is_relevant=True) == 1.0

    def test_requires_judgments(self):
        with pytest.raises(ValueError):
            average_precision([SynonymSuggestion(noun="x", distance=0.0, record_ref="r")])

    def test_perfect_ordering_iff_one(self):
        perfect = [self.suggestion("match"), self.suggestion("match"), self.suggestion("non-match")]
        imperfect = [self.suggestion("match"), self.suggestion("non-match"), self.suggestion("match")]
        assert average_precision(perfect) == 1.0
        assert average_precision(imperfect) < 1.0

    @given(st.lists(st.sampled_from(["match", "non-match", "maybe"]), min_size=1, max_size=12))
    def test_range_and_perfect_ordering_property(self, sequence):
        items = [self.suggestion(j) for j in sequence]
        ap = average_precision(items)
        assert 0.0 <= ap <= 1.0
        relevant = [j == "match" for j in sequence]
        sorted_perfectly = relevant == sorted(relevant, reverse=True)
        if any(relevant):
            assert (ap == 1.0) == sorted_perfectly
        else:
            assert ap == 0.0


class TestTimeLinkers:
    def test_self_comparison_ratio_near_one(self):
        queries = sample_queries(5)

        def linker(q):
            time.sleep(0.001)
            return bi_result(q.entity_id)

        comparison = time_linkers(linker, linker, queries, repetitions=3)
        assert 0.5 <= comparison.speed_ratio <= 2.0

    def test_slower_linker_detected(self):
        queries = sample_queries(3)

        def fast(q):
            return bi_result(q.entity_id)

        def slow(q):
            time.sleep(0.003)
            return bi_result(q.entity_id)

        comparison = time_linkers(fast, slow, queries, repetitions=2)
        assert comparison.speed_ratio > 2.0

    def test_single_query_single_repetition(self):
        comparison = time_linkers(
            lambda q: bi_result(q.entity_id),
            lambda q: bi_result(q.entity_id),
            sample_queries(1),
            repetitions=1,
        )
        assert comparison.bi.samples == 1
        assert comparison.cross.samples == 1
