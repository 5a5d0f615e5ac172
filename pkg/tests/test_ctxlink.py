"""Reference index, Bi-/Cross-Encoder inference, ANN behavior, serialization."""
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_corpus, make_record
from linkforge.ann import AnnForest
from linkforge.ctxlink import (
    Candidate,
    LinkError,
    LinkResult,
    build_reference_index,
    deserialize_index,
    link_bi,
    link_cross,
    serialize_index,
)
from linkforge.embed import CrossHead, cosine_distance, cross_probability, pool_mention, stub_encoder


def toy_corpus(n_entities=3, n_refs=2, n_queries=1, seed_word="wort"):
    """Entities with disjoint vocabularies; references/queries share an entity's words."""
    records = []
    for e in range(n_entities):
        eid = f"E{e}"
        for r in range(n_refs):
            surface = f"{seed_word}{e}"
            sentence = f"kontext{e}k{r} {surface} ende{e}e{r}"
            records.append(make_record(eid, surface, sentence=sentence, role="reference"))
        for q in range(n_queries):
            surface = f"{seed_word}{e}"
            sentence = f"frage{e}f{q} {surface} schluss{e}s{q}"
            records.append(make_record(eid, surface, sentence=sentence, role="query"))
    return make_corpus(records)


def brute_force_bi(corpus, encoder, sentence, span):
    """Direct double loop: per entity the min cosine distance over its references."""
    best = {}
    query_vec = pool_mention(encoder.encode(sentence, span), span).vector
    for rec in corpus.records:
        if rec.role != "reference":
            continue
        ref_vec = pool_mention(encoder.encode(rec.sentence, rec.span), rec.span).vector
        d = cosine_distance(query_vec, ref_vec)
        if rec.entity_id not in best or d < best[rec.entity_id]:
            best[rec.entity_id] = d
    return sorted(best.items(), key=lambda kv: (kv[1], kv[0]))


class TestBuildReferenceIndex:
    def test_one_entry_per_reference(self):
        corpus = toy_corpus(n_entities=3, n_refs=1)
        index = build_reference_index(corpus, stub_encoder(0))
        assert len(index) == 3

    def test_unlinkable_reported(self):
        records = [make_record("E1", "Leck", role="reference"), make_record("E2", "Flansch", role="query")]
        corpus = make_corpus(records)
        index = build_reference_index(corpus, stub_encoder(0))
        assert index.unlinkable == ("E2",)

    def test_encoder_failure_skips_record(self):
        class FlakyEncoder:
            dimension = 8
            supports_pair_encoding = False

            def encode(self, sentence, span):
                if "kaputt" in sentence:
                    raise RuntimeError("boom")
                return stub_encoder(0, 8).encode(sentence, span)

        records = [
            make_record("E1", "Leck", sentence="alles gut Leck hier", role="reference"),
            make_record("E2", "Flansch", sentence="kaputt Flansch satz", role="reference"),
        ]
        corpus = make_corpus(records)
        with pytest.warns(UserWarning, match="skipping"):
            index = build_reference_index(corpus, FlakyEncoder())
        assert len(index) == 1
        assert index.unlinkable == ("E2",)


class TestLinkBi:
    def test_singleton_index(self):
        corpus = toy_corpus(n_entities=1)
        index = build_reference_index(corpus, stub_encoder(0))
        query = next(r for r in corpus.records if r.role == "query")
        result = link_bi(query.sentence, query.span, index, stub_encoder(0))
        assert result.top.entity_id == "E0"

    def test_identical_sentence_distance_zero(self):
        corpus = toy_corpus()
        ref = next(r for r in corpus.records if r.role == "reference")
        index = build_reference_index(corpus, stub_encoder(0))
        result = link_bi(ref.sentence, ref.span, index, stub_encoder(0))
        assert result.top.entity_id == ref.entity_id
        assert result.top.score == pytest.approx(0.0, abs=1e-12)

    def test_empty_index_errors(self):
        corpus = make_corpus([make_record("E1", "Leck", role="query")])
        index = build_reference_index(corpus, stub_encoder(0))
        with pytest.raises(LinkError, match="empty"):
            link_bi("satz mit Leck drin", (9, 13), index, stub_encoder(0))

    def test_exact_mode_equals_brute_force(self):
        encoder = stub_encoder(5)
        corpus = toy_corpus(n_entities=5, n_refs=3, n_queries=2)
        index = build_reference_index(corpus, encoder)
        for query in corpus.records:
            if query.role != "query":
                continue
            expected = brute_force_bi(corpus, encoder, query.sentence, query.span)
            got = link_bi(query.sentence, query.span, index, encoder, top_k=len(expected))
            assert [c.entity_id for c in got.ranked] == [e for e, _ in expected]
            for cand, (_, dist) in zip(got.ranked, expected):
                assert cand.score == pytest.approx(dist, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10_000))
    def test_exact_mode_oracle_randomized(self, seed):
        rng = np.random.default_rng(seed)
        n_entities = int(rng.integers(1, 6))
        n_refs = int(rng.integers(1, 4))
        encoder = stub_encoder(int(rng.integers(0, 100)))
        corpus = toy_corpus(n_entities=n_entities, n_refs=n_refs, n_queries=1)
        index = build_reference_index(corpus, encoder)
        query = [r for r in corpus.records if r.role == "query"][int(rng.integers(0, n_entities))]
        expected = brute_force_bi(corpus, encoder, query.sentence, query.span)
        got = link_bi(query.sentence, query.span, index, encoder, top_k=1)
        assert got.top.entity_id == expected[0][0]


class TestLinkCross:
    def test_single_candidate_rank_one(self):
        corpus = toy_corpus(n_entities=1)
        refs = [r for r in corpus.records if r.role == "reference"]
        query = next(r for r in corpus.records if r.role == "query")
        encoder = stub_encoder(0)
        head = CrossHead.seeded(encoder.dimension, 0)
        result = link_cross(query.sentence, query.span, refs[:1], encoder, head)
        assert result.top.entity_id == "E0"

    def test_sort_contract(self):
        # a head with huge positive/negative bias contributions forces order
        corpus = toy_corpus(n_entities=2, n_refs=1)
        refs = [r for r in corpus.records if r.role == "reference"]
        query = next(r for r in corpus.records if r.role == "query")
        encoder = stub_encoder(0)

        class FixedEncoder:
            dimension = 1
            supports_pair_encoding = True

            def encode(self, sentence, span):
                return stub_encoder(0, 1).encode(sentence, span)

            def encode_pair(self, sa, spa, sb, spb):
                return np.array([10.0 if "kontext0" in sb else -10.0])

        head = CrossHead(weights=np.array([1.0]), bias=0.0)
        result = link_cross(query.sentence, query.span, refs, FixedEncoder(), head)
        assert [c.entity_id for c in result.ranked] == ["E0", "E1"]
        assert result.ranked[0].score > 0.9 and result.ranked[1].score < 0.1

    def test_requires_pair_encoding(self):
        class NoPair:
            dimension = 4
            supports_pair_encoding = False

            def encode(self, sentence, span):
                return stub_encoder(0, 4).encode(sentence, span)

        corpus = toy_corpus(n_entities=1)
        refs = [r for r in corpus.records if r.role == "reference"]
        with pytest.raises(LinkError, match="Bi-Encoder"):
            link_cross("a b", (0, 1), refs, NoPair(), CrossHead(weights=np.zeros(4), bias=0.0))

    def test_empty_candidates(self):
        encoder = stub_encoder(0)
        with pytest.raises(LinkError, match="candidate"):
            link_cross("a b", (0, 1), [], encoder, CrossHead.seeded(encoder.dimension, 0))

    def test_full_reference_set_equals_brute_force(self):
        encoder = stub_encoder(9)
        corpus = toy_corpus(n_entities=10, n_refs=2)
        refs = [r for r in corpus.records if r.role == "reference"]
        query = next(r for r in corpus.records if r.role == "query")
        head = CrossHead.seeded(encoder.dimension, 1)
        result = link_cross(query.sentence, query.span, refs, encoder, head)
        # oracle: brute-force double loop keeping each entity's max probability
        best = {}
        for rec in refs:
            vec = encoder.encode_pair(query.sentence, query.span, rec.sentence, rec.span)
            p = cross_probability(vec, head)
            if rec.entity_id not in best or p > best[rec.entity_id]:
                best[rec.entity_id] = p
        expected = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
        assert [c.entity_id for c in result.ranked] == [e for e, _ in expected]

    def test_monotone_transform_invariance(self):
        # scaling (W, b) by any positive factor must not change the ranking
        encoder = stub_encoder(2)
        corpus = toy_corpus(n_entities=6, n_refs=2)
        refs = [r for r in corpus.records if r.role == "reference"]
        query = next(r for r in corpus.records if r.role == "query")
        head = CrossHead.seeded(encoder.dimension, 3)
        scaled = CrossHead(weights=head.weights * 7.5, bias=head.bias * 7.5)
        a = link_cross(query.sentence, query.span, refs, encoder, head)
        b = link_cross(query.sentence, query.span, refs, encoder, scaled)
        assert [c.entity_id for c in a.ranked] == [c.entity_id for c in b.ranked]


class TestLinkResultInvariants:
    def test_distinct_entities(self):
        with pytest.raises(ValueError, match="distinct"):
            LinkResult(ranked=(
                Candidate(entity_id="E1", score=0.1, method="bi"),
                Candidate(entity_id="E1", score=0.2, method="bi"),
            ))

    def test_monotone_scores(self):
        with pytest.raises(ValueError, match="monotone"):
            LinkResult(ranked=(
                Candidate(entity_id="E1", score=0.5, method="bi"),
                Candidate(entity_id="E2", score=0.2, method="bi"),
            ))
        # descending is required for cross
        LinkResult(ranked=(
            Candidate(entity_id="E1", score=0.9, method="cross"),
            Candidate(entity_id="E2", score=0.4, method="cross"),
        ))

    def test_mixed_methods_rejected(self):
        with pytest.raises(ValueError, match="mixed"):
            LinkResult(ranked=(
                Candidate(entity_id="E1", score=0.1, method="bi"),
                Candidate(entity_id="E2", score=0.2, method="heuristic"),
            ))


class TestApproximateMode:
    def test_recall_against_exact_small(self):
        rng = np.random.default_rng(3)
        data = rng.standard_normal((800, 16))
        data /= np.linalg.norm(data, axis=1, keepdims=True)
        queries = rng.standard_normal((150, 16))
        queries /= np.linalg.norm(queries, axis=1, keepdims=True)
        forest = AnnForest(trees=16, leaf_size=16, search_k=400, seed=11).build(data)
        exact = np.argmax(data @ queries.T, axis=0)
        hits = sum(forest.query(q, top_k=1)[0][0] == int(exact[i]) for i, q in enumerate(queries))
        assert hits / len(queries) >= 0.95

    def test_rebuild_same_seed_bit_identical(self, tmp_path):
        corpus = toy_corpus(n_entities=6, n_refs=3)
        params = {"trees": 4, "leaf_size": 4, "search_k": 64, "seed": 123}
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        serialize_index(build_reference_index(corpus, stub_encoder(1), mode="approximate", ann_params=params), p1)
        serialize_index(build_reference_index(corpus, stub_encoder(1), mode="approximate", ann_params=params), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_approximate_matches_exact_on_toy(self):
        corpus = toy_corpus(n_entities=8, n_refs=3, n_queries=2)
        encoder = stub_encoder(4)
        exact = build_reference_index(corpus, encoder, mode="exact")
        approx = build_reference_index(
            corpus, encoder, mode="approximate",
            ann_params={"trees": 8, "leaf_size": 4, "search_k": 200, "seed": 0},
        )
        for query in corpus.records:
            if query.role != "query":
                continue
            a = link_bi(query.sentence, query.span, exact, encoder)
            b = link_bi(query.sentence, query.span, approx, encoder)
            assert a.top.entity_id == b.top.entity_id


class TestSerialization:
    def test_round_trip_exact(self, tmp_path):
        corpus = toy_corpus(n_entities=3)
        index = build_reference_index(corpus, stub_encoder(0))
        path = tmp_path / "ref.json"
        serialize_index(index, path)
        back = deserialize_index(path)
        assert back.entity_ids == index.entity_ids
        assert back.record_refs == index.record_refs
        assert back.mode == index.mode
        np.testing.assert_array_equal(back.vectors, index.vectors)
        # a second serialization must be byte-identical
        path2 = tmp_path / "ref2.json"
        serialize_index(back, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_round_trip_empty(self, tmp_path):
        corpus = make_corpus([])
        index = build_reference_index(corpus, stub_encoder(0))
        path = tmp_path / "ref.json"
        serialize_index(index, path)
        back = deserialize_index(path)
        assert len(back) == 0

    def test_corrupted_header(self, tmp_path):
        corpus = toy_corpus(n_entities=2)
        path = tmp_path / "ref.json"
        serialize_index(build_reference_index(corpus, stub_encoder(0)), path)
        payload = json.loads(path.read_text())
        payload["version"] = 42
        path.write_text(json.dumps(payload))
        with pytest.raises(ValueError, match="version"):
            deserialize_index(path)
        payload["format"] = "garbage"
        path.write_text(json.dumps(payload))
        with pytest.raises(ValueError, match="not a"):
            deserialize_index(path)

    def test_approximate_round_trip_preserves_queries(self, tmp_path):
        corpus = toy_corpus(n_entities=5, n_refs=2)
        encoder = stub_encoder(8)
        index = build_reference_index(
            corpus, encoder, mode="approximate",
            ann_params={"trees": 4, "leaf_size": 4, "search_k": 64, "seed": 1},
        )
        path = tmp_path / "ref.json"
        serialize_index(index, path)
        back = deserialize_index(path)
        query = next(r for r in corpus.records if r.role == "query")
        a = link_bi(query.sentence, query.span, index, encoder)
        b = link_bi(query.sentence, query.span, back, encoder)
        assert [c.entity_id for c in a.ranked] == [c.entity_id for c in b.ranked]
