"""Acceptance suite: one test per release criterion, each printing a verdict.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines alongside pytest's own pass/fail output.
"""

import random
import time

import pytest

from cpretrieval.corpus import parse_conll, parse_conllu, scheme_for_task, serialize_conll, serialize_conllu
from cpretrieval.decoder import run_task
from cpretrieval.embedder import EmbeddingCache, HashEmbedder, warm_cache
from cpretrieval.evaluation import evaluate, extract_spans, micro_f1, token_accuracy
from cpretrieval.plm_client import OraclePLMClient, RecordingClient, RemotePLMClient, ReplayClient
from cpretrieval.prompting import parse_tagged_line, render_example, render_prompt
from cpretrieval.scoring import (
    PRESET_WEIGHTS,
    SelectionConfig,
    label_entropy,
    normalize,
    score_pool,
    select_top_k,
    smoothed_length_similarity,
)
from cpretrieval.tuner import enumerate_simplex, grid_search

from conftest import make_ner_corpus, make_pos_corpus
from test_evaluation import predictions_for, split_of, state_machine_spans
from test_prompting import reference_examples, reference_test_sentence
from test_scoring import brute_force_scores
from test_tuner import EntityHungryOracle, planted_fixture

NER = scheme_for_task("ner")
POS = scheme_for_task("pos")


def _verdict(number: int, detail: str) -> None:
    print(f"ACCEPTANCE {number}: PASS — {detail}")


def _embedded(pool, test_split, dim=16, seed=0):
    provider = HashEmbedder(dim, seed)
    cache = EmbeddingCache()
    warm_cache(list(pool) + list(test_split), provider, cache)
    return provider, cache


def test_criterion_1_metric_formulas():
    start = time.perf_counter()
    assert smoothed_length_similarity(10, 13, 3) == pytest.approx(0.26894142, abs=1e-8)
    for n, t in [(1, 3.0), (12, 3.0), (40, 1.0), (7, 0.5)]:
        assert smoothed_length_similarity(n, n, t) == 0.5
    assert label_entropy(["O", "O", "O", "B-PER"], NER) == pytest.approx(0.81127812, abs=1e-8)
    assert normalize([2, 4, 8]) == [0.25, 0.5, 1.0]
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    _verdict(1, f"metric formulas exact in {elapsed:.3f}s")


def test_criterion_2_selection_matches_brute_force_oracle():
    start = time.perf_counter()
    rng = random.Random(42)
    provider = HashEmbedder(16, 0)
    for trial in range(50):
        n = rng.randint(5, 500)
        pool = make_ner_corpus(n, seed=1000 + trial, name="pool")
        test = make_ner_corpus(1, seed=9000 + trial, name="test")[0]
        cache = EmbeddingCache()
        warm_cache(list(pool) + [test], provider, cache)
        cfg = SelectionConfig(
            w1=rng.random(), w2=rng.random(), w3=rng.random() + 1e-9,
            provider_id=provider.provider_id,
        )
        scores = score_pool(test, pool, cfg, cache)
        expected = brute_force_scores(test, pool, cfg, cache)
        for c in scores:
            assert abs(c.complexity - expected[c.candidate_id]) <= 1e-12
        k = rng.randint(1, n)
        full_sort = sorted(scores, key=lambda c: (-c.complexity, c.candidate_id))
        oracle_ids = [c.candidate_id for c in full_sort[:k]]
        picked = select_top_k(scores, k)
        assert picked == oracle_ids
        assert set(picked) == set(oracle_ids)
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    _verdict(2, f"50 random pools match the brute-force oracle in {elapsed:.1f}s")


def test_criterion_3_knn_baseline_reduction():
    pool = make_ner_corpus(200, seed=7, name="pool")
    test_split = make_ner_corpus(30, seed=70, name="test")
    provider, cache = _embedded(pool, test_split)
    cfg = SelectionConfig.for_task("ner", k=5, provider_id=provider.provider_id)
    oracle = OraclePLMClient(test_split)

    knn = run_task(test_split, pool, cfg, "knn", oracle, cache)
    from dataclasses import replace

    cp_sim_only = run_task(
        test_split, pool, replace(cfg, w1=0.0, w2=0.0, w3=1.0), "cp", oracle, cache
    )
    assert len(knn) == len(test_split)
    assert [r.example_ids for r in knn] == [r.example_ids for r in cp_sim_only]
    _verdict(3, "knn strategy identical to cp with weights (0,0,1) on all 30 sentences")


def test_criterion_4_end_to_end_oracle_run():
    start = time.perf_counter()

    # NER: ingest from serialized text, then embed/select/render/decode/eval
    ner_pool_text = serialize_conll(make_ner_corpus(60, seed=11, name="pool"))
    ner_test_text = serialize_conll(make_ner_corpus(50, seed=110, name="test"))
    pool = parse_conll(ner_pool_text, column=1, scheme=NER, name="pool")
    test_split = parse_conll(ner_test_text, column=1, scheme=NER, name="test")
    provider, cache = _embedded(pool, test_split)
    cfg = SelectionConfig.for_task("ner", k=5, provider_id=provider.provider_id)
    predictions = run_task(test_split, pool, cfg, "cp", OraclePLMClient(test_split), cache)
    assert len(predictions) == 50
    ner_report = micro_f1(predictions, test_split)
    assert ner_report.f1 == 1.0

    # POS over the CoNLL-U path
    pos_pool_text = serialize_conllu(make_pos_corpus(60, seed=12, name="pool"))
    pos_test_text = serialize_conllu(make_pos_corpus(50, seed=120, name="test"))
    pos_pool = parse_conllu(pos_pool_text, name="pool")
    pos_test = parse_conllu(pos_test_text, name="test")
    provider, cache = _embedded(pos_pool, pos_test)
    cfg = SelectionConfig.for_task("pos", k=5, provider_id=provider.provider_id)
    predictions = run_task(pos_test, pos_pool, cfg, "cp", OraclePLMClient(pos_test), cache)
    pos_report = token_accuracy(predictions, pos_test)
    assert pos_report.accuracy == 1.0

    elapsed = time.perf_counter() - start
    assert elapsed < 20.0
    _verdict(4, f"oracle pipeline: NER F1=1.000, POS acc=1.000 in {elapsed:.1f}s")


def test_criterion_5_noisy_oracle_calibration():
    pool = make_pos_corpus(40, seed=21, name="pool", min_len=8, max_len=14)
    test_split = make_pos_corpus(200, seed=210, name="test", min_len=8, max_len=14)
    provider, cache = _embedded(pool, test_split)
    cfg = SelectionConfig.for_task("pos", k=3, provider_id=provider.provider_id)
    noisy = OraclePLMClient(test_split, noise=0.2, seed=5)
    predictions = run_task(test_split, pool, cfg, "cp", noisy, cache)
    report = token_accuracy(predictions, test_split)
    assert report.n_tokens >= 2000
    assert 0.77 <= report.accuracy <= 0.83
    _verdict(
        5,
        f"noisy oracle p=0.2 gives accuracy {report.accuracy:.4f} "
        f"over {report.n_tokens} tokens",
    )


def test_criterion_6_prompt_format_fidelity():
    prompt = render_prompt(reference_examples(), reference_test_sentence(), NER)
    assert prompt.text.count("Context:") == 6
    assert prompt.text.count("Tagged:") == 6
    for line in prompt.text.splitlines():
        if line.startswith("Tagged: "):
            for unit in line[len("Tagged: "):].split():
                token, sep, label = unit.rpartition("_")
                assert sep == "_" and token and label in NER
    assert prompt.text.endswith("Tagged:")

    rng = random.Random(99)
    for _ in range(1000):
        n = rng.randint(1, 12)
        tokens = tuple(f"w{rng.randrange(10_000)}" for _ in range(n))
        labels = tuple(rng.choice(NER.labels) for _ in range(n))
        from cpretrieval.corpus import TaggedSentence

        sentence = TaggedSentence(0, tokens, labels)
        tagged_line = render_example(sentence).splitlines()[1][len("Tagged: "):]
        parsed = parse_tagged_line(tagged_line, NER)
        assert tuple(parsed.tokens) == tokens
        assert tuple(parsed.labels) == labels
        assert parsed.violations == []
    _verdict(6, "6-marker scaffold reproduced; 1000 fuzzed render/parse round trips")


def test_criterion_7_evaluator_fidelity():
    gold = split_of([["B-PER", "O", "B-LOC"]])
    pred = predictions_for(gold, [["B-PER", "O", "O"]])
    report = micro_f1(pred, gold)
    assert report.f1 == pytest.approx(0.66667, abs=1e-5)

    rng = random.Random(123)
    for _ in range(1000):
        labels = [rng.choice(NER.labels) for _ in range(rng.randint(0, 14))]
        assert extract_spans(labels) == state_machine_spans(labels)
    _verdict(7, "partial-credit F1 = 0.66667; span extraction matches the state machine")


def test_criterion_8_tuner():
    points = enumerate_simplex(0.5)
    assert len(points) == 6

    fine = enumerate_simplex(0.05)
    assert len(fine) == 231
    for preset in PRESET_WEIGHTS.values():
        assert any(
            max(abs(a - b) for a, b in zip(point, preset)) < 1e-12 for point in fine
        )

    dev, pool, cfg, cache = planted_fixture()
    result = grid_search(dev, pool, cfg, EntityHungryOracle(dev), cache, step=0.5)
    by_point = {(p.w1, p.w2, p.w3): p.metric for p in result.points}
    assert by_point[result.best] == 1.0
    assert result.best[1] > 0.0
    assert all(metric < 1.0 for point, metric in by_point.items() if point[1] == 0.0)
    _verdict(8, "lattice counts and presets verified; planted optimum recovered")


def test_criterion_9_endpoint_run_with_record_replay(completion_server, tmp_path):
    # Table-1-scale absolute scores need black-box or multi-billion-parameter
    # models and are deliberately not gated here; what is gated is that the
    # pipeline runs end to end against a configured endpoint and that
    # temperature-0 runs are reproducible through the recorded fixture.
    pool = make_ner_corpus(40, seed=31, name="pool")
    test_split = make_ner_corpus(12, seed=310, name="test")
    provider, cache = _embedded(pool, test_split)
    cfg = SelectionConfig.for_task("ner", k=3, provider_id=provider.provider_id)

    oracle = OraclePLMClient(test_split)
    server = completion_server(lambda prompt: _serve(oracle, prompt))
    fixture = tmp_path / "fixture.jsonl"

    live_client = RecordingClient(RemotePLMClient(server.url, sleep=lambda _: None), fixture)
    live = run_task(test_split, pool, cfg, "cp", live_client, cache)
    assert len(live) == len(test_split)
    live_report = evaluate(live, test_split)

    replayed = run_task(
        test_split, pool, cfg, "cp", ReplayClient(fixture), cache
    )
    replay_report = evaluate(replayed, test_split)

    assert [r.to_json() for r in replayed] == [r.to_json() for r in live]
    assert replay_report.to_json() == live_report.to_json()
    assert live_report.f1 == 1.0  # oracle-backed endpoint, so also perfect
    _verdict(
        9,
        f"remote endpoint run ({len(server.requests_seen)} requests) replayed "
        "bit-identically from the fixture",
    )


def _serve(oracle, prompt):
    from cpretrieval.plm_client import CompletionRequest

    return oracle.complete(CompletionRequest(prompt)).text
