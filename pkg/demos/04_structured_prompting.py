"""Structured prompting: render a k-shot prompt and decode word by word.

The model never sees an instruction, only the Context/Tagged scaffold.
Decoding appends one test token at a time ("token_"), reads back a label,
repairs anything outside the scheme, and feeds the repaired label forward.
"""

from cpretrieval import (
    CompletionRequest,
    EmbeddingCache,
    HashEmbedder,
    OraclePLMClient,
    SelectionConfig,
    TaggedSentence,
    decode_sentence,
    evaluate,
    render_prompt,
    repair_label,
    run_task,
    scheme_for_task,
    warm_cache,
)
from cpretrieval.corpus import CorpusSplit

ner = scheme_for_task("ner")

EXAMPLES = [
    ("acme shares rose in london", "B-ORG O O O B-LOC"),
    ("james lee joined nordbank yesterday", "B-PER I-PER O B-ORG O"),
    ("markets closed higher after quiet trading", "O O O O O O"),
]
pool = CorpusSplit(
    "pool",
    tuple(
        TaggedSentence(i, tuple(t.split()), tuple(l.split()))
        for i, (t, l) in enumerate(EXAMPLES)
    ),
    ner,
)
test = TaggedSentence(0, tuple("nordbank shares fell in geneva".split()),
                      tuple("B-ORG O O O B-LOC".split()))
test_split = CorpusSplit("test", (test,), ner)

# --- the prompt -------------------------------------------------------------

prompt = render_prompt(list(pool), test, ner)
print("rendered 3-shot prompt")
print("-" * 60)
print(prompt.text)
print("-" * 60)
print(f"(the completion continues right after the final 'Tagged:')\n")

# --- one decoding step, spelled out -----------------------------------------

oracle = OraclePLMClient(test_split)  # answers with gold labels
step = prompt.text + f" {test.tokens[0]}_"
answer = oracle.complete(CompletionRequest(prompt=step, stop=(" ",)))
print(f"first step sends      : ...Tagged: {test.tokens[0]}_")
print(f"model answers         : {answer.text}")

# Malformed generations are repaired onto the scheme, never crashed on:
for raw in ("B-ORG", "b-loc", "B-ORGANIZATION", "banana"):
    label, repaired = repair_label(raw, ner)
    print(f"repair {raw!r:20} -> {label!r}" + ("  (repaired)" if repaired else ""))

# --- the whole sentence, then the whole split -------------------------------

labels, repairs = decode_sentence(prompt, test, oracle, ner)
print(f"\ndecoded labels        : {' '.join(labels)}")
print(f"gold labels           : {' '.join(test.labels)}")
print(f"repairs needed        : {len(repairs)}")

provider = HashEmbedder(dim=128, seed=0)
cache = EmbeddingCache()
warm_cache(list(pool) + [test], provider, cache)
cfg = SelectionConfig.for_task("ner", k=2, provider_id=provider.provider_id)

predictions = run_task(test_split, pool, cfg, "cp", oracle, cache)
report = evaluate(predictions, test_split)
print(f"\nfull run over the split: F1 = {report.f1:.3f} "
      f"({report.n_sentences} sentences, {report.n_tokens} tokens)")
print(f"selected examples for sentence 0: {predictions.rows[0].example_ids}")
