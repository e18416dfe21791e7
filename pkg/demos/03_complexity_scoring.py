"""The three complexity metrics and how they combine into a ranking.

A candidate demonstration is scored against the test sentence with
  - cosine similarity of sentence embeddings        (semantic closeness)
  - smoothed length similarity, 1/(1 + e^(|diff|/T)) (length closeness)
  - base-2 entropy of its label distribution         (label variety)
Each metric is divided by its pool-wide maximum, then combined as
w1 * length + w2 * entropy + w3 * similarity.  The top k seed the prompt.
"""

from cpretrieval import (
    EmbeddingCache,
    HashEmbedder,
    SelectionConfig,
    TaggedSentence,
    label_entropy,
    normalize,
    scheme_for_task,
    score_pool,
    select_top_k,
    smoothed_length_similarity,
    warm_cache,
)
from cpretrieval.corpus import CorpusSplit

ner = scheme_for_task("ner")

# --- the metrics in isolation ---------------------------------------------

print("smoothed length similarity (T = 3):")
for diff in (0, 1, 3, 6, 12, 30):
    print(f"  |len difference| = {diff:>2}  ->  {smoothed_length_similarity(10, 10 + diff, 3):.6f}")

print("\nlabel entropy (bits):")
for labels in (["O"] * 6, ["O", "O", "O", "B-PER"], ["B-PER", "O", "B-LOC", "I-LOC"]):
    print(f"  {' '.join(labels):40} -> {label_entropy(labels, ner):.4f}")

print("\nnormalization divides by the pool maximum:")
print(f"  [2, 4, 8] -> {normalize([2, 4, 8])}")

# --- a toy pool, scored end to end -----------------------------------------

POOL_ROWS = [
    ("markets closed higher in quiet london trading", "O O O O O B-LOC O"),
    ("markets closed lower after early gains", "O O O O O O"),
    ("acme shares fell while nordbank shares rose sharply", "B-ORG O O O B-ORG O O O"),
    ("the weather stayed calm across the region all week", "O O O O O O O O O"),
    ("james lee joined acme as chief dealer in geneva", "B-PER I-PER O B-ORG O O O O B-LOC"),
]

pool = CorpusSplit(
    "pool",
    tuple(
        TaggedSentence(i, tuple(t.split()), tuple(l.split()))
        for i, (t, l) in enumerate(POOL_ROWS)
    ),
    ner,
)
test = TaggedSentence(0, tuple("markets closed higher in london".split()), ("O",) * 5)

provider = HashEmbedder(dim=256, seed=0)
cache = EmbeddingCache()
warm_cache(list(pool) + [test], provider, cache)

cfg = SelectionConfig.for_task("ner", k=2, provider_id=provider.provider_id)
print(f"\ntask preset weights (w1, w2, w3) = {cfg.weights}, k = {cfg.k}")

scores = score_pool(test, pool, cfg, cache)
print(f"\n{'id':>2}  {'sim':>7} {'sls':>7} {'entropy':>7} | {'n_sim':>6} {'n_sls':>6} {'n_ent':>6} | {'score':>6}")
for c in scores:
    print(
        f"{c.candidate_id:>2}  {c.raw_sim:>7.4f} {c.raw_sls:>7.4f} {c.raw_entropy:>7.4f} "
        f"| {c.norm_sim:>6.4f} {c.norm_sls:>6.4f} {c.norm_entropy:>6.4f} "
        f"| {c.complexity:>6.4f}"
    )

chosen = select_top_k(scores, cfg.k)
print(f"\nselected example ids (best first): {chosen}")
for i in chosen:
    print(f"  [{i}] {' '.join(pool[i].tokens)}")
