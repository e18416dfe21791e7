"""Sentence embeddings, the content-addressed cache, and cosine similarity.

The retrieval pipeline never embeds anything twice: vectors live in a
JSON-lines cache keyed by (provider, hash of the space-joined tokens).
The built-in hash embedder is deterministic and offline, which makes whole
pipelines runnable without any model server.
"""

import tempfile
from pathlib import Path

from cpretrieval import (
    EmbeddingCache,
    HashEmbedder,
    TaggedSentence,
    cosine_similarity,
    embed,
    warm_cache,
)


def sentence(sid, text):
    tokens = tuple(text.split())
    return TaggedSentence(sid, tokens, ("O",) * len(tokens))


a = sentence(0, "swiss bonds ended mostly higher in quiet trading")
b = sentence(1, "swiss bonds ended mostly lower in quiet trading")
c = sentence(2, "the committee will reconvene after the summer recess")

provider = HashEmbedder(dim=256, seed=0)
cache_path = Path(tempfile.mkdtemp()) / "embeddings.jsonl"
cache = EmbeddingCache(cache_path)

# First call embeds and writes through; the second is a pure cache hit.
va = embed(a, provider, cache)
va_again = embed(a, provider, cache)
print(f"provider: {provider.provider_id}, dim {va.dim}")
print(f"cache entries after embedding one sentence: {len(cache)}")
print(f"second lookup bit-identical: {va.values.tobytes() == va_again.values.tobytes()}")

# Warm the rest in one go; warming twice is free.
stats = warm_cache([a, b, c], provider, cache)
print(f"warm pass: {stats.hits} hits, {stats.misses} misses\n")

vb = embed(b, provider, cache)
vc = embed(c, provider, cache)

print("cosine similarities (hashed bag-of-tokens):")
print(f"  near-duplicate pair : {cosine_similarity(va, vb):+.4f}")
print(f"  unrelated pair      : {cosine_similarity(va, vc):+.4f}")

# The cache file survives restarts: reload it and compare bytes.
reloaded = EmbeddingCache(cache_path)
hit = reloaded.get(provider.provider_id, a.tokens)
print(f"\nreloaded from {cache_path.name}: {len(reloaded)} entries")
print(f"restart round-trip bit-identical: {hit.values.tobytes() == va.values.tobytes()}")

# A remote provider (HTTP POST {"texts": [...]} -> {"vectors": [...]})
# drops in behind the same interface; see RemoteEmbeddingProvider.
