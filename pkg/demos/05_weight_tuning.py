"""Grid-searching the metric weights on a development split.

The weight triple lives on the unit simplex; enumeration at step s yields
(1/s + 1)(1/s + 2)/2 lattice points.  Each point runs the full
select/render/decode/evaluate pipeline, so the search is honest about
interactions between selection and decoding.

The dev set here is constructed so that similarity alone picks useless
demonstrations: the lexically closest pool sentences carry no entities,
and the client only labels entities correctly when it has seen at least
one entity-bearing demonstration.  Only entropy weight can surface those.
"""

from cpretrieval import (
    CompletionResponse,
    EmbeddingCache,
    HashEmbedder,
    OraclePLMClient,
    SelectionConfig,
    TaggedSentence,
    enumerate_simplex,
    grid_search,
    parse_tagged_line,
    scheme_for_task,
    warm_cache,
)
from cpretrieval.corpus import CorpusSplit

ner = scheme_for_task("ner")

print(f"simplex lattice sizes: step 0.5 -> {len(enumerate_simplex(0.5))} points, "
      f"step 0.25 -> {len(enumerate_simplex(0.25))}, "
      f"step 0.05 -> {len(enumerate_simplex(0.05))}")

COMMON = ("alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta")
DISJOINT = ("omicron", "rho", "sigma", "tau", "upsilon", "phi", "chi", "psi")

plain = [
    TaggedSentence(i, tuple(COMMON[j % 8] for j in range(i, i + 6)), ("O",) * 6)
    for i in range(6)
]
tagged = [
    TaggedSentence(
        6 + i,
        tuple(DISJOINT[j % 8] for j in range(i, i + 5)) + ("nordbank",),
        ("O",) * 5 + ("B-ORG",),
    )
    for i in range(6)
]
pool = CorpusSplit("pool", tuple(plain + tagged), ner)
dev = CorpusSplit(
    "dev",
    tuple(
        TaggedSentence(i, tuple(COMMON[j % 8] for j in range(i, i + 5)) + ("acme",),
                       ("O",) * 5 + ("B-ORG",))
        for i in range(3)
    ),
    ner,
)


class EntityHungryClient(OraclePLMClient):
    """Gold labels only if some demonstration shows a non-O label."""

    def complete(self, request):
        demo_lines = [
            line[len("Tagged: "):]
            for line in request.prompt.split("\n")[:-1]
            if line.startswith("Tagged: ")
        ]
        informative = any(
            any(l != "O" for l in parse_tagged_line(line, ner).labels)
            for line in demo_lines
        )
        return super().complete(request) if informative else CompletionResponse("O")


provider = HashEmbedder(dim=64, seed=0)
cache = EmbeddingCache()
warm_cache(list(pool) + list(dev), provider, cache)
cfg = SelectionConfig(k=3, provider_id=provider.provider_id)

result = grid_search(dev, pool, cfg, EntityHungryClient(dev), cache, step=0.25)

print("\n w1    w2    w3    f1")
for point in result.points:
    marker = "  <- best" if (point.w1, point.w2, point.w3) == result.best else ""
    print(f" {point.w1:.2f}  {point.w2:.2f}  {point.w3:.2f}  {point.metric:.3f}{marker}")

w1, w2, w3 = result.best
print(f"\nbest triple: ({w1:g}, {w2:g}, {w3:g}) — "
      "entropy weight is what rescues the entity demonstrations")
