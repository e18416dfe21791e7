"""Grid search of the metric weights over the unit simplex.

Every lattice triple (w1, w2, w3) with the given step is evaluated by
running the full select/render/decode/evaluate pipeline on a development
split; the argmax triple wins, with deterministic tie-breaking.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from typing import IO

from .corpus import CorpusSplit
from .decoder import run_task
from .embedder import EmbeddingCache
from .errors import CPRetrievalError, ValidationError
from .evaluation import evaluate
from .plm_client import CompletionClient
from .scoring import SelectionConfig

logger = logging.getLogger(__name__)

DEFAULT_STEP = 0.05  # finest lattice containing all task presets


def enumerate_simplex(step: float = DEFAULT_STEP) -> list[tuple[float, float, float]]:
    """All nonnegative weight triples on the step lattice summing to one.

    With n = 1/step there are (n+1)(n+2)/2 points, each unique.
    """
    if step <= 0 or step > 1:
        raise ValueError(f"step must be in (0, 1], got {step}")
    n = round(1.0 / step)
    if abs(n * step - 1.0) > 1e-9:
        raise ValueError(f"step {step} does not divide 1 evenly")
    triples = []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            k = n - i - j
            triples.append((i * step, j * step, k * step))
    return triples


@dataclass(frozen=True)
class GridPoint:
    w1: float
    w2: float
    w3: float
    metric: float | None  # None records a failed run, never the argmax


@dataclass(frozen=True)
class GridSearchResult:
    best: tuple[float, float, float]
    metric_name: str
    points: tuple[GridPoint, ...]

    def write_csv(self, fh: IO[str]) -> None:
        writer = csv.writer(fh)
        writer.writerow(["w1", "w2", "w3", self.metric_name])
        for p in self.points:
            writer.writerow([p.w1, p.w2, p.w3, "" if p.metric is None else p.metric])
        writer.writerow(["best", *self.best])


def grid_search(
    dev: CorpusSplit,
    pool: CorpusSplit,
    cfg_base: SelectionConfig,
    client: CompletionClient,
    cache: EmbeddingCache,
    step: float = DEFAULT_STEP,
    jobs: int = 1,
) -> GridSearchResult:
    """Evaluate every simplex lattice point on the dev split.

    Ties break toward the larger w3, then the larger w2.  Grid points whose
    run fails are recorded with a missing metric and excluded from the
    argmax; if everything fails, that is an error.
    """
    metric_name = "f1" if dev.scheme.scheme_kind == "bio" else "accuracy"
    points: list[GridPoint] = []
    for w1, w2, w3 in enumerate_simplex(step):
        cfg = replace(cfg_base, w1=w1, w2=w2, w3=w3)
        try:
            predictions = run_task(dev, pool, cfg, "cp", client, cache, jobs=jobs)
            if len(predictions) == 0:
                raise ValidationError("every sentence of the grid run failed")
            report = evaluate(predictions, dev)
            metric = report.f1 if metric_name == "f1" else report.accuracy
        except CPRetrievalError as exc:
            logger.warning("grid point (%g, %g, %g) failed: %s", w1, w2, w3, exc)
            metric = None
        points.append(GridPoint(w1, w2, w3, metric))

    scored = [p for p in points if p.metric is not None]
    if not scored:
        raise ValidationError("grid search failed at every point")
    best = max(scored, key=lambda p: (p.metric, p.w3, p.w2))
    return GridSearchResult(
        best=(best.w1, best.w2, best.w3),
        metric_name=metric_name,
        points=tuple(points),
    )
