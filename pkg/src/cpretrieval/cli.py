"""Command-line pipeline: ingest, embed, select, run, eval, tune.

Every command is deterministic given its config, seed, and fixtures.
Failures exit with family-specific codes so scripts can tell a corrupted
corpus from a dead endpoint: 3 parse, 4 validation, 5 config, 6 transport.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import click

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import corpus as corpus_mod
from .corpus import CorpusSplit, parse_conll, parse_conllu, sample_test_subset, scheme_for_task
from .decoder import PredictionSet, run_task
from .embedder import (
    DEFAULT_DIM,
    DEFAULT_PROVIDER_ID,
    EmbeddingCache,
    HashEmbedder,
    RemoteEmbeddingProvider,
    warm_cache,
)
from .errors import ConfigError, CPRetrievalError, ParseError, TransportError
from .evaluation import evaluate, mismatched_sentences
from .plm_client import OraclePLMClient, RateLimiter, RecordingClient, RemotePLMClient, ReplayClient
from .scoring import SelectionConfig, score_pool, select_top_k, write_score_dump
from .tuner import grid_search

logger = logging.getLogger(__name__)

EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_CONFIG = 5
EXIT_TRANSPORT = 6

ENDPOINT_ENV = "CPRETRIEVAL_ENDPOINT"
TOKEN_ENV = "CPRETRIEVAL_TOKEN"
EMBED_ENDPOINT_ENV = "CPRETRIEVAL_EMBED_ENDPOINT"

DEFAULT_COLUMNS = {"ner": 3, "chunk": 2}


def _exit_code(exc: CPRetrievalError) -> int:
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    if isinstance(exc, TransportError):
        return EXIT_TRANSPORT
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    return EXIT_VALIDATION


def pipeline_command(fn):
    """Translate library errors into messages plus family exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except CPRetrievalError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(_exit_code(exc))
        except ValueError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML file supplying defaults for any option.")
@click.option("-v", "--verbose", is_flag=True, help="Log at DEBUG level.")
@click.pass_context
def main(ctx, config_path, verbose):
    """Complexity-based example retrieval for few-shot sequence tagging."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    conf = {}
    if config_path:
        with open(config_path, "rb") as fh:
            conf = tomllib.load(fh)
    ctx.obj = conf


def _conf(ctx, key, cli_value, default=None):
    """Resolution order: explicit flag, [command] table, top level, default."""
    if cli_value is not None:
        return cli_value
    conf = ctx.obj or {}
    section = conf.get(ctx.command.name, {})
    if key in section:
        return section[key]
    if key in conf:
        return conf[key]
    return default


def _parse_weights(text) -> tuple[float, float, float]:
    if isinstance(text, (list, tuple)):
        values = [float(v) for v in text]
    else:
        values = [float(p) for p in str(text).split(",")]
    if len(values) != 3:
        raise ConfigError(f"weights need exactly three components, got {values}")
    return tuple(values)  # type: ignore[return-value]


def load_split(path, task, fmt=None, column=None, bio_policy="repair", name=None) -> CorpusSplit:
    scheme = scheme_for_task(task)
    fmt = fmt or ("conllu" if task == "pos" else "conll")
    data = Path(path).read_bytes()
    name = name or Path(path).stem
    if fmt == "conllu":
        return parse_conllu(data, scheme, name=name)
    if column is None:
        column = DEFAULT_COLUMNS.get(task)
    if column is None:
        raise ConfigError(f"--column is required for conll format with task {task!r}")
    return parse_conll(data, column, scheme, name=name, on_invalid_bio=bio_policy)


def corpus_options(fn):
    fn = click.option("--bio-policy", type=click.Choice(["repair", "reject"]), default="repair",
                      show_default=True, help="What to do with invalid BIO transitions.")(fn)
    fn = click.option("--column", type=int, default=None,
                      help="Tag column for conll format (default: 3 for ner, 2 for chunk).")(fn)
    fn = click.option("--format", "fmt", type=click.Choice(["conll", "conllu"]), default=None,
                      help="Input format (default: conllu for pos, conll otherwise).")(fn)
    fn = click.option("--task", type=click.Choice(["ner", "chunk", "pos"]), required=True)(fn)
    return fn


def provider_options(fn):
    fn = click.option("--embed-endpoint", default=None,
                      help=f"Remote embedding URL (or ${EMBED_ENDPOINT_ENV}).")(fn)
    fn = click.option("--seed", "embed_seed", type=int, default=None,
                      help="Seed for the hash provider and the noisy oracle.")(fn)
    fn = click.option("--dim", type=int, default=None, help="Vector dimension.")(fn)
    fn = click.option("--provider-id", default=None,
                      help="Identifier of the remote provider's model.")(fn)
    fn = click.option("--provider", type=click.Choice(["hash", "remote"]), default=None,
                      help="Embedding provider (default: hash).")(fn)
    return fn


def _make_provider(ctx, provider, provider_id, dim, embed_seed, embed_endpoint):
    provider = _conf(ctx, "provider", provider, "hash")
    dim = int(_conf(ctx, "dim", dim, DEFAULT_DIM))
    embed_seed = int(_conf(ctx, "seed", embed_seed, 0))
    if provider == "hash":
        return HashEmbedder(dim=dim, seed=embed_seed)
    url = _conf(ctx, "embed_endpoint", embed_endpoint) or os.environ.get(EMBED_ENDPOINT_ENV)
    if not url:
        raise ConfigError(
            f"remote embedding provider needs --embed-endpoint or ${EMBED_ENDPOINT_ENV}"
        )
    return RemoteEmbeddingProvider(
        url,
        provider_id=_conf(ctx, "provider_id", provider_id, DEFAULT_PROVIDER_ID),
        dim=dim,
        token=os.environ.get(TOKEN_ENV),
    )


def selection_options(fn):
    fn = click.option("--exclude-duplicates", is_flag=True, default=False,
                      help="Drop pool sentences identical to the test sentence.")(fn)
    fn = click.option("--temperature", "sls_t", type=float, default=None,
                      help="Length-similarity temperature T.")(fn)
    fn = click.option("--weights", default=None, help="w1,w2,w3 (default: task preset).")(fn)
    fn = click.option("--k", type=int, default=None, help="Examples per prompt.")(fn)
    return fn


def _make_config(ctx, task, k, weights, sls_t, exclude_duplicates, provider) -> SelectionConfig:
    overrides = {}
    weights = _conf(ctx, "weights", weights)
    if weights is not None:
        w1, w2, w3 = _parse_weights(weights)
        overrides.update(w1=w1, w2=w2, w3=w3)
    k = _conf(ctx, "k", k)
    if k is not None:
        overrides["k"] = int(k)
    sls_t = _conf(ctx, "temperature", sls_t)
    if sls_t is not None:
        overrides["T"] = float(sls_t)
    overrides["provider_id"] = provider.provider_id
    overrides["exclude_duplicates"] = bool(exclude_duplicates)
    try:
        return SelectionConfig.for_task(task, **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


@main.command()
@corpus_options
@click.option("--jsonl", "jsonl_path", default=None,
              help="Export the parsed sentences as JSON lines (single input only).")
@click.argument("paths", nargs=-1, required=True, type=click.Path(exists=True))
@click.pass_context
@pipeline_command
def ingest(ctx, paths, jsonl_path, task, fmt, column, bio_policy):
    """Parse and validate corpora; print sentence and label statistics."""
    if jsonl_path and len(paths) != 1:
        raise ConfigError("--jsonl takes exactly one input file")
    for path in paths:
        split = load_split(path, task, fmt, column, bio_policy)
        counts = split.label_counts()
        click.echo(f"{path}: {len(split)} sentences, {split.token_count()} tokens")
        click.echo(f"  labels ({len(counts)}):")
        for label, count in counts.most_common():
            click.echo(f"    {label:10} {count}")
        if jsonl_path:
            Path(jsonl_path).write_text(corpus_mod.to_jsonl(split), encoding="utf-8")
            click.echo(f"  exported to {jsonl_path}")


@main.command()
@corpus_options
@provider_options
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--batch-size", type=int, default=64, show_default=True)
@click.option("--cache", "cache_path", default=None, required=False,
              help="JSON-lines embedding cache to fill.")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.pass_context
@pipeline_command
def embed(ctx, input_path, cache_path, batch_size, jobs, task, fmt, column, bio_policy,
          provider, provider_id, dim, embed_seed, embed_endpoint):
    """Fill the embedding cache for every sentence of a split (idempotent)."""
    cache_path = _conf(ctx, "cache", cache_path)
    if cache_path is None:
        raise ConfigError("--cache is required (path to the JSON-lines cache file)")
    split = load_split(input_path, task, fmt, column, bio_policy)
    prov = _make_provider(ctx, provider, provider_id, dim, embed_seed, embed_endpoint)
    cache = EmbeddingCache(cache_path)
    stats = warm_cache(split.sentences, prov, cache, batch_size=batch_size, jobs=jobs)
    click.echo(
        f"{input_path}: {stats.hits} hits, {stats.misses} misses; "
        f"cache now has {len(cache)} entries ({prov.provider_id})"
    )


def _warm_if_free(splits, provider, cache):
    """Hash embeddings cost nothing; compute them on the fly."""
    if isinstance(provider, HashEmbedder):
        for split in splits:
            warm_cache(split.sentences, provider, cache)


@main.command()
@corpus_options
@provider_options
@selection_options
@click.option("--dump-scores", "dump_path", default=None,
              help="Also write every candidate's full score record here.")
@click.option("--out", "out_path", required=True)
@click.option("--cache", "cache_path", default=None)
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True))
@click.pass_context
@pipeline_command
def select(ctx, test_path, pool_path, cache_path, out_path, dump_path, task, fmt, column,
           bio_policy, provider, provider_id, dim, embed_seed, embed_endpoint,
           k, weights, sls_t, exclude_duplicates):
    """Write the selected example ids for every test sentence."""
    test_split = load_split(test_path, task, fmt, column, bio_policy, name="test")
    pool = load_split(pool_path, task, fmt, column, bio_policy, name="pool")
    prov = _make_provider(ctx, provider, provider_id, dim, embed_seed, embed_endpoint)
    cache = EmbeddingCache(_conf(ctx, "cache", cache_path))
    cfg = _make_config(ctx, task, k, weights, sls_t, exclude_duplicates, prov)
    _warm_if_free([test_split, pool], prov, cache)

    dump_fh = open(dump_path, "w", encoding="utf-8") if dump_path else None
    try:
        with open(out_path, "w", encoding="utf-8") as out:
            for sentence in test_split:
                scores = score_pool(sentence, pool, cfg, cache)
                if dump_fh is not None:
                    write_score_dump(dump_fh, sentence.id, scores)
                ids = select_top_k(scores, cfg.k)
                out.write(json.dumps({"test_id": sentence.id, "example_ids": ids}) + "\n")
    finally:
        if dump_fh is not None:
            dump_fh.close()
    click.echo(f"wrote selections for {len(test_split)} sentences to {out_path}")


def _make_client(ctx, client_kind, gold, noise, seed, endpoint, fixture, record,
                 rate_calls, rate_interval, chat_wrap):
    client_kind = _conf(ctx, "client", client_kind, "oracle")
    if client_kind == "oracle":
        client = OraclePLMClient(gold)
    elif client_kind == "noisy-oracle":
        client = OraclePLMClient(gold, noise=float(_conf(ctx, "noise", noise, 0.2)),
                                 seed=int(_conf(ctx, "seed", seed, 0)))
    elif client_kind == "replay":
        fixture = _conf(ctx, "fixture", fixture)
        if not fixture:
            raise ConfigError("replay client needs --fixture")
        client = ReplayClient(fixture)
    elif client_kind == "remote":
        url = _conf(ctx, "endpoint", endpoint) or os.environ.get(ENDPOINT_ENV)
        if not url:
            raise ConfigError(f"remote client needs --endpoint or ${ENDPOINT_ENV}")
        limiter = None
        if rate_calls:
            limiter = RateLimiter(int(rate_calls), float(rate_interval or 60.0))
        client = RemotePLMClient(
            url,
            token=os.environ.get(TOKEN_ENV),
            rate_limiter=limiter,
            chat_wrap=bool(chat_wrap),
        )
    else:
        raise ConfigError(f"unknown client {client_kind!r}")
    if record:
        client = RecordingClient(client, record)
    return client


@main.command()
@corpus_options
@provider_options
@selection_options
@click.option("--chat-wrap", is_flag=True, default=False,
              help="Send the prompt as a single chat user message.")
@click.option("--rate-interval", type=float, default=None,
              help="Seconds per rate-limit window.")
@click.option("--rate-limit", "rate_calls", type=int, default=None,
              help="Max requests per window for the remote client.")
@click.option("--record", default=None, help="Record responses into this fixture file.")
@click.option("--fixture", default=None, help="Fixture file for the replay client.")
@click.option("--endpoint", default=None, help=f"Completion URL (or ${ENDPOINT_ENV}).")
@click.option("--noise", type=float, default=None, help="Noisy-oracle flip probability.")
@click.option("--client", "client_kind",
              type=click.Choice(["oracle", "noisy-oracle", "remote", "replay"]), default=None)
@click.option("--prompt-dir", default=None, help="Export each prompt byte-exactly here.")
@click.option("--resume", "resume_path", default=None,
              help="Reuse rows from this earlier predictions file when prompts match.")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--sample", type=int, default=None,
              help="Decode only a seeded random subset of this size.")
@click.option("--sample-seed", type=int, default=corpus_mod.DEFAULT_SAMPLE_SEED, show_default=True)
@click.option("--static-ids", default=None, help="Comma-separated ids for --strategy static.")
@click.option("--strategy", type=click.Choice(["cp", "knn", "static"]), default="cp",
              show_default=True)
@click.option("--out", "out_path", required=True)
@click.option("--cache", "cache_path", default=None)
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True))
@click.pass_context
@pipeline_command
def run(ctx, test_path, pool_path, cache_path, out_path, strategy, static_ids, sample,
        sample_seed, jobs, resume_path, prompt_dir, client_kind, noise, endpoint, fixture,
        record, rate_calls, rate_interval, chat_wrap, task, fmt, column, bio_policy,
        provider, provider_id, dim, embed_seed, embed_endpoint, k, weights, sls_t,
        exclude_duplicates):
    """Run the full pipeline and write a predictions file."""
    test_split = load_split(test_path, task, fmt, column, bio_policy, name="test")
    pool = load_split(pool_path, task, fmt, column, bio_policy, name="pool")
    if sample is not None:
        test_split = sample_test_subset(test_split, sample, sample_seed)
    prov = _make_provider(ctx, provider, provider_id, dim, embed_seed, embed_endpoint)
    cache = EmbeddingCache(_conf(ctx, "cache", cache_path))
    cfg = _make_config(ctx, task, k, weights, sls_t, exclude_duplicates, prov)
    if static_ids:
        ids = tuple(int(p) for p in str(static_ids).split(","))
        cfg = dataclasses.replace(cfg, static_example_ids=ids)
    if strategy != "static":
        _warm_if_free([test_split, pool], prov, cache)
    client = _make_client(ctx, client_kind, test_split, noise, embed_seed, endpoint,
                          fixture, record, rate_calls, rate_interval, chat_wrap)
    resume = PredictionSet.read_jsonl(resume_path) if resume_path and Path(resume_path).exists() else None
    predictions = run_task(
        test_split, pool, cfg, strategy, client, cache,
        jobs=jobs, resume=resume, prompt_dir=prompt_dir,
    )
    predictions.write_jsonl(out_path)
    click.echo(
        f"decoded {len(predictions)} sentences "
        f"({len(predictions.failures)} failures) -> {out_path}"
    )
    if predictions.failures:
        for test_id, message in predictions.failures[:10]:
            click.echo(f"  failed test_id {test_id}: {message}", err=True)


@main.command(name="eval")
@corpus_options
@click.option("--errors", "show_errors", is_flag=True, default=False,
              help="List ids of imperfect sentences.")
@click.option("--json", "json_path", default=None, help="Also write the report as JSON.")
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.pass_context
@pipeline_command
def eval_cmd(ctx, pred_path, gold_path, json_path, show_errors, task, fmt, column, bio_policy):
    """Score a predictions file against its gold split."""
    gold = load_split(gold_path, task, fmt, column, bio_policy, name="test")
    predictions = PredictionSet.read_jsonl(pred_path)
    report = evaluate(predictions, gold)
    click.echo(report.format_table())
    if json_path:
        Path(json_path).write_text(report.to_json() + "\n", encoding="utf-8")
    if show_errors:
        bad = mismatched_sentences(predictions, gold)
        click.echo(f"imperfect sentences ({len(bad)}): {bad}")


@main.command()
@corpus_options
@provider_options
@selection_options
@click.option("--fixture", default=None, help="Fixture file for the replay client.")
@click.option("--endpoint", default=None, help=f"Completion URL (or ${ENDPOINT_ENV}).")
@click.option("--noise", type=float, default=None, help="Noisy-oracle flip probability.")
@click.option("--client", "client_kind",
              type=click.Choice(["oracle", "noisy-oracle", "remote", "replay"]),
              default="oracle", show_default=True,
              help="Dev-set decoding backend; remote makes a paid sweep deliberate.")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--step", type=float, default=0.05, show_default=True)
@click.option("--out", "out_path", default=None, help="Write the full metric table as CSV.")
@click.option("--cache", "cache_path", default=None)
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True))
@click.option("--dev", "dev_path", required=True, type=click.Path(exists=True))
@click.pass_context
@pipeline_command
def tune(ctx, dev_path, pool_path, cache_path, out_path, step, jobs, client_kind, noise,
         endpoint, fixture, task, fmt, column, bio_policy, provider, provider_id, dim,
         embed_seed, embed_endpoint, k, weights, sls_t, exclude_duplicates):
    """Grid-search the weights on a development split."""
    dev = load_split(dev_path, task, fmt, column, bio_policy, name="dev")
    pool = load_split(pool_path, task, fmt, column, bio_policy, name="pool")
    prov = _make_provider(ctx, provider, provider_id, dim, embed_seed, embed_endpoint)
    cache = EmbeddingCache(_conf(ctx, "cache", cache_path))
    cfg = _make_config(ctx, task, k, weights, sls_t, exclude_duplicates, prov)
    _warm_if_free([dev, pool], prov, cache)
    client = _make_client(ctx, client_kind, dev, noise, embed_seed, endpoint,
                          fixture, None, None, None, False)
    result = grid_search(dev, pool, cfg, client, cache, step=step, jobs=jobs)
    click.echo(f"best weights: w1={result.best[0]:g} w2={result.best[1]:g} w3={result.best[2]:g}")
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            result.write_csv(fh)
        click.echo(f"wrote {len(result.points)} grid points to {out_path}")


if __name__ == "__main__":
    main()
