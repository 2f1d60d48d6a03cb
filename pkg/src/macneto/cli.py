"""Command-line surface tying the pipeline together.

Machine-readable results go to stdout; diagnostics and progress go to
stderr. Exit codes: 0 ok, 1 usage, 2 data error, 3 internal. All randomness
flows from --seed (default 0, never wall-clock).
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from .errors import InsufficientFold, MacnetoError
from .evaluate import (
    CorpusPair,
    build_system_index,
    kfold_evaluate,
    obfuscated_query_vector,
    render_table,
    truth_query_vector,
)
from .features import distributions_to_csv, extract_corpus_ids, ids_to_matrix
from .keywords import TfidfKeywords
from .model import AppModel, load_app, load_corpus
from .network import PcvNetwork, TrainingConfig, paired_training_set
from .obfuscate import config_from_json, default_config
from .pca import InstructionPca
from .persist import TrainedModel, load_model, save_model
from .search import SYSTEMS
from .synth import generate_pairs, write_corpus
from .vocabulary import load_vocabulary

DEFAULT_SEED = 0
DEFAULT_COMPONENTS = 32

_SYSTEM_CHOICES = ("macneto", "pure-pca", "naive")


def _canon_system(name: str) -> str:
    return name.replace("-", "_")


def _echo_err(message: str) -> None:
    click.echo(message, err=True)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MacnetoError(f"config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise MacnetoError(f"config {path}: must be a JSON object")
    return doc


def _vocabulary(config: dict):
    features = config.get("features", {})
    return load_vocabulary(features.get("api_vocabulary"))


def _extract_ids(apps: list[AppModel], vocab, config: dict, jobs: int):
    features = config.get("features", {})
    return extract_corpus_ids(
        apps,
        vocab,
        entry_policy=features.get("entry_policy", "all"),
        l1_normalize=bool(features.get("l1_normalize", False)),
        jobs=jobs,
    )


def _training_config(config: dict, seed: int) -> TrainingConfig:
    doc = dict(config.get("training", {}))
    doc["seed"] = seed
    return TrainingConfig(**doc)


def _corpus_fingerprint(ids: dict) -> str:
    digest = hashlib.sha256()
    for app_id in sorted(ids):
        digest.update(app_id.encode())
        digest.update(np.asarray(ids[app_id].counts, dtype=np.float64).tobytes())
    return digest.hexdigest()


def _split_pairs(apps: list[AppModel]) -> tuple[list[AppModel], dict[str, AppModel]]:
    originals = [a for a in apps if a.pair_of is None]
    twins: dict[str, AppModel] = {}
    for app in apps:
        if app.pair_of is not None:
            if app.pair_of in twins:
                raise MacnetoError(f"app {app.pair_of!r} has two obfuscated counterparts")
            twins[app.pair_of] = app
    return originals, twins


def _corpus_pairs(apps: list[AppModel], ids: dict) -> list[CorpusPair]:
    originals, twins = _split_pairs(apps)
    pairs = []
    for app in originals:
        twin = twins.get(app.app_id)
        if twin is None:
            raise MacnetoError(f"original {app.app_id!r} has no obfuscated counterpart")
        pairs.append(
            CorpusPair(
                app_id=app.app_id,
                original=np.asarray(ids[app.app_id].counts, dtype=np.float64),
                obfuscated=np.asarray(ids[twin.app_id].counts, dtype=np.float64),
            )
        )
    return pairs


def _write_or_stdout(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@click.group(name="macneto")
def cli():
    """Obfuscation-resilient executable search toolkit."""


@cli.command()
@click.option("--manifest", required=True, type=click.Path())
@click.option("--out", type=click.Path(), default=None, help="features CSV (default stdout)")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
def ingest(manifest, out, config_path, jobs):
    """Parse a corpus and write per-app instruction distributions as CSV."""
    config = _load_config(config_path)
    vocab = _vocabulary(config)
    apps = load_corpus(manifest)
    if not apps:
        raise MacnetoError(f"manifest {manifest} lists no apps")
    ids = _extract_ids(apps, vocab, config, jobs)
    _write_or_stdout(distributions_to_csv(ids, vocab), out)
    _echo_err(f"ingested {len(apps)} apps ({vocab.total_slots} slots)")


@cli.command()
@click.option("--count", required=True, type=int)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@click.option("--config", "config_path", type=click.Path(), default=None)
def synth(count, out, seed, config_path):
    """Generate a synthetic corpus of (original, obfuscated) app pairs."""
    if count < 0:
        raise click.UsageError("--count must be >= 0")
    config = _load_config(config_path)
    if "obfuscation" in config:
        obf = config_from_json({**config["obfuscation"], "seed": seed})
    else:
        obf = default_config(seed=seed)
    vocab = _vocabulary(config)
    pairs = generate_pairs(count, seed, obf, vocab)
    manifest_path = write_corpus(pairs, out, corpus_id=f"synthetic-{count}-{seed}")
    click.echo(json.dumps({"manifest": str(manifest_path), "pairs": count}))


@cli.command()
@click.option("--manifest", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path(), help="model JSON path")
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@click.option("--system", type=click.Choice(["macneto", "pure-pca"]), default="macneto",
              show_default=True)
@click.option("--folds", type=int, default=None,
              help="fail early if a K-fold split would be infeasible")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
def train(manifest, out, seed, system, folds, config_path, jobs):
    """Fit principal components (and the classifier network) on a paired corpus."""
    config = _load_config(config_path)
    vocab = _vocabulary(config)
    n_components = int(config.get("n_components", DEFAULT_COMPONENTS))
    apps = load_corpus(manifest)
    ids = _extract_ids(apps, vocab, config, jobs)
    originals, twins = _split_pairs(apps)
    if len(originals) < n_components:
        raise InsufficientFold(
            f"{len(originals)} original apps < {n_components} components"
        )
    if folds is not None:
        smallest_train = len(originals) - (len(originals) + folds - 1) // folds
        if folds < 2 or smallest_train < n_components:
            raise InsufficientFold(
                f"a {folds}-fold split of {len(originals)} apps leaves "
                f"{smallest_train} training apps < {n_components} components"
            )

    orig_keys, orig_matrix = ids_to_matrix(ids, [a.app_id for a in originals])
    system_key = _canon_system(system)
    network = None
    if system_key == "macneto":
        pca = InstructionPca(n_components).fit(orig_matrix)
        targets = pca.transform(orig_matrix)
        paired = [i for i, key in enumerate(orig_keys) if key in twins]
        if paired:
            x_orig = orig_matrix[paired]
            x_ob = np.stack([
                np.asarray(ids[twins[orig_keys[i]].app_id].counts, dtype=np.float64)
                for i in paired
            ])
            x, y = paired_training_set(x_orig, x_ob, targets[paired])
        else:
            x, y = orig_matrix, targets
        unpaired = [i for i in range(len(orig_keys)) if i not in set(paired)]
        if paired and unpaired:
            x = np.vstack([x, orig_matrix[unpaired]])
            y = np.vstack([y, targets[unpaired]])
        training = _training_config(config, seed)
        network = PcvNetwork(
            learning_rate=training.learning_rate,
            beta1=training.beta1,
            beta2=training.beta2,
            epsilon=training.epsilon,
            epochs=training.epochs,
            batch_size=training.batch_size,
            seed=training.seed,
            input_scaling=training.input_scaling,
        ).fit(x, y)
    else:
        _, full_matrix = ids_to_matrix(ids)
        pca = InstructionPca(n_components).fit(full_matrix)

    model = TrainedModel(
        system=system_key,
        vocabulary_fingerprint=vocab.fingerprint,
        pca=pca,
        network=network,
        seed=seed,
        corpus_fingerprint=_corpus_fingerprint(ids),
        notes={"n_original_apps": len(originals), "n_paired_apps": len(twins)},
    )
    save_model(model, out)
    summary = {"model": str(out), "system": system_key, "apps": len(originals)}
    if network is not None:
        summary["final_loss"] = network.loss_history_[-1] if network.loss_history_ else None
    click.echo(json.dumps(summary))


def _build_index_from_manifest(manifest, system_key, model, config, jobs):
    vocab = _vocabulary(config)
    if model is not None and model.vocabulary_fingerprint != vocab.fingerprint:
        raise MacnetoError("model was built with a different instruction vocabulary")
    apps = load_corpus(manifest)
    originals = [a for a in apps if a.pair_of is None]
    if not originals:
        raise MacnetoError(f"manifest {manifest} has no original apps to index")
    ids = _extract_ids(originals, vocab, config, jobs)
    keys, matrix = ids_to_matrix(ids, [a.app_id for a in originals])
    index = build_system_index(
        system_key, keys, matrix, pca=model.pca if model is not None else None
    )
    return vocab, originals, ids, index


@cli.command()
@click.option("--manifest", required=True, type=click.Path(), help="index (search space)")
@click.option("--query", "query_path", required=True, type=click.Path())
@click.option("--model", "model_path", type=click.Path(), default=None)
@click.option("--system", type=click.Choice(_SYSTEM_CHOICES), default=None,
              help="defaults to the model's system, or naive without a model")
@click.option("--n", type=int, default=10, show_default=True)
@click.option("--out", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
def search(manifest, query_path, model_path, system, n, out, config_path, jobs):
    """Rank indexed originals by similarity to a (possibly obfuscated) query app."""
    config = _load_config(config_path)
    model = load_model(model_path) if model_path else None
    system_key = _resolve_system(system, model)
    vocab, _, _, index = _build_index_from_manifest(manifest, system_key, model, config, jobs)
    query_app = load_app(query_path)
    query_ids = _extract_ids([query_app], vocab, config, jobs=1)
    id_vec = np.asarray(query_ids[query_app.app_id].counts, dtype=np.float64)
    vector = obfuscated_query_vector(
        system_key, id_vec,
        pca=model.pca if model else None,
        network=model.network if model else None,
    )
    result = index.search(vector, n, query_id=query_app.app_id)
    doc = {
        "query_id": result.query_id,
        "system": system_key,
        "n": n,
        "hits": [{"app_id": h.app_id, "similarity": h.similarity} for h in result.hits],
    }
    _write_or_stdout(json.dumps(doc, indent=2) + "\n", out)


def _resolve_system(system: str | None, model: TrainedModel | None) -> str:
    if system is None:
        return model.system if model is not None else "naive"
    system_key = _canon_system(system)
    if system_key not in SYSTEMS:
        raise click.UsageError(f"unknown system {system!r}")
    if system_key == "naive":
        return system_key
    if model is None:
        raise click.UsageError(f"--system {system} requires --model")
    if model.system != system_key:
        raise MacnetoError(
            f"model file holds system {model.system!r}, not {system_key!r}"
        )
    if system_key == "macneto" and model.network is None:
        raise MacnetoError("model file lacks network parameters")
    return system_key


@cli.command()
@click.option("--manifest", required=True, type=click.Path())
@click.option("--folds", type=int, default=8, show_default=True)
@click.option("--system", "systems", type=click.Choice([*_SYSTEM_CHOICES, "all"]),
              multiple=True, default=("all",), show_default=True)
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@click.option("--n", type=int, default=10, show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="prefix: writes <out>.json and <out>.txt")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
def evaluate(manifest, folds, systems, seed, n, out, config_path, jobs):
    """K-fold retrieval evaluation of the requested systems on a paired corpus."""
    config = _load_config(config_path)
    vocab = _vocabulary(config)
    apps = load_corpus(manifest)
    ids = _extract_ids(apps, vocab, config, jobs)
    pairs = _corpus_pairs(apps, ids)
    wanted = list(SYSTEMS) if "all" in systems else [_canon_system(s) for s in systems]
    report = kfold_evaluate(
        pairs,
        k=folds,
        systems=wanted,
        n_components=int(config.get("n_components", DEFAULT_COMPONENTS)),
        training=_training_config(config, seed),
        seed=seed,
        n=n,
        corpus_fingerprint=_corpus_fingerprint(ids),
    )
    table = render_table(report)
    if out:
        Path(f"{out}.json").write_text(report.to_json() + "\n", encoding="utf-8")
        Path(f"{out}.txt").write_text(table, encoding="utf-8")
        click.echo(json.dumps({"report": f"{out}.json", "table": f"{out}.txt"}))
    else:
        click.echo(report.to_json())
    _echo_err(table)


@cli.command()
@click.option("--manifest", required=True, type=click.Path(), help="index with descriptions")
@click.option("--query", "query_path", required=True, type=click.Path())
@click.option("--model", "model_path", type=click.Path(), default=None)
@click.option("--system", type=click.Choice(_SYSTEM_CHOICES), default=None)
@click.option("--n", type=int, default=10, show_default=True, help="neighbors to retrieve")
@click.option("--top", type=int, default=10, show_default=True, help="keywords to emit")
@click.option("--out", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
def keywords(manifest, query_path, model_path, system, n, top, out, config_path, jobs):
    """Infer descriptive keywords for a query app from its neighbors' descriptions."""
    config = _load_config(config_path)
    model = load_model(model_path) if model_path else None
    system_key = _resolve_system(system, model)
    vocab, originals, _, index = _build_index_from_manifest(
        manifest, system_key, model, config, jobs
    )
    descriptions = {a.app_id: a.description or "" for a in originals}
    corpus = [d for d in descriptions.values() if d]
    if not corpus:
        raise MacnetoError("no descriptions in the index manifest")
    tfidf_config = config.get("keywords", {})
    keyworder = TfidfKeywords(
        min_token_len=int(tfidf_config.get("min_token_len", 3))
    ).fit(corpus)

    query_app = load_app(query_path)
    query_ids = _extract_ids([query_app], vocab, config, jobs=1)
    id_vec = np.asarray(query_ids[query_app.app_id].counts, dtype=np.float64)
    vector = obfuscated_query_vector(
        system_key, id_vec,
        pca=model.pca if model else None,
        network=model.network if model else None,
    )
    result = index.search(vector, n, query_id=query_app.app_id)
    retrieved = [descriptions[h.app_id] for h in result.hits]
    ranked = keyworder.infer(retrieved, top=top)
    doc = {
        "query_id": query_app.app_id,
        "system": system_key,
        "keywords": [{"keyword": term, "score": score} for term, score in ranked],
        "neighbors": [h.app_id for h in result.hits],
    }
    _write_or_stdout(json.dumps(doc, indent=2) + "\n", out)


def main(argv: list[str] | None = None) -> int:
    """Run the CLI with the documented exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        _echo_err(f"error: {exc.format_message()}")
        return 1
    except click.Abort:
        _echo_err("error: aborted")
        return 1
    except MacnetoError as exc:
        _echo_err(f"error: {exc}")
        return 2
    except OSError as exc:
        _echo_err(f"error: {exc}")
        return 2
    except Exception as exc:  # internal failure: still one structured line
        _echo_err(f"internal error: {type(exc).__name__}: {exc}")
        return 3
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
