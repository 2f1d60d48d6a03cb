"""K-fold evaluation of the three retrieval systems.

Protocol per fold: the held-out originals' obfuscated counterparts are the
queries; the remaining originals are the search space. The ground truth for
a query is the search space's nearest neighbor of its un-obfuscated version
(which itself is never in the search space). Per-query hits feed Top@{1,5,10}
and MRR; training and query wall-clock are recorded per fold.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InsufficientFold
from .network import PcvNetwork, TrainingConfig, paired_training_set
from .pca import InstructionPca
from .search import CosineIndex, RankedResult, mrr, top_at_k
from .validation import as_float_vector

RESULT_LIST_LENGTH = 10
TOP_KS = (1, 5, 10)


@dataclass(frozen=True)
class CorpusPair:
    app_id: str
    original: np.ndarray    # instruction distribution of A_j
    obfuscated: np.ndarray  # instruction distribution of the obfuscated twin


@dataclass
class CorpusSplit:
    folds: list[list[str]]
    k: int

    def __post_init__(self):
        flat = [app_id for fold in self.folds for app_id in fold]
        assert len(flat) == len(set(flat)), "folds must be disjoint"
        if any(not fold for fold in self.folds):
            raise InsufficientFold(f"{self.k} folds over {len(flat)} apps leaves empty folds")


def split_folds(app_ids: list[str], k: int, seed: int) -> CorpusSplit:
    """Seeded disjoint exhaustive split; fold sizes differ by at most one."""
    rng = np.random.default_rng(seed)
    order = [app_ids[i] for i in rng.permutation(len(app_ids))]
    return CorpusSplit(folds=[order[i::k] for i in range(k)], k=k)


@dataclass
class SystemMetrics:
    top1: float
    top5: float
    top10: float
    mrr: float
    train_time_s: float
    query_time_s: float
    n_queries: int

    def __post_init__(self):
        assert 0.0 <= self.top1 <= self.top5 <= self.top10 <= 1.0, "Top@K must be nested"
        assert self.top1 - 1e-12 <= self.mrr <= self.top10 + 1e-12, "MRR must sit in [Top@1, Top@10]"

    def as_dict(self) -> dict:
        return {
            "top@1": self.top1,
            "top@5": self.top5,
            "top@10": self.top10,
            "mrr": self.mrr,
            "train_time_s": self.train_time_s,
            "query_time_s": self.query_time_s,
            "n_queries": self.n_queries,
        }


@dataclass
class FoldReport:
    fold_index: int
    metrics: dict[str, SystemMetrics]


@dataclass
class EvaluationReport:
    k: int
    systems: list[str]
    folds: list[FoldReport] = field(default_factory=list)
    aggregate: dict[str, SystemMetrics] = field(default_factory=dict)
    corpus_fingerprint: str = ""
    config_fingerprint: str = ""

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "systems": self.systems,
            "folds": [
                {"fold": f.fold_index,
                 "metrics": {s: m.as_dict() for s, m in f.metrics.items()}}
                for f in self.folds
            ],
            "aggregate": {s: m.as_dict() for s, m in self.aggregate.items()},
            "corpus_fingerprint": self.corpus_fingerprint,
            "config_fingerprint": self.config_fingerprint,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def _metrics_from_results(
    truths: list[str],
    results: list[RankedResult],
    train_time_s: float,
    query_time_s: float,
) -> SystemMetrics:
    n = len(results)
    tops = {
        k: sum(top_at_k(t, r, k) for t, r in zip(truths, results)) / n
        for k in TOP_KS
    }
    return SystemMetrics(
        top1=tops[1],
        top5=tops[5],
        top10=tops[10],
        mrr=mrr(truths, results),
        train_time_s=train_time_s,
        query_time_s=query_time_s,
        n_queries=n,
    )


def build_system_index(
    system: str, app_ids: list[str], id_matrix: np.ndarray, pca: InstructionPca | None = None
) -> CosineIndex:
    """Index over the training originals: PCVs for PCA-backed systems, raw IDs otherwise."""
    if system == "naive":
        vectors = id_matrix
    else:
        vectors = pca.transform(id_matrix)
    return CosineIndex.build(list(zip(app_ids, vectors)), system=system)


def obfuscated_query_vector(
    system: str,
    id_vec: np.ndarray,
    pca: InstructionPca | None = None,
    network: PcvNetwork | None = None,
) -> np.ndarray:
    id_vec = as_float_vector(id_vec, name="query distribution")
    if system == "macneto":
        return network.predict_one(id_vec)
    if system == "pure_pca":
        return pca.project(id_vec)
    return id_vec


def truth_query_vector(
    system: str, id_vec: np.ndarray, pca: InstructionPca | None = None
) -> np.ndarray:
    """Vector used to pick the ground-truth nearest neighbor of the original."""
    id_vec = as_float_vector(id_vec, name="truth distribution")
    if system == "naive":
        return id_vec
    return pca.project(id_vec)


def _derive_seed(seed: int, fold_index: int) -> int:
    return (seed * 1_000_003 + fold_index) % (2**63)


def _evaluate_fold(
    train_pairs: list[CorpusPair],
    test_pairs: list[CorpusPair],
    systems: list[str],
    n_components: int,
    training: TrainingConfig,
    n: int,
) -> dict[str, SystemMetrics]:
    train_ids = [p.app_id for p in train_pairs]
    train_orig = np.stack([p.original for p in train_pairs]).astype(np.float64)
    train_ob = np.stack([p.obfuscated for p in train_pairs]).astype(np.float64)

    out: dict[str, SystemMetrics] = {}
    for system in systems:
        t0 = time.perf_counter()
        pca = None
        network = None
        if system == "macneto":
            pca = InstructionPca(n_components).fit(train_orig)
            targets = pca.transform(train_orig)
            x, y = paired_training_set(train_orig, train_ob, targets)
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
        elif system == "pure_pca":
            pca = InstructionPca(n_components).fit(np.vstack([train_orig, train_ob]))
        train_time = time.perf_counter() - t0 if system != "naive" else 0.0

        index = build_system_index(system, train_ids, train_orig, pca=pca)
        truths = [
            index.best(truth_query_vector(system, p.original, pca=pca), query_id=p.app_id)
            for p in test_pairs
        ]
        t0 = time.perf_counter()
        results = [
            index.search(
                obfuscated_query_vector(system, p.obfuscated, pca=pca, network=network),
                n,
                query_id=p.app_id,
            )
            for p in test_pairs
        ]
        query_time = time.perf_counter() - t0
        out[system] = _metrics_from_results(truths, results, train_time, query_time)
    return out


def kfold_evaluate(
    pairs: list[CorpusPair],
    k: int = 8,
    systems: list[str] | None = None,
    n_components: int = 32,
    training: TrainingConfig | None = None,
    seed: int = 0,
    n: int = RESULT_LIST_LENGTH,
    corpus_fingerprint: str = "",
) -> EvaluationReport:
    systems = list(systems) if systems else ["macneto", "pure_pca", "naive"]
    training = training or TrainingConfig()
    by_id = {p.app_id: p for p in pairs}
    split = split_folds(sorted(by_id), k, seed)

    report = EvaluationReport(
        k=k,
        systems=systems,
        corpus_fingerprint=corpus_fingerprint,
        config_fingerprint=json.dumps(
            {
                "k": k,
                "n": n,
                "n_components": n_components,
                "seed": seed,
                "systems": systems,
                "training": vars(training),
            },
            sort_keys=True,
        ),
    )

    tested: set[str] = set()
    for fold_index, fold in enumerate(split.folds):
        test_set = set(fold)
        train_pairs = [p for p in pairs if p.app_id not in test_set]
        test_pairs = [by_id[a] for a in fold]
        if len(train_pairs) < n_components:
            raise InsufficientFold(
                f"fold {fold_index}: {len(train_pairs)} training apps < "
                f"{n_components} components"
            )
        fold_training = replace(training, seed=_derive_seed(training.seed, fold_index))
        metrics = _evaluate_fold(train_pairs, test_pairs, systems,
                                 n_components, fold_training, n)
        report.folds.append(FoldReport(fold_index=fold_index, metrics=metrics))
        assert not (test_set & tested), "an app landed in two test folds"
        tested |= test_set
    assert tested == set(by_id), "every app must be tested exactly once"

    for system in systems:
        total_queries = sum(f.metrics[system].n_queries for f in report.folds)

        def weighted(attr: str) -> float:
            return sum(
                getattr(f.metrics[system], attr) * f.metrics[system].n_queries
                for f in report.folds
            ) / total_queries

        report.aggregate[system] = SystemMetrics(
            top1=weighted("top1"),
            top5=weighted("top5"),
            top10=weighted("top10"),
            mrr=weighted("mrr"),
            train_time_s=sum(f.metrics[system].train_time_s for f in report.folds),
            query_time_s=sum(f.metrics[system].query_time_s for f in report.folds),
            n_queries=total_queries,
        )
    return report


def render_table(report: EvaluationReport) -> str:
    """Fixed-width text table: one block per fold plus the aggregate block."""
    header = (
        f"{'Exp':<10}{'System':<10}{'Train(s)':>10}{'Query(s)':>10}"
        f"{'Top@1':>8}{'Top@5':>8}{'Top@10':>8}{'MRR':>8}{'Boost@1':>10}"
    )
    lines = [header, "-" * len(header)]

    def block(label: str, metrics: dict[str, SystemMetrics]):
        naive = metrics.get("naive")
        for system, m in metrics.items():
            if system == "naive" or naive is None or naive.top1 == 0:
                boost = "N/A"
            else:
                boost = f"{(m.top1 / naive.top1 - 1) * 100:+.1f}%"
            lines.append(
                f"{label:<10}{system:<10}{m.train_time_s:>10.2f}{m.query_time_s:>10.2f}"
                f"{m.top1:>8.3f}{m.top5:>8.3f}{m.top10:>8.3f}{m.mrr:>8.3f}{boost:>10}"
            )

    for fold in report.folds:
        block(f"#{fold.fold_index + 1}", fold.metrics)
    block("all", report.aggregate)
    return "\n".join(lines) + "\n"
