"""Instruction distributions for methods and whole apps.

A method's distribution counts its opcodes and API call sites by vocabulary
slot. An app's distribution is the element-wise sum over the set of methods
reachable from the call graph's entry points, each reachable method counted
exactly once no matter how many callers it has.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .callgraph import CallGraph, MethodRef, build_call_graph
from .model import AppModel, MethodModel
from .vocabulary import InstructionVocabulary, abstract_opcode


@dataclass(frozen=True)
class InstructionDistribution:
    counts: np.ndarray  # int64, length = vocabulary total_slots
    vocabulary_id: str

    def __post_init__(self):
        if self.counts.ndim != 1:
            raise ValueError("counts must be one-dimensional")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")


def method_id(m: MethodModel, vocab: InstructionVocabulary) -> InstructionDistribution:
    counts = np.zeros(vocab.total_slots, dtype=np.int64)
    for op in m.opcodes:
        slot = abstract_opcode(op, vocab)
        if slot is not None:
            counts[slot] += 1
    for site in m.call_sites:
        slot = abstract_opcode(site, vocab)
        if slot is not None:
            counts[slot] += 1
    return InstructionDistribution(counts=counts, vocabulary_id=vocab.fingerprint)


def app_id(
    app: AppModel,
    cg: CallGraph,
    vocab: InstructionVocabulary,
    l1_normalize: bool = False,
) -> InstructionDistribution:
    by_ref: dict[MethodRef, MethodModel] = {
        MethodRef(cls.class_name, m.name, m.descriptor): m for cls, m in app.methods()
    }
    counts = np.zeros(vocab.total_slots, dtype=np.int64)
    for ref in cg.reachable():
        m = by_ref.get(ref)
        if m is not None:
            counts += method_id(m, vocab).counts
    if l1_normalize:
        total = counts.sum()
        normalized = counts / total if total else counts.astype(np.float64)
        return InstructionDistribution(counts=normalized, vocabulary_id=vocab.fingerprint)
    return InstructionDistribution(counts=counts, vocabulary_id=vocab.fingerprint)


def extract_app_id(
    app: AppModel,
    vocab: InstructionVocabulary,
    entry_policy: str = "all",
    l1_normalize: bool = False,
) -> InstructionDistribution:
    cg = build_call_graph(app, vocab, entry_policy=entry_policy)
    return app_id(app, cg, vocab, l1_normalize=l1_normalize)


def extract_corpus_ids(
    apps: list[AppModel],
    vocab: InstructionVocabulary,
    entry_policy: str = "all",
    l1_normalize: bool = False,
    jobs: int = 1,
) -> dict[str, InstructionDistribution]:
    """Per-app distributions, keyed by app_id; extraction is pure per app."""
    def one(app: AppModel) -> InstructionDistribution:
        return extract_app_id(app, vocab, entry_policy=entry_policy, l1_normalize=l1_normalize)

    if jobs > 1 and len(apps) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            ids = list(pool.map(one, apps))
    else:
        ids = [one(app) for app in apps]
    return {app.app_id: dist for app, dist in zip(apps, ids)}


def ids_to_matrix(
    ids: dict[str, InstructionDistribution], order: list[str] | None = None
) -> tuple[list[str], np.ndarray]:
    """Stack distributions into a float matrix, rows in `order` (default: dict order)."""
    keys = list(ids) if order is None else order
    matrix = np.stack([np.asarray(ids[k].counts, dtype=np.float64) for k in keys])
    return keys, matrix


def distributions_to_csv(
    ids: dict[str, InstructionDistribution], vocab: InstructionVocabulary
) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["app_id", *vocab.abstract_slots])
    for key, dist in ids.items():
        writer.writerow([key, *(format(v) for v in dist.counts.tolist())])
    return out.getvalue()
