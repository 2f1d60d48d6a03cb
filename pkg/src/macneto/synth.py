"""Synthetic app generator for paired train/eval corpora.

Each app gets its own seeded profile (preferred opcode groups, preferred API
namespaces, size scale) so that apps are mutually distinguishable while still
overlapping enough to make retrieval non-trivial. Generation is pure given
(seed, index): the same seed reproduces the corpus byte for byte.
"""

from __future__ import annotations

import random
from dataclasses import replace
from pathlib import Path

from . import opcodes
from .model import (
    AppModel,
    CallSite,
    ClassModel,
    CorpusManifest,
    ManifestEntry,
    MethodModel,
    save_manifest,
    serialize_textual_app,
)
from .obfuscate import ObfuscationConfig, ObfuscationResult, obfuscate
from .vocabulary import OPCODE_GROUPS, InstructionVocabulary

_UNTRACKED = (
    "nop", "aconst_null", "iconst_0", "iconst_1", "iconst_2", "bipush", "ldc",
    "iload_1", "iload_2", "aload_0", "aload_1", "istore_1", "istore_2", "astore_1",
    "dup", "pop", "swap", "goto", "i2l", "f2i", "new", "checkcast",
    "getfield", "putfield", "getstatic", "ireturn", "return",
)

_DESCRIPTORS = ("()V", "(I)I", "()I", "(Ljava/lang/String;)V", "([B)V", "(II)I")

_API_CLASS_SUFFIXES = ("Reader", "Writer", "Builder", "Manager", "Helper",
                       "Channel", "Codec", "View", "Client", "Buffer")
_API_METHOD_NAMES = ("read", "write", "open", "close", "next", "get", "put",
                     "size", "apply", "reset", "start", "stop")

# opcode groups real method bodies lean on; the tail groups are left to
# whatever an obfuscator sprays in, keeping app variation and junk noise
# roughly orthogonal (as with real corpora, where PCA has signal to keep)
_CORE_GROUPS = ("xadd", "xsub", "xmul", "xdiv", "ifXXX", "xshift")

N_ARCHETYPES = 10


def _weighted_choice(rng: random.Random, items: list, weights: list[float]):
    return rng.choices(items, weights=weights, k=1)[0]


_MASTER_POOL_SIZE = 10


def _archetypes(seed: int, prefixes: list[str]) -> list[dict]:
    """Shared app profiles: corpora cluster around a few latent themes.

    All archetypes draw their API usage from one small master pool so the
    corpus spans a low-dimensional slice of the vocabulary, the regime where
    a few hundred training executables actually cover the feature space.
    """
    rng = random.Random(seed * 7919 + 13)
    popularity = [1.0 / (rank + 1) ** 0.8 for rank in range(len(prefixes))]
    master: list[str] = []
    while len(master) < _MASTER_POOL_SIZE:
        pick = rng.choices(range(len(prefixes)), weights=popularity, k=1)[0]
        if prefixes[pick] not in master:
            master.append(prefixes[pick])
    groups = list(OPCODE_GROUPS)
    archetypes = []
    for _ in range(N_ARCHETYPES):
        group_weights = [
            rng.random() ** 2 + 0.05 if g in _CORE_GROUPS else 0.0 for g in groups
        ]
        preferred = rng.sample(master, k=rng.randint(4, 7))
        archetypes.append(
            {
                "group_weights": group_weights,
                "prefixes": preferred,
                "prefix_weights": [rng.random() + 0.2 for _ in preferred],
            }
        )
    return archetypes


def generate_app(index: int, seed: int, vocab: InstructionVocabulary) -> AppModel:
    rng = random.Random(seed * 1_000_003 + index)
    app_id = f"synth{index:04d}"

    groups = list(OPCODE_GROUPS)
    archetypes = _archetypes(seed, list(vocab.api_map))
    mixture = rng.sample(range(N_ARCHETYPES), k=2)
    mix_weights = [rng.random() + 0.3 for _ in mixture]

    group_weights = [0.0] * len(groups)
    prefix_weight_map: dict[str, float] = {}
    for arch_index, mix_w in zip(mixture, mix_weights):
        arch = archetypes[arch_index]
        for i, w in enumerate(arch["group_weights"]):
            group_weights[i] += mix_w * w
        for prefix, w in zip(arch["prefixes"], arch["prefix_weights"]):
            prefix_weight_map[prefix] = prefix_weight_map.get(prefix, 0.0) + mix_w * w
    # idiosyncratic jitter on top of the shared profile
    group_weights = [w * (0.7 + 0.6 * rng.random()) for w in group_weights]
    preferred_prefixes = sorted(prefix_weight_map)
    prefix_weights = [
        prefix_weight_map[p] * (0.7 + 0.6 * rng.random()) for p in preferred_prefixes
    ]
    size_scale = rng.uniform(0.6, 1.8)

    n_classes = rng.randint(2, 5)
    class_names = [f"app{index}/C{j}" for j in range(n_classes)]

    # declare signatures first so call sites can target any of them
    signatures: list[tuple[str, str, str]] = []  # (class, name, descriptor)
    per_class_counts = []
    for j, cname in enumerate(class_names):
        n_methods = rng.randint(3, 7)
        per_class_counts.append(n_methods)
        for k in range(n_methods):
            signatures.append((cname, f"m{j}_{k}", rng.choice(_DESCRIPTORS)))

    def method_body() -> tuple[list[int], list[CallSite]]:
        ops: list[int] = []
        calls: list[CallSite] = []
        length = max(10, int(rng.randint(40, 100) * size_scale))
        for _ in range(length):
            roll = rng.random()
            if roll < 0.45:
                group = _weighted_choice(rng, groups, group_weights)
                ops.append(opcodes.OPCODE[rng.choice(OPCODE_GROUPS[group])])
            elif roll < 0.80:
                ops.append(opcodes.OPCODE[rng.choice(_UNTRACKED)])
            elif roll < 0.95:
                prefix = _weighted_choice(rng, preferred_prefixes, prefix_weights)
                owner = f"{prefix}/{rng.choice(_API_CLASS_SUFFIXES)}"
                calls.append(CallSite(owner, rng.choice(_API_METHOD_NAMES), "()V", "virtual"))
                ops.append(opcodes.INVOKE_VIRTUAL)
            else:
                owner, name, desc = rng.choice(signatures)
                calls.append(CallSite(owner, name, desc, "virtual"))
                ops.append(opcodes.INVOKE_VIRTUAL)
        return ops, calls

    classes = []
    cursor = 0
    for j, cname in enumerate(class_names):
        methods = []
        init_calls = [CallSite("java/lang/Object", "<init>", "()V", "special")]
        methods.append(
            MethodModel(
                name="<init>", descriptor="()V",
                opcodes=[opcodes.OPCODE["aload_0"], opcodes.INVOKE_SPECIAL,
                         opcodes.OPCODE["return"]],
                call_sites=init_calls,
            )
        )
        for _ in range(per_class_counts[j]):
            cname_, mname, desc = signatures[cursor]
            cursor += 1
            ops, calls = method_body()
            strings = rng.randint(1, 3) if rng.random() < 0.35 else 0
            methods.append(
                MethodModel(name=mname, descriptor=desc, opcodes=ops,
                            call_sites=calls, string_constant_count=strings)
            )
        super_name = "java/lang/Object"
        if j > 0 and rng.random() < 0.4:
            super_name = class_names[0]
        classes.append(ClassModel(class_name=cname, super_name=super_name, methods=methods))

    return AppModel(app_id=app_id, classes=classes, provenance="synthetic")


def generate_pairs(
    count: int,
    seed: int,
    config: ObfuscationConfig,
    vocab: InstructionVocabulary,
) -> list[tuple[AppModel, ObfuscationResult]]:
    pairs = []
    for index in range(count):
        app = generate_app(index, seed, vocab)
        per_app = replace(config, seed=config.seed * 1_000_003 + index + 1)
        pairs.append((app, obfuscate(app, per_app)))
    return pairs


def write_corpus(
    pairs: list[tuple[AppModel, ObfuscationResult]],
    out_dir: str | Path,
    corpus_id: str,
) -> Path:
    """Write textual app files plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for original, result in pairs:
        for app in (original, result.app):
            filename = f"{app.app_id}.txt"
            (out_dir / filename).write_text(serialize_textual_app(app), encoding="utf-8")
            entries.append(
                ManifestEntry(app_id=app.app_id, source_path=filename, pair_of=app.pair_of)
            )
    manifest = CorpusManifest(corpus_id=corpus_id, apps=entries)
    manifest_path = out_dir / "manifest.json"
    save_manifest(manifest, manifest_path)
    return manifest_path
