"""Synthetic obfuscator producing labeled (original, obfuscated) pairs.

Emulates the three transformation families an obfuscator applies while
preserving semantics: identifier renaming, dead-code (junk) insertion from a
finite segment vocabulary, and string-decryption helper injection. Every
transform is deterministic given (app, config, seed), and each one records
what it did so the instruction-distribution delta can be replayed exactly.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import opcodes
from .errors import MacnetoError
from .features import method_id
from .model import (
    AppModel,
    CallSite,
    ClassModel,
    MethodModel,
    parse_textual_app,
)
from .vocabulary import InstructionVocabulary

OBFUSCATED_ID_SUFFIX = "__ob"

# fixed xor-loop pattern for the injected string-decryption helper
DECRYPT_NAME = "dec$"
DECRYPT_DESCRIPTOR = "([C)[C"
DECRYPT_TOKENS = (
    "aload_1", "arraylength", "istore_2",
    "iconst_0", "istore_3",
    "iload_3", "iload_2", "if_icmpge",
    "aload_1", "iload_3",
    "aload_1", "iload_3", "caload",
    "bipush", "ixor", "i2c", "castore",
    "iinc", "goto",
    "aload_1", "areturn",
)


@dataclass(frozen=True)
class JunkSegment:
    name: str
    opcodes: tuple[str, ...]  # textual-format tokens: mnemonics or api:/call:

    def __post_init__(self):
        if not self.opcodes:
            raise ValueError(f"junk segment {self.name!r} is empty")


@dataclass
class ObfuscationConfig:
    rename: bool = True
    junk_intensity: float = 0.0
    junk_vocabulary: list[JunkSegment] = field(default_factory=list)
    inject_string_decrypt: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.junk_intensity <= 1.0:
            raise ValueError("junk_intensity must be in [0, 1]")
        if self.junk_intensity > 0 and not self.junk_vocabulary:
            raise ValueError("junk_vocabulary must be non-empty when junk_intensity > 0")


def _tokens_to_method(name: str, descriptor: str, tokens: tuple[str, ...]) -> MethodModel:
    """Materialize a token list through the textual-format grammar."""
    body = "\n".join(tokens)
    text = f"app junk\nclass junk$holder\nmethod {name} {descriptor}\n{body}\n"
    app = parse_textual_app(text)
    return app.classes[0].methods[0]


def segment_method(segment: JunkSegment) -> MethodModel:
    return _tokens_to_method("junk$segment", "()V", segment.opcodes)


def decrypt_method(name: str = DECRYPT_NAME) -> MethodModel:
    return _tokens_to_method(name, DECRYPT_DESCRIPTOR, DECRYPT_TOKENS)


def load_junk_vocabulary(path: str | Path | None = None) -> list[JunkSegment]:
    """Read junk segments from a file of textual-format method blocks."""
    if path is None:
        text = resources.files("macneto.data").joinpath("junk_vocabulary.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    segments: list[JunkSegment] = []
    name: str | None = None
    tokens: list[str] = []

    def flush():
        nonlocal name, tokens
        if name is not None:
            segment = JunkSegment(name=name, opcodes=tuple(tokens))
            segment_method(segment)  # validates every token now, not at use
            segments.append(segment)
        name, tokens = None, []

    for line in text.splitlines():
        line = line.strip()
        if not line:
            flush()
        elif line.startswith("method "):
            flush()
            name = line.split()[1]
        elif name is not None:
            tokens.append(line)
        else:
            raise MacnetoError(f"junk vocabulary: token {line!r} outside a method block")
    flush()
    if not segments:
        raise MacnetoError("junk vocabulary file contains no segments")
    return segments


def default_config(seed: int = 0, junk_intensity: float = 0.5,
                   inject_string_decrypt: bool = True) -> ObfuscationConfig:
    return ObfuscationConfig(
        rename=True,
        junk_intensity=junk_intensity,
        junk_vocabulary=load_junk_vocabulary(),
        inject_string_decrypt=inject_string_decrypt,
        seed=seed,
    )


def config_from_json(doc: dict) -> ObfuscationConfig:
    vocab_path = doc.get("junk_vocabulary_path")
    intensity = float(doc.get("junk_intensity", 0.0))
    vocabulary = load_junk_vocabulary(vocab_path) if (vocab_path or intensity > 0) else []
    return ObfuscationConfig(
        rename=bool(doc.get("rename", True)),
        junk_intensity=intensity,
        junk_vocabulary=vocabulary,
        inject_string_decrypt=bool(doc.get("inject_string_decrypt", False)),
        seed=int(doc.get("seed", 0)),
    )


def config_fingerprint(config: ObfuscationConfig) -> str:
    doc = {
        "rename": config.rename,
        "junk_intensity": config.junk_intensity,
        "segments": [[s.name, list(s.opcodes)] for s in config.junk_vocabulary],
        "inject_string_decrypt": config.inject_string_decrypt,
        "seed": config.seed,
    }
    return json.dumps(doc, sort_keys=True)


# ---------------------------------------------------------------------------
# identifier renaming
# ---------------------------------------------------------------------------


@dataclass
class RenameResult:
    app: AppModel
    class_map: dict[str, str]
    method_map: dict[tuple[str, str], str]  # (old name, old descriptor) -> new name


def _short_label(i: int) -> str:
    label = ""
    i += 1
    while i:
        i, rem = divmod(i - 1, 26)
        label = chr(ord("a") + rem) + label
    return label


_CLASS_REF = re.compile(r"L([^;]+);")


def _rewrite_descriptor(desc: str, class_map: dict[str, str]) -> str:
    return _CLASS_REF.sub(lambda m: f"L{class_map.get(m.group(1), m.group(1))};", desc)


def _rewrite_owner(owner: str, class_map: dict[str, str]) -> str:
    if owner.startswith("["):
        return _rewrite_descriptor(owner, class_map)
    return class_map.get(owner, owner)


def rename_identifiers(app: AppModel, seed: int) -> RenameResult:
    """Bijectively rename app-defined classes and methods; bytecode untouched.

    External (API) owners and constructors keep their names; descriptors are
    rewritten wherever a renamed class appears.
    """
    rng = random.Random(seed)
    class_names = [cls.class_name for cls in app.classes]
    labels = [f"ob/{_short_label(i)}" for i in range(len(class_names))]
    rng.shuffle(labels)
    class_map = dict(zip(class_names, labels))

    signatures = sorted(
        {
            (m.name, m.descriptor)
            for _, m in app.methods()
            if m.name not in ("<init>", "<clinit>")
        }
    )
    method_labels = [f"m{_short_label(i)}" for i in range(len(signatures))]
    rng.shuffle(method_labels)
    method_map = dict(zip(signatures, method_labels))

    owned = set(class_names)

    def rewrite_site(site: CallSite) -> CallSite:
        if site.kind == "dynamic" and not site.owner:
            return site
        name = site.name
        base_owner = site.owner.lstrip("[")
        if base_owner.startswith("L") and base_owner.endswith(";"):
            base_owner = base_owner[1:-1]
        if base_owner in owned and (site.name, site.descriptor) in method_map:
            name = method_map[(site.name, site.descriptor)]
        return CallSite(
            owner=_rewrite_owner(site.owner, class_map),
            name=name,
            descriptor=_rewrite_descriptor(site.descriptor, class_map),
            kind=site.kind,
        )

    new_classes = []
    for cls in app.classes:
        new_methods = []
        for m in cls.methods:
            new_methods.append(
                MethodModel(
                    name=method_map.get((m.name, m.descriptor), m.name),
                    descriptor=_rewrite_descriptor(m.descriptor, class_map),
                    access_flags=m.access_flags,
                    opcodes=list(m.opcodes),
                    call_sites=[rewrite_site(s) for s in m.call_sites],
                    string_constant_count=m.string_constant_count,
                )
            )
        new_classes.append(
            ClassModel(
                class_name=class_map[cls.class_name],
                super_name=class_map.get(cls.super_name, cls.super_name),
                interfaces=[class_map.get(i, i) for i in cls.interfaces],
                methods=new_methods,
            )
        )
    renamed = AppModel(
        app_id=app.app_id,
        classes=new_classes,
        description=app.description,
        provenance=app.provenance,
        pair_of=app.app_id,
    )
    return RenameResult(app=renamed, class_map=class_map, method_map=method_map)


# ---------------------------------------------------------------------------
# junk insertion and decrypt-helper injection
# ---------------------------------------------------------------------------


@dataclass
class JunkInsertion:
    class_name: str
    method_signature: str
    segment_name: str


@dataclass
class JunkResult:
    app: AppModel
    insertions: list[JunkInsertion]


def insert_junk(app: AppModel, config: ObfuscationConfig, seed: int | None = None) -> JunkResult:
    """Append one seeded junk segment to each method with p = junk_intensity."""
    if config.junk_intensity > 0 and not config.junk_vocabulary:
        raise ValueError("junk_vocabulary must be non-empty when junk_intensity > 0")
    rng = random.Random(config.seed if seed is None else seed)
    materialized = {s.name: segment_method(s) for s in config.junk_vocabulary}
    insertions: list[JunkInsertion] = []
    new_classes = []
    for cls in app.classes:
        new_methods = []
        for m in cls.methods:
            if config.junk_intensity > 0 and rng.random() < config.junk_intensity:
                segment = config.junk_vocabulary[rng.randrange(len(config.junk_vocabulary))]
                body = materialized[segment.name]
                m = MethodModel(
                    name=m.name,
                    descriptor=m.descriptor,
                    access_flags=m.access_flags,
                    opcodes=list(m.opcodes) + list(body.opcodes),
                    call_sites=list(m.call_sites) + list(body.call_sites),
                    string_constant_count=m.string_constant_count,
                )
                insertions.append(JunkInsertion(cls.class_name, m.signature, segment.name))
            new_methods.append(m)
        new_classes.append(replace(cls, methods=new_methods))
    out = replace(app, classes=new_classes, pair_of=app.pair_of or app.app_id)
    return JunkResult(app=out, insertions=insertions)


@dataclass
class DecryptInjection:
    class_name: str
    helper_name: str
    call_count: int


@dataclass
class DecryptResult:
    app: AppModel
    injections: list[DecryptInjection]


def inject_string_decrypt(app: AppModel, seed: int = 0) -> DecryptResult:
    """Add a decrypt helper to every class holding string constants and call
    it once per constant from the holding method."""
    del seed  # pattern and placement are fixed; parameter kept for symmetry
    injections: list[DecryptInjection] = []
    new_classes = []
    for cls in app.classes:
        total_strings = sum(m.string_constant_count for m in cls.methods)
        if total_strings == 0:
            new_classes.append(cls)
            continue
        helper_name = DECRYPT_NAME
        existing = {m.signature for m in cls.methods}
        counter = 0
        while helper_name + DECRYPT_DESCRIPTOR in existing:
            counter += 1
            helper_name = f"{DECRYPT_NAME}{counter}"
        helper = decrypt_method(helper_name)
        new_methods = []
        for m in cls.methods:
            k = m.string_constant_count
            if k:
                site = CallSite(cls.class_name, helper_name, DECRYPT_DESCRIPTOR, kind="virtual")
                m = MethodModel(
                    name=m.name,
                    descriptor=m.descriptor,
                    access_flags=m.access_flags,
                    opcodes=list(m.opcodes) + [opcodes.INVOKE_VIRTUAL] * k,
                    call_sites=list(m.call_sites) + [site] * k,
                    string_constant_count=m.string_constant_count,
                )
            new_methods.append(m)
        new_methods.append(helper)
        new_classes.append(replace(cls, methods=new_methods))
        injections.append(DecryptInjection(cls.class_name, helper_name, total_strings))
    out = replace(app, classes=new_classes, pair_of=app.pair_of or app.app_id)
    return DecryptResult(app=out, injections=injections)


# ---------------------------------------------------------------------------
# full pipeline + delta replay
# ---------------------------------------------------------------------------


@dataclass
class TransformLog:
    rename_map: RenameResult | None
    junk_insertions: list[JunkInsertion]
    decrypt_injections: list[DecryptInjection]
    segment_tokens: dict[str, tuple[str, ...]]


@dataclass
class ObfuscationResult:
    app: AppModel
    log: TransformLog


def obfuscate(app: AppModel, config: ObfuscationConfig) -> ObfuscationResult:
    """rename -> insert_junk -> inject_string_decrypt, as enabled by config."""
    stage_seeds = random.Random(config.seed)
    rename_seed = stage_seeds.getrandbits(63)
    junk_seed = stage_seeds.getrandbits(63)
    decrypt_seed = stage_seeds.getrandbits(63)

    current = app
    rename_result = None
    if config.rename:
        rename_result = rename_identifiers(current, rename_seed)
        current = rename_result.app
    junk_config = config
    if len(config.junk_vocabulary) > 1:
        # an obfuscator run leans on a few of its patterns, not all of them:
        # narrow each app to a seeded 1-3 segment repertoire
        chooser = random.Random(junk_seed ^ 0x5DEECE66D)
        repertoire = chooser.sample(
            config.junk_vocabulary, k=chooser.randint(1, min(3, len(config.junk_vocabulary)))
        )
        junk_config = replace(config, junk_vocabulary=repertoire)
    junk_result = insert_junk(current, junk_config, seed=junk_seed)
    current = junk_result.app
    decrypt_result = DecryptResult(app=current, injections=[])
    if config.inject_string_decrypt:
        decrypt_result = inject_string_decrypt(current, seed=decrypt_seed)
        current = decrypt_result.app

    out = replace(
        current,
        app_id=app.app_id + OBFUSCATED_ID_SUFFIX,
        pair_of=app.app_id,
        provenance="synthetic",
    )
    log = TransformLog(
        rename_map=rename_result,
        junk_insertions=junk_result.insertions,
        decrypt_injections=decrypt_result.injections,
        segment_tokens={s.name: s.opcodes for s in config.junk_vocabulary},
    )
    return ObfuscationResult(app=out, log=log)


def replay_id_delta(log: TransformLog, vocab: InstructionVocabulary) -> np.ndarray:
    """The app-distribution delta implied by the log (all-methods entry policy).

    Renaming contributes nothing; each junk insertion adds its segment's
    distribution; each decrypt injection adds the helper pattern once per
    class (the injected internal calls hit no vocabulary slot).
    """
    delta = np.zeros(vocab.total_slots, dtype=np.int64)
    for ins in log.junk_insertions:
        segment = JunkSegment(ins.segment_name, log.segment_tokens[ins.segment_name])
        delta += method_id(segment_method(segment), vocab).counts
    for _ in log.decrypt_injections:
        delta += method_id(decrypt_method(), vocab).counts
    return delta
