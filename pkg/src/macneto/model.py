"""Parsed-executable model and the portable textual corpus format.

An app is a bag of classes; a class is a bag of methods; a method carries its
raw opcode stream plus the call sites for exactly the invoke opcodes in that
stream, in order. Models are treated as immutable once built: every transform
constructs new objects.
"""

from __future__ import annotations

import json
import zipfile
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import opcodes
from .errors import (
    DuplicateMethod,
    MacnetoError,
    ManifestError,
    UnknownMnemonic,
    annotate,
)

PROVENANCES = ("class_files", "textual", "synthetic")

CALL_KINDS = ("virtual", "static", "special", "interface", "dynamic")

# api:<owner>.<name> tokens carry no descriptor; call sites must not have an
# empty one, so the loader substitutes this placeholder.
API_PLACEHOLDER_DESCRIPTOR = "()V"


class TextualFormatError(MacnetoError):
    """A textual app record violates the line-oriented grammar."""


@dataclass(frozen=True)
class CallSite:
    owner: str
    name: str
    descriptor: str
    kind: str

    def __post_init__(self):
        if self.kind not in CALL_KINDS:
            raise ValueError(f"unknown call kind {self.kind!r}")
        if self.kind != "dynamic" and not (self.owner and self.name and self.descriptor):
            raise ValueError("owner/name/descriptor must be non-empty for static call sites")


@dataclass
class MethodModel:
    name: str
    descriptor: str
    access_flags: int = 0x0001  # ACC_PUBLIC
    opcodes: list[int] = field(default_factory=list)
    call_sites: list[CallSite] = field(default_factory=list)
    string_constant_count: int = 0

    def __post_init__(self):
        n_invokes = sum(1 for op in self.opcodes if op in opcodes.INVOKE_OPCODES)
        if n_invokes != len(self.call_sites):
            raise ValueError(
                f"method {self.name}{self.descriptor}: {n_invokes} invoke opcodes "
                f"but {len(self.call_sites)} call sites"
            )

    @property
    def signature(self) -> str:
        return self.name + self.descriptor

    @property
    def is_public(self) -> bool:
        return bool(self.access_flags & 0x0001)


@dataclass
class ClassModel:
    class_name: str
    super_name: str | None = None
    interfaces: list[str] = field(default_factory=list)
    methods: list[MethodModel] = field(default_factory=list)


@dataclass
class AppModel:
    app_id: str
    classes: list[ClassModel] = field(default_factory=list)
    description: str | None = None
    provenance: str = "textual"
    pair_of: str | None = None

    def __post_init__(self):
        if not self.app_id:
            raise ValueError("app_id must be non-empty")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def methods(self):
        for cls in self.classes:
            for m in cls.methods:
                yield cls, m


_FIELD_TYPE_CHARS = set("BCDFIJSZ")


def _scan_field_type(desc: str, i: int) -> int:
    """Return the index just past one field type starting at desc[i]."""
    n = len(desc)
    while i < n and desc[i] == "[":
        i += 1
    if i >= n:
        raise ValueError("truncated descriptor")
    c = desc[i]
    if c in _FIELD_TYPE_CHARS:
        return i + 1
    if c == "L":
        end = desc.find(";", i + 1)
        if end <= i + 1:
            raise ValueError("unterminated or empty class reference")
        return end + 1
    raise ValueError(f"bad type char {c!r}")


def validate_method_descriptor(desc: str) -> None:
    """Raise ValueError unless desc matches the JVM method-descriptor grammar."""
    if not desc.startswith("("):
        raise ValueError("descriptor must start with '('")
    i = 1
    while i < len(desc) and desc[i] != ")":
        i = _scan_field_type(desc, i)
    if i >= len(desc):
        raise ValueError("missing ')'")
    i += 1
    if desc[i:] == "V":
        return
    end = _scan_field_type(desc, i)
    if end != len(desc):
        raise ValueError("trailing junk after return type")


# ---------------------------------------------------------------------------
# Textual app format
#
#   app <app_id>
#   class <name> [extends <super>]
#   method <name> <descriptor>
#   <token>            one per line: mnemonic | api:<owner>.<name>
#   ...                | call:<owner>.<name><descriptor> | strings <n>
#   <blank line>       ends the method
# ---------------------------------------------------------------------------


def _parse_call_token(token: str, lineno: int) -> CallSite:
    if token.startswith("api:"):
        body, descriptor = token[4:], API_PLACEHOLDER_DESCRIPTOR
    else:
        body = token[5:]
        paren = body.find("(")
        if paren < 0:
            raise TextualFormatError(f"line {lineno}: call token missing descriptor: {token!r}")
        body, descriptor = body[:paren], body[paren:]
        try:
            validate_method_descriptor(descriptor)
        except ValueError as exc:
            raise TextualFormatError(f"line {lineno}: bad descriptor in {token!r}: {exc}") from exc
    owner, dot, name = body.rpartition(".")
    if not dot or not owner or not name:
        raise TextualFormatError(f"line {lineno}: call token needs <owner>.<name>: {token!r}")
    return CallSite(owner=owner, name=name, descriptor=descriptor, kind="virtual")


class _MethodBuilder:
    def __init__(self, name: str, descriptor: str, lineno: int):
        try:
            validate_method_descriptor(descriptor)
        except ValueError as exc:
            raise TextualFormatError(f"line {lineno}: bad method descriptor {descriptor!r}: {exc}") from exc
        self.name = name
        self.descriptor = descriptor
        self.ops: list[int] = []
        self.calls: list[CallSite] = []
        self.strings = 0

    def add_token(self, token: str, lineno: int) -> None:
        if token.startswith(("api:", "call:")):
            self.calls.append(_parse_call_token(token, lineno))
            self.ops.append(opcodes.INVOKE_VIRTUAL)
            return
        if token.startswith("strings "):
            try:
                n = int(token.split()[1])
            except (IndexError, ValueError) as exc:
                raise TextualFormatError(f"line {lineno}: bad strings directive {token!r}") from exc
            if n < 0:
                raise TextualFormatError(f"line {lineno}: negative string count")
            self.strings = n
            return
        op = opcodes.OPCODE.get(token)
        if op is None:
            raise UnknownMnemonic(f"line {lineno}: unknown token {token!r}")
        if op in opcodes.INVOKE_OPCODES:
            if op == opcodes.INVOKE_DYNAMIC:
                # bare invokedynamic: no static target exists, record an empty
                # dynamic call site so stream and call list stay aligned
                self.calls.append(CallSite("", "", "", kind="dynamic"))
            else:
                raise TextualFormatError(
                    f"line {lineno}: use call:/api: tokens for {token} targets"
                )
        self.ops.append(op)

    def build(self) -> MethodModel:
        return MethodModel(
            name=self.name,
            descriptor=self.descriptor,
            opcodes=self.ops,
            call_sites=self.calls,
            string_constant_count=self.strings,
        )


def parse_textual_app(text: str) -> AppModel:
    """Parse one textual app record into an AppModel (provenance=textual)."""
    app_id: str | None = None
    classes: list[ClassModel] = []
    current_class: ClassModel | None = None
    current_method: _MethodBuilder | None = None
    seen_classes: set[str] = set()

    def finish_method():
        nonlocal current_method
        if current_method is None:
            return
        built = current_method.build()
        if any(m.signature == built.signature for m in current_class.methods):
            raise DuplicateMethod(
                f"class {current_class.class_name}: duplicate method {built.signature}"
            )
        current_class.methods.append(built)
        current_method = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line.strip():
            finish_method()
            continue
        if current_method is not None:
            current_method.add_token(line.strip(), lineno)
            continue
        parts = line.split()
        if parts[0] == "app":
            if app_id is not None:
                raise TextualFormatError(f"line {lineno}: duplicate app header")
            if len(parts) != 2:
                raise TextualFormatError(f"line {lineno}: expected 'app <app_id>'")
            app_id = parts[1]
        elif parts[0] == "class":
            if len(parts) == 2:
                name, super_name = parts[1], None
            elif len(parts) == 4 and parts[2] == "extends":
                name, super_name = parts[1], parts[3]
            else:
                raise TextualFormatError(f"line {lineno}: expected 'class <name> [extends <super>]'")
            if name in seen_classes:
                raise TextualFormatError(f"line {lineno}: duplicate class {name}")
            seen_classes.add(name)
            current_class = ClassModel(class_name=name, super_name=super_name)
            classes.append(current_class)
        elif parts[0] == "method":
            if current_class is None:
                raise TextualFormatError(f"line {lineno}: method outside of a class")
            if len(parts) != 3:
                raise TextualFormatError(f"line {lineno}: expected 'method <name> <descriptor>'")
            current_method = _MethodBuilder(parts[1], parts[2], lineno)
        else:
            raise TextualFormatError(f"line {lineno}: unexpected line {line!r}")
    finish_method()

    if app_id is None:
        raise TextualFormatError("missing 'app <app_id>' header")
    return AppModel(app_id=app_id, classes=classes, provenance="textual")


def load_textual_app(path: str | Path) -> AppModel:
    return parse_textual_app(Path(path).read_text(encoding="utf-8"))


def serialize_textual_app(app: AppModel) -> str:
    """Render an app in the textual format; inverse of parse_textual_app."""
    out: list[str] = [f"app {app.app_id}"]
    for cls in app.classes:
        if cls.super_name:
            out.append(f"class {cls.class_name} extends {cls.super_name}")
        else:
            out.append(f"class {cls.class_name}")
        for m in cls.methods:
            out.append(f"method {m.name} {m.descriptor}")
            if m.string_constant_count:
                out.append(f"strings {m.string_constant_count}")
            calls = iter(m.call_sites)
            for op in m.opcodes:
                if op in opcodes.INVOKE_OPCODES:
                    site = next(calls)
                    if site.kind == "dynamic" and not site.owner:
                        out.append("invokedynamic")
                    else:
                        out.append(f"call:{site.owner}.{site.name}{site.descriptor}")
                else:
                    out.append(opcodes.MNEMONIC[op])
            out.append("")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Corpus manifests
# ---------------------------------------------------------------------------

MANIFEST_FORMAT_VERSION = 1


@dataclass
class ManifestEntry:
    app_id: str
    source_path: str
    description_path: str | None = None
    pair_of: str | None = None


@dataclass
class CorpusManifest:
    corpus_id: str
    apps: list[ManifestEntry] = field(default_factory=list)
    format_version: int = MANIFEST_FORMAT_VERSION


def load_manifest(path: str | Path) -> CorpusManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ManifestError(f"{path}: manifest must be a JSON object")
    for key in ("corpus_id", "format_version", "apps"):
        if key not in raw:
            raise ManifestError(f"{path}: missing key {key!r}")
    if raw["format_version"] != MANIFEST_FORMAT_VERSION:
        raise ManifestError(
            f"{path}: unsupported format_version {raw['format_version']!r}"
        )
    entries: list[ManifestEntry] = []
    ids: set[str] = set()
    for i, item in enumerate(raw["apps"]):
        if not isinstance(item, dict) or "app_id" not in item or "source_path" not in item:
            raise ManifestError(f"{path}: apps[{i}] needs app_id and source_path")
        if item["app_id"] in ids:
            raise ManifestError(f"{path}: duplicate app_id {item['app_id']!r}")
        ids.add(item["app_id"])
        entries.append(
            ManifestEntry(
                app_id=item["app_id"],
                source_path=item["source_path"],
                description_path=item.get("description_path"),
                pair_of=item.get("pair_of"),
            )
        )
    for entry in entries:
        if entry.pair_of is not None and entry.pair_of not in ids:
            raise ManifestError(
                f"{path}: app {entry.app_id!r} pairs missing app {entry.pair_of!r}"
            )
    return CorpusManifest(corpus_id=raw["corpus_id"], apps=entries)


def save_manifest(manifest: CorpusManifest, path: str | Path) -> None:
    doc = {
        "corpus_id": manifest.corpus_id,
        "format_version": manifest.format_version,
        "apps": [
            {
                "app_id": e.app_id,
                "source_path": e.source_path,
                **({"description_path": e.description_path} if e.description_path else {}),
                **({"pair_of": e.pair_of} if e.pair_of else {}),
            }
            for e in manifest.apps
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_app_source(path: Path, app_id: str) -> AppModel:
    # imported here to avoid a module cycle (classfile imports model types)
    from .classfile import parse_class_file

    if path.is_dir():
        classes = []
        for member in sorted(path.rglob("*.class")):
            classes.append(parse_class_file(member.read_bytes()))
        return AppModel(app_id=app_id, classes=classes, provenance="class_files")
    suffix = path.suffix.lower()
    if suffix in (".jar", ".zip"):
        classes = []
        with zipfile.ZipFile(path) as zf:
            for member in sorted(zf.namelist()):
                if member.endswith(".class"):
                    classes.append(parse_class_file(zf.read(member)))
        return AppModel(app_id=app_id, classes=classes, provenance="class_files")
    if suffix == ".class":
        return AppModel(
            app_id=app_id,
            classes=[parse_class_file(path.read_bytes())],
            provenance="class_files",
        )
    app = load_textual_app(path)
    if app.app_id != app_id:
        raise ManifestError(
            f"{path}: textual record names app {app.app_id!r}, manifest says {app_id!r}"
        )
    return app


def load_app(path: str | Path, app_id: str | None = None) -> AppModel:
    """Load a single app from a textual record, .class file, directory, or jar."""
    path = Path(path)
    if app_id is None and path.suffix.lower() not in (".class", ".jar", ".zip") and not path.is_dir():
        return load_textual_app(path)
    return _load_app_source(path, app_id or path.stem)


def load_corpus(manifest_path: str | Path) -> list[AppModel]:
    """Load every app named by a manifest, in manifest order."""
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    base = manifest_path.parent
    apps: list[AppModel] = []
    for entry in manifest.apps:
        source = Path(entry.source_path)
        if not source.is_absolute():
            source = base / source
        try:
            app = _load_app_source(source, entry.app_id)
        except MacnetoError as exc:
            raise annotate(exc, f"app {entry.app_id!r}") from exc
        except OSError as exc:
            raise ManifestError(f"app {entry.app_id!r}: {exc}") from exc
        description = None
        if entry.description_path:
            desc_path = Path(entry.description_path)
            if not desc_path.is_absolute():
                desc_path = base / desc_path
            try:
                description = desc_path.read_text(encoding="utf-8")
            except OSError as exc:
                raise ManifestError(f"app {entry.app_id!r}: {exc}") from exc
        apps.append(replace(app, description=description, pair_of=entry.pair_of))
    return apps
