"""The abstract instruction vocabulary.

Very similar opcodes are grouped into one slot each (all adds are one word,
all conditional jumps are one word, ...), and calls into tracked API
namespaces get one slot per namespace prefix. Everything else - loads,
stores, stack shuffles, calls between app methods - is deliberately
untracked and contributes nothing to a distribution.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import opcodes as opc
from .model import CallSite

# slot name -> member opcode mnemonics, in fixed slot order
OPCODE_GROUPS: dict[str, tuple[str, ...]] = {
    "xaload": ("iaload", "laload", "faload", "daload", "aaload", "baload", "caload", "saload"),
    "xastore": ("iastore", "lastore", "fastore", "dastore", "aastore", "bastore", "castore", "sastore"),
    "arraylength": ("arraylength",),
    "xadd": ("iadd", "ladd", "fadd", "dadd"),
    "xsub": ("isub", "lsub", "fsub", "dsub"),
    "xmul": ("imul", "lmul", "fmul", "dmul"),
    "xdiv": ("idiv", "ldiv", "fdiv", "ddiv"),
    "xrem": ("irem", "lrem", "frem", "drem"),
    "xneg": ("ineg", "lneg", "fneg", "dneg"),
    "xshift": ("ishl", "lshl", "ishr", "lshr", "iushr", "lushr"),
    "xand": ("iand", "land"),
    "xor": ("ior", "lor"),
    "x_xor": ("ixor", "lxor"),
    "iinc": ("iinc",),
    "xcomp": ("lcmp", "fcmpl", "fcmpg", "dcmpl", "dcmpg"),
    "ifXXX": (
        "ifeq", "ifne", "iflt", "ifge", "ifgt", "ifle",
        "if_icmpeq", "if_icmpne", "if_icmplt", "if_icmpge", "if_icmpgt", "if_icmple",
        "if_acmpeq", "if_acmpne", "ifnull", "ifnonnull",
    ),
    "xswitch": ("tableswitch", "lookupswitch"),
}


@dataclass(frozen=True)
class InstructionVocabulary:
    abstract_slots: tuple[str, ...]          # all slot names, opcode groups first
    api_map: dict[str, int]                  # owner prefix -> slot index
    opcode_to_slot: dict[int, int]           # raw opcode value -> slot index
    fingerprint: str

    @property
    def total_slots(self) -> int:
        return len(self.abstract_slots)

    @property
    def vocabulary_id(self) -> str:
        return self.fingerprint

    def slot_of_owner(self, owner: str) -> int | None:
        """Longest-prefix API lookup for a call-site owner, None if untracked."""
        probe = owner
        while probe:
            slot = self.api_map.get(probe)
            if slot is not None:
                return slot
            probe, _, _ = probe.rpartition("/")
        return None


def abstract_opcode(op: int | CallSite, vocab: InstructionVocabulary) -> int | None:
    """Map a raw opcode or call site to its vocabulary slot (None = untracked)."""
    if isinstance(op, CallSite):
        return vocab.slot_of_owner(op.owner) if op.owner else None
    return vocab.opcode_to_slot.get(op)


def build_vocabulary(api_prefixes: list[tuple[str, str]]) -> InstructionVocabulary:
    """Assemble a vocabulary from (prefix, slot_name) API entries."""
    slots: list[str] = list(OPCODE_GROUPS)
    opcode_to_slot: dict[int, int] = {}
    for index, mnemonics in enumerate(OPCODE_GROUPS.values()):
        for m in mnemonics:
            opcode_to_slot[opc.OPCODE[m]] = index

    api_map: dict[str, int] = {}
    slot_index: dict[str, int] = {}
    for prefix, slot_name in api_prefixes:
        if prefix in api_map:
            raise ValueError(f"duplicate API prefix {prefix!r}")
        if slot_name not in slot_index:
            if slot_name in OPCODE_GROUPS:
                raise ValueError(f"API slot name {slot_name!r} collides with an opcode group")
            slot_index[slot_name] = len(slots)
            slots.append(slot_name)
        api_map[prefix] = slot_index[slot_name]

    digest = hashlib.sha256()
    for name in slots:
        digest.update(name.encode())
        digest.update(b"\0")
    for prefix in sorted(api_map):
        digest.update(f"{prefix}={api_map[prefix]}".encode())
        digest.update(b"\0")
    return InstructionVocabulary(
        abstract_slots=tuple(slots),
        api_map=api_map,
        opcode_to_slot=opcode_to_slot,
        fingerprint=digest.hexdigest(),
    )


def parse_vocabulary_file(text: str) -> InstructionVocabulary:
    """Parse the `<prefix> <slot_name>` file format (# starts a comment)."""
    entries: list[tuple[str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected '<prefix> <slot_name>'")
        entries.append((parts[0], parts[1]))
    return build_vocabulary(entries)


def load_vocabulary(path: str | Path | None = None) -> InstructionVocabulary:
    """Load a vocabulary file; with no path, the shipped 252-slot default."""
    if path is None:
        text = resources.files("macneto.data").joinpath("api_vocabulary.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_vocabulary_file(text)
