"""A .class file parser covering what feature extraction needs.

Parses the constant pool, class/super/interface names, and every method's
Code attribute into a raw opcode stream plus resolved call sites. All other
attributes (StackMapTable, annotations, ...) are skipped. Any structural
inconsistency raises MalformedClassFile with the byte offset; the parser
never throws anything else, no matter the input bytes.
"""

from __future__ import annotations

from . import opcodes
from .errors import MalformedClassFile
from .model import CallSite, ClassModel, MethodModel, validate_method_descriptor

MAGIC = 0xCAFEBABE

_CP_UTF8 = 1
_CP_INTEGER = 3
_CP_FLOAT = 4
_CP_LONG = 5
_CP_DOUBLE = 6
_CP_CLASS = 7
_CP_STRING = 8
_CP_FIELDREF = 9
_CP_METHODREF = 10
_CP_INTERFACE_METHODREF = 11
_CP_NAME_AND_TYPE = 12
_CP_METHOD_HANDLE = 15
_CP_METHOD_TYPE = 16
_CP_DYNAMIC = 17
_CP_INVOKE_DYNAMIC = 18
_CP_MODULE = 19
_CP_PACKAGE = 20

# tag -> fixed payload size; Utf8 is variable and handled separately
_CP_SIZES = {
    _CP_INTEGER: 4,
    _CP_FLOAT: 4,
    _CP_LONG: 8,
    _CP_DOUBLE: 8,
    _CP_CLASS: 2,
    _CP_STRING: 2,
    _CP_FIELDREF: 4,
    _CP_METHODREF: 4,
    _CP_INTERFACE_METHODREF: 4,
    _CP_NAME_AND_TYPE: 4,
    _CP_METHOD_HANDLE: 3,
    _CP_METHOD_TYPE: 2,
    _CP_DYNAMIC: 4,
    _CP_INVOKE_DYNAMIC: 4,
    _CP_MODULE: 2,
    _CP_PACKAGE: 2,
}

# opcodes legal after `wide`
_WIDE_SIMPLE = {
    opcodes.OPCODE[m]
    for m in ("iload", "lload", "fload", "dload", "aload",
              "istore", "lstore", "fstore", "dstore", "astore", "ret")
}
_WIDE_IINC = opcodes.OPCODE["iinc"]


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def fail(self, message: str, offset: int | None = None):
        raise MalformedClassFile(message, self.pos if offset is None else offset)

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            self.fail(f"truncated: needed {n} bytes")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u1(self) -> int:
        return self.take(1)[0]

    def u2(self) -> int:
        return int.from_bytes(self.take(2), "big")

    def u4(self) -> int:
        return int.from_bytes(self.take(4), "big")


class _ConstantPool:
    """Resolved constant-pool entries: index -> (tag, payload)."""

    def __init__(self, entries: dict[int, tuple[int, object]], reader: _Reader):
        self.entries = entries
        self.reader = reader

    def _get(self, index: int, tag: int, offset: int):
        entry = self.entries.get(index)
        if entry is None or entry[0] != tag:
            self.reader.fail(f"constant pool index {index} is not tag {tag}", offset)
        return entry[1]

    def utf8(self, index: int, offset: int) -> str:
        return self._get(index, _CP_UTF8, offset)

    def class_name(self, index: int, offset: int) -> str:
        name_index = self._get(index, _CP_CLASS, offset)
        return self.utf8(name_index, offset)

    def name_and_type(self, index: int, offset: int) -> tuple[str, str]:
        name_index, desc_index = self._get(index, _CP_NAME_AND_TYPE, offset)
        return self.utf8(name_index, offset), self.utf8(desc_index, offset)

    def method_ref(self, index: int, offset: int) -> tuple[str, str, str]:
        entry = self.entries.get(index)
        if entry is None or entry[0] not in (_CP_METHODREF, _CP_INTERFACE_METHODREF):
            self.reader.fail(f"constant pool index {index} is not a method reference", offset)
        class_index, nat_index = entry[1]
        owner = self.class_name(class_index, offset)
        name, desc = self.name_and_type(nat_index, offset)
        return owner, name, desc

    def invoke_dynamic(self, index: int, offset: int) -> tuple[str, str]:
        _, nat_index = self._get(index, _CP_INVOKE_DYNAMIC, offset)
        return self.name_and_type(nat_index, offset)


def _parse_constant_pool(r: _Reader) -> _ConstantPool:
    count = r.u2()
    entries: dict[int, tuple[int, object]] = {}
    index = 1
    while index < count:
        tag_offset = r.pos
        tag = r.u1()
        if tag == _CP_UTF8:
            length = r.u2()
            raw = r.take(length)
            try:
                text = raw.decode("utf-8")
            except UnicodeDecodeError:
                # the JVM's modified UTF-8 encodes NUL and supplementary chars
                # differently; tolerate by latin-1 round-trip rather than reject
                text = raw.decode("latin-1")
            entries[index] = (tag, text)
        elif tag in _CP_SIZES:
            payload = r.take(_CP_SIZES[tag])
            if tag in (_CP_CLASS, _CP_STRING, _CP_METHOD_TYPE, _CP_MODULE, _CP_PACKAGE):
                entries[index] = (tag, int.from_bytes(payload, "big"))
            elif tag == _CP_METHOD_HANDLE:
                entries[index] = (tag, (payload[0], int.from_bytes(payload[1:], "big")))
            elif tag in (_CP_LONG, _CP_DOUBLE, _CP_INTEGER, _CP_FLOAT):
                entries[index] = (tag, payload)
            else:
                entries[index] = (
                    tag,
                    (int.from_bytes(payload[:2], "big"), int.from_bytes(payload[2:], "big")),
                )
        else:
            r.fail(f"unknown constant pool tag {tag}", tag_offset)
        index += 2 if tag in (_CP_LONG, _CP_DOUBLE) else 1
    if index != count:
        r.fail("constant pool overran its declared count")
    return _ConstantPool(entries, r)


def _decode_code(code: bytes, base_offset: int, pool: _ConstantPool,
                 r: _Reader) -> tuple[list[int], list[CallSite]]:
    ops: list[int] = []
    calls: list[CallSite] = []
    pc = 0
    n = len(code)

    def need(k: int, at: int):
        if pc + k > n:
            r.fail("code runs past the end of the Code attribute", base_offset + at)

    while pc < n:
        at = pc
        op = code[pc]
        pc += 1
        if not opcodes.is_defined(op):
            r.fail(f"invalid opcode 0x{op:02x}", base_offset + at)
        ops.append(op)

        if op == opcodes.OPCODE["wide"]:
            need(1, at)
            widened = code[pc]
            pc += 1
            if widened == _WIDE_IINC:
                need(4, at)
                pc += 4
            elif widened in _WIDE_SIMPLE:
                need(2, at)
                pc += 2
            else:
                r.fail(f"wide prefix on illegal opcode 0x{widened:02x}", base_offset + at)
            ops.append(widened)
            continue

        if op == opcodes.OPCODE["tableswitch"]:
            pc += (-pc) % 4
            need(12, at)
            low = int.from_bytes(code[pc + 4:pc + 8], "big", signed=True)
            high = int.from_bytes(code[pc + 8:pc + 12], "big", signed=True)
            pc += 12
            if low > high:
                r.fail("tableswitch low > high", base_offset + at)
            need(4 * (high - low + 1), at)
            pc += 4 * (high - low + 1)
            continue

        if op == opcodes.OPCODE["lookupswitch"]:
            pc += (-pc) % 4
            need(8, at)
            npairs = int.from_bytes(code[pc + 4:pc + 8], "big", signed=True)
            pc += 8
            if npairs < 0:
                r.fail("lookupswitch negative npairs", base_offset + at)
            need(8 * npairs, at)
            pc += 8 * npairs
            continue

        if op in opcodes.INVOKE_OPCODES:
            need(2, at)
            index = int.from_bytes(code[pc:pc + 2], "big")
            pc += 2
            if op == opcodes.INVOKE_INTERFACE:
                need(2, at)
                count, zero = code[pc], code[pc + 1]
                pc += 2
                if count == 0 or zero != 0:
                    r.fail("invokeinterface count/zero bytes are wrong", base_offset + at)
            elif op == opcodes.INVOKE_DYNAMIC:
                need(2, at)
                if code[pc] != 0 or code[pc + 1] != 0:
                    r.fail("invokedynamic trailing bytes must be zero", base_offset + at)
                pc += 2
            if op == opcodes.INVOKE_DYNAMIC:
                name, desc = pool.invoke_dynamic(index, base_offset + at)
                calls.append(CallSite("", name, desc, kind="dynamic"))
            else:
                owner, name, desc = pool.method_ref(index, base_offset + at)
                calls.append(CallSite(owner, name, desc, kind=opcodes.KIND_FOR_OPCODE[op]))
            continue

        width = opcodes.OPERANDS[op]
        need(width, at)
        pc += width

    return ops, calls


def _skip_attribute(r: _Reader, pool: _ConstantPool) -> tuple[str, int, int]:
    """Read one attribute header; return (name, payload offset, payload length)."""
    name_offset = r.pos
    name = pool.utf8(r.u2(), name_offset)
    length = r.u4()
    payload_offset = r.pos
    r.take(length)
    return name, payload_offset, length


def _parse_method(r: _Reader, pool: _ConstantPool) -> MethodModel:
    start = r.pos
    access_flags = r.u2()
    name = pool.utf8(r.u2(), start)
    desc_offset = r.pos
    descriptor = pool.utf8(r.u2(), desc_offset)
    try:
        validate_method_descriptor(descriptor)
    except ValueError as exc:
        r.fail(f"bad method descriptor {descriptor!r}: {exc}", desc_offset)
    ops: list[int] = []
    calls: list[CallSite] = []
    saw_code = False
    attr_count = r.u2()
    for _ in range(attr_count):
        attr_name, payload_offset, length = _skip_attribute(r, pool)
        if attr_name != "Code":
            continue
        if saw_code:
            r.fail("method has two Code attributes", payload_offset)
        saw_code = True
        sub = _Reader(r.data[:payload_offset + length])
        sub.pos = payload_offset
        sub.u2()  # max_stack
        sub.u2()  # max_locals
        code_length = sub.u4()
        code_offset = sub.pos
        code = sub.take(code_length)
        ops, calls = _decode_code(code, code_offset, pool, sub)
        exc_count = sub.u2()
        sub.take(8 * exc_count)
        nested = sub.u2()
        for _ in range(nested):
            _skip_attribute(sub, pool)
        if sub.pos != payload_offset + length:
            sub.fail("Code attribute length does not match its contents", sub.pos)
    return MethodModel(
        name=name,
        descriptor=descriptor,
        access_flags=access_flags,
        opcodes=ops,
        call_sites=calls,
    )


def parse_class_file(data: bytes) -> ClassModel:
    """Parse a complete .class image; raises MalformedClassFile on any defect."""
    r = _Reader(data)
    if r.u4() != MAGIC:
        r.fail("bad magic, not a class file", 0)
    r.u2()  # minor
    r.u2()  # major
    pool = _parse_constant_pool(r)

    r.u2()  # class access flags
    this_offset = r.pos
    class_name = pool.class_name(r.u2(), this_offset)
    super_offset = r.pos
    super_index = r.u2()
    super_name = None if super_index == 0 else pool.class_name(super_index, super_offset)
    interfaces = []
    for _ in range(r.u2()):
        iface_offset = r.pos
        interfaces.append(pool.class_name(r.u2(), iface_offset))

    for _ in range(r.u2()):  # fields: header + attributes, all skipped
        r.take(6)
        for _ in range(r.u2()):
            _skip_attribute(r, pool)

    methods: list[MethodModel] = []
    seen: set[str] = set()
    for _ in range(r.u2()):
        method_offset = r.pos
        method = _parse_method(r, pool)
        if method.signature in seen:
            r.fail(f"duplicate method {method.signature}", method_offset)
        seen.add(method.signature)
        methods.append(method)

    for _ in range(r.u2()):
        _skip_attribute(r, pool)
    if r.pos != len(data):
        r.fail("trailing bytes after class structure")

    return ClassModel(
        class_name=class_name,
        super_name=super_name,
        interfaces=interfaces,
        methods=methods,
    )
