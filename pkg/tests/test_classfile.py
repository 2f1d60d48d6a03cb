import random

import pytest

from classbuilder import ACC_ABSTRACT, ClassFileBuilder
from macneto.classfile import parse_class_file
from macneto.errors import MalformedClassFile


def build_minimal() -> bytes:
    return ClassFileBuilder("Min").method("f", "()V", ["return"]).build()


def test_minimal_empty_method():
    cls = parse_class_file(build_minimal())
    assert cls.class_name == "Min"
    assert cls.super_name == "java/lang/Object"
    assert len(cls.methods) == 1
    m = cls.methods[0]
    assert m.name == "f" and m.descriptor == "()V"
    assert m.opcodes == [0xB1]
    assert m.call_sites == []


def test_bad_magic_offset_zero():
    with pytest.raises(MalformedClassFile) as err:
        parse_class_file(b"\x00\x01\x02\x03" + build_minimal()[4:])
    assert err.value.offset == 0


def test_truncated_file():
    data = build_minimal()
    with pytest.raises(MalformedClassFile):
        parse_class_file(data[: len(data) // 2])


def test_caller_callee_call_site():
    # two-method class where f calls g once; the builder is the oracle
    data = (
        ClassFileBuilder("Pair")
        .method("g", "()V", ["return"])
        .method("f", "()V", [("invokevirtual", "Pair", "g", "()V"), "return"])
        .build()
    )
    cls = parse_class_file(data)
    f = next(m for m in cls.methods if m.name == "f")
    assert len(f.call_sites) == 1
    site = f.call_sites[0]
    assert (site.owner, site.name, site.descriptor, site.kind) == ("Pair", "g", "()V", "virtual")


def test_method_without_code_attribute():
    data = ClassFileBuilder("Abs").method("a", "()I", None, flags=ACC_ABSTRACT).build()
    cls = parse_class_file(data)
    assert cls.methods[0].opcodes == []
    assert cls.methods[0].call_sites == []


def test_interfaces_and_fields_are_parsed_past():
    data = (
        ClassFileBuilder("Impl", interfaces=("java/lang/Runnable", "java/io/Closeable"))
        .field()
        .field()
        .method("run", "()V", ["return"])
        .build()
    )
    cls = parse_class_file(data)
    assert cls.interfaces == ["java/lang/Runnable", "java/io/Closeable"]
    assert [m.name for m in cls.methods] == ["run"]


def test_switch_padding_and_wide():
    code = [
        ("iload", b"\x05"),
        ("tableswitch", 0, 2, 20, 24, 28, 32),
        ("lookupswitch", 16, (1, 24), (9, 32)),
        ("wide_iinc", 300, -2),
        ("wide", "iload", 257),
        "return",
    ]
    data = ClassFileBuilder("Sw").method("s", "(I)V", code).build()
    cls = parse_class_file(data)
    ops = cls.methods[0].opcodes
    assert ops.count(0xAA) == 1 and ops.count(0xAB) == 1
    assert ops.count(0xC4) == 2  # both wide prefixes survive
    assert ops[-1] == 0xB1


def test_invoke_kinds_and_dynamic():
    code = [
        ("invokestatic", "java/lang/System", "nanoTime", "()J"),
        ("invokespecial", "java/lang/Object", "<init>", "()V"),
        ("invokeinterface", "java/util/List", "size", "()I"),
        ("invokedynamic", "apply", "()Ljava/lang/Runnable;"),
        "return",
    ]
    data = ClassFileBuilder("Inv").method("m", "()V", code).build()
    sites = parse_class_file(data).methods[0].call_sites
    assert [s.kind for s in sites] == ["static", "special", "interface", "dynamic"]
    assert sites[3].owner == "" and sites[3].name == "apply"


def test_invalid_opcode_is_malformed():
    data = ClassFileBuilder("Bad").method("f", "()V", [0xCB, "return"]).build()
    with pytest.raises(MalformedClassFile):
        parse_class_file(data)


def test_duplicate_method_is_malformed():
    data = (
        ClassFileBuilder("Dup")
        .method("f", "()V", ["return"])
        .method("f", "()V", ["return"])
        .build()
    )
    with pytest.raises(MalformedClassFile):
        parse_class_file(data)


def test_trailing_bytes_rejected():
    with pytest.raises(MalformedClassFile):
        parse_class_file(build_minimal() + b"\x00")


def test_call_sites_match_invoke_opcodes():
    data = (
        ClassFileBuilder("C")
        .method("m", "()V", [
            "iconst_0",
            ("invokestatic", "A", "x", "()V"),
            "pop",
            ("invokevirtual", "B", "y", "()I"),
            "return",
        ])
        .build()
    )
    m = parse_class_file(data).methods[0]
    invokes = [op for op in m.opcodes if op in (0xB6, 0xB7, 0xB8, 0xB9, 0xBA)]
    assert len(invokes) == len(m.call_sites) == 2


def _mutate(data: bytes, rng: random.Random) -> bytes:
    mode = rng.randrange(4)
    if mode == 0 and len(data) > 8:  # flip bytes
        out = bytearray(data)
        for _ in range(rng.randint(1, 8)):
            out[rng.randrange(len(out))] = rng.randrange(256)
        return bytes(out)
    if mode == 1:  # truncate
        return data[: rng.randrange(len(data))]
    if mode == 2:  # splice two images
        cut = rng.randrange(len(data))
        return data[:cut] + data[cut:][::-1]
    return bytes(rng.randrange(256) for _ in range(rng.randrange(200)))


def test_fuzz_totality_never_crashes():
    # structured fuzz: the parser must return a model or raise MalformedClassFile
    rng = random.Random(0xF00D)
    seeds = [
        build_minimal(),
        ClassFileBuilder("Two")
        .method("g", "()V", ["return"])
        .method("f", "()V", [("invokevirtual", "Two", "g", "()V"), "return"])
        .build(),
        ClassFileBuilder("Sw").method("s", "(I)V", [
            ("iload", b"\x05"),
            ("tableswitch", 0, 1, 16, 20, 24),
            "return",
        ]).build(),
    ]
    for case in range(1000):
        data = _mutate(seeds[case % len(seeds)], rng)
        try:
            parse_class_file(data)
        except MalformedClassFile:
            pass
