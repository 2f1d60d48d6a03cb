import pytest

from macneto import opcodes
from macneto.model import CallSite
from macneto.vocabulary import (
    OPCODE_GROUPS,
    abstract_opcode,
    build_vocabulary,
    load_vocabulary,
    parse_vocabulary_file,
)


@pytest.fixture(scope="module")
def vocab():
    return load_vocabulary()


def test_default_vocabulary_has_252_slots(vocab):
    assert vocab.total_slots == 252
    assert len(vocab.api_map) == 235
    assert list(vocab.abstract_slots[:17]) == list(OPCODE_GROUPS)


def test_similar_arithmetic_opcodes_share_a_slot(vocab):
    iadd = abstract_opcode(opcodes.OPCODE["iadd"], vocab)
    fadd = abstract_opcode(opcodes.OPCODE["fadd"], vocab)
    assert iadd == fadd == vocab.abstract_slots.index("xadd")


def test_untracked_opcode_maps_to_none(vocab):
    assert abstract_opcode(opcodes.OPCODE["aload_0"], vocab) is None
    assert abstract_opcode(opcodes.OPCODE["dup"], vocab) is None


def test_group_membership_spot_checks(vocab):
    for mnemonic, group in [
        ("caload", "xaload"), ("sastore", "xastore"), ("arraylength", "arraylength"),
        ("lsub", "xsub"), ("dmul", "xmul"), ("ldiv", "xdiv"), ("frem", "xrem"),
        ("dneg", "xneg"), ("lushr", "xshift"), ("land", "xand"), ("lor", "xor"),
        ("lxor", "x_xor"), ("iinc", "iinc"), ("dcmpg", "xcomp"),
        ("ifnull", "ifXXX"), ("if_acmpeq", "ifXXX"), ("lookupswitch", "xswitch"),
    ]:
        slot = abstract_opcode(opcodes.OPCODE[mnemonic], vocab)
        assert vocab.abstract_slots[slot] == group, mnemonic


def test_api_call_prefix_match(vocab):
    site = CallSite("java/io/BufferedReader", "readLine", "()V", "virtual")
    slot = abstract_opcode(site, vocab)
    assert vocab.abstract_slots[slot] == "api_java_io"


def test_longest_prefix_wins():
    vocab = build_vocabulary([("a/b", "api_ab"), ("a/b/c", "api_abc")])
    assert vocab.slot_of_owner("a/b/c/D") == vocab.api_map["a/b/c"]
    assert vocab.slot_of_owner("a/b/x/D") == vocab.api_map["a/b"]
    assert vocab.slot_of_owner("z/Unknown") is None


def test_non_api_call_is_untracked(vocab):
    site = CallSite("com/example/Local", "run", "()V", "virtual")
    assert abstract_opcode(site, vocab) is None


def test_dynamic_site_untracked(vocab):
    site = CallSite("", "apply", "()V", "dynamic")
    assert abstract_opcode(site, vocab) is None


def test_vocabulary_file_parsing():
    vocab = parse_vocabulary_file("# comment\na/b api_ab\n\nc/d api_cd  # trail\n")
    assert vocab.total_slots == 19
    with pytest.raises(ValueError):
        parse_vocabulary_file("just-one-token\n")
    with pytest.raises(ValueError):
        parse_vocabulary_file("a/b api_ab\na/b api_other\n")
    with pytest.raises(ValueError):
        parse_vocabulary_file("a/b xadd\n")


def test_fingerprint_tracks_content():
    one = parse_vocabulary_file("a/b api_ab\n")
    same = parse_vocabulary_file("a/b api_ab\n")
    other = parse_vocabulary_file("a/c api_ac\n")
    assert one.fingerprint == same.fingerprint
    assert one.fingerprint != other.fingerprint
