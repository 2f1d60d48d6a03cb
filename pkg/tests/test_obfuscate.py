import numpy as np
import pytest

from macneto.callgraph import MethodRef, build_call_graph
from macneto.features import extract_app_id, method_id
from macneto.model import parse_textual_app, serialize_textual_app
from macneto.obfuscate import (
    DECRYPT_DESCRIPTOR,
    JunkSegment,
    ObfuscationConfig,
    decrypt_method,
    default_config,
    inject_string_decrypt,
    insert_junk,
    load_junk_vocabulary,
    obfuscate,
    rename_identifiers,
    replay_id_delta,
    segment_method,
)
from macneto.vocabulary import load_vocabulary

VOCAB = load_vocabulary()


def slot(name):
    return VOCAB.abstract_slots.index(name)


FIXTURE = """app fix
class fix/A extends java/lang/Object
method work (I)I
strings 2
iload_1
iadd
call:fix/B.helper()V
api:java/util/ArrayList.add
ireturn

class fix/B extends fix/A
method helper ()V
imul
return

method work (I)I
isub
ireturn

"""


def fixture():
    return parse_textual_app(FIXTURE)


# --- renaming ---------------------------------------------------------------


def test_rename_preserves_distribution():
    app = fixture()
    renamed = rename_identifiers(app, seed=9).app
    assert np.array_equal(
        extract_app_id(app, VOCAB).counts, extract_app_id(renamed, VOCAB).counts
    )


def test_rename_is_deterministic_and_bijective():
    app = fixture()
    one = rename_identifiers(app, seed=9)
    two = rename_identifiers(app, seed=9)
    assert serialize_textual_app(one.app) == serialize_textual_app(two.app)
    assert len(set(one.class_map.values())) == len(one.class_map)
    assert len(set(one.method_map.values())) == len(one.method_map)
    other_seed = rename_identifiers(app, seed=10)
    assert serialize_textual_app(one.app) != serialize_textual_app(other_seed.app)


def test_rename_keeps_api_owners():
    renamed = rename_identifiers(fixture(), seed=9).app
    owners = {s.owner for _, m in renamed.methods() for s in m.call_sites}
    assert "java/util/ArrayList" in owners
    assert all(not o.startswith("fix/") for o in owners)


def test_rename_call_graph_isomorphic_via_map():
    app = fixture()
    result = rename_identifiers(app, seed=9)
    original = build_call_graph(app, VOCAB)
    renamed = build_call_graph(result.app, VOCAB)

    def map_ref(ref: MethodRef) -> MethodRef:
        owner = result.class_map.get(ref.owner, ref.owner)
        name = result.method_map.get((ref.name, ref.descriptor), ref.name)
        return MethodRef(owner, name, ref.descriptor)

    mapped_nodes = {map_ref(n) for n in original.nodes}
    assert mapped_nodes == renamed.nodes
    mapped_edges = {(map_ref(a), map_ref(b)) for a, b in original.edge_set()}
    assert mapped_edges == renamed.edge_set()


def test_rename_overrides_stay_aligned():
    result = rename_identifiers(fixture(), seed=3)
    names = {}
    for cls in result.app.classes:
        for m in cls.methods:
            names.setdefault(m.name, set()).add(cls.class_name)
    # fix/A.work and fix/B.work shared a signature, so they share the new name
    assert any(len(owners) == 2 for owners in names.values())


# --- junk insertion ---------------------------------------------------------


def test_zero_intensity_is_identity():
    app = fixture()
    result = insert_junk(app, ObfuscationConfig(rename=False, junk_intensity=0.0))
    assert np.array_equal(
        extract_app_id(app, VOCAB).counts, extract_app_id(result.app, VOCAB).counts
    )
    assert result.insertions == []


def test_single_segment_delta():
    segment = JunkSegment("s", ("ifeq", "iadd", "iadd"))
    app = parse_textual_app("app one\nclass one/C\nmethod m ()V\nimul\n")
    config = ObfuscationConfig(rename=False, junk_intensity=1.0, junk_vocabulary=[segment])
    result = insert_junk(app, config, seed=4)
    delta = extract_app_id(result.app, VOCAB).counts - extract_app_id(app, VOCAB).counts
    assert delta[slot("ifXXX")] == 1
    assert delta[slot("xadd")] == 2
    assert delta.sum() == 3
    assert len(result.insertions) == 1


def test_full_intensity_closed_form():
    segment = JunkSegment("s", ("ifeq", "iadd", "iadd"))
    app = fixture()
    methods = sum(len(c.methods) for c in app.classes)
    config = ObfuscationConfig(rename=False, junk_intensity=1.0, junk_vocabulary=[segment])
    result = insert_junk(app, config, seed=4)
    delta = extract_app_id(result.app, VOCAB).counts - extract_app_id(app, VOCAB).counts
    assert np.array_equal(delta, methods * method_id(segment_method(segment), VOCAB).counts)


def test_junk_never_decreases_counts():
    app = fixture()
    config = default_config(seed=2, junk_intensity=0.9)
    result = insert_junk(app, config)
    delta = extract_app_id(result.app, VOCAB).counts - extract_app_id(app, VOCAB).counts
    assert (delta >= 0).all()


def test_shipped_vocabulary_loads():
    segments = load_junk_vocabulary()
    assert len(segments) == 8
    assert all(s.opcodes for s in segments)


# --- decrypt injection ------------------------------------------------------


def test_no_strings_no_injection():
    app = parse_textual_app("app z\nclass z/C\nmethod m ()V\niadd\n")
    result = inject_string_decrypt(app)
    assert result.injections == []
    assert serialize_textual_app(result.app) == serialize_textual_app(app)


def test_three_strings_one_class():
    app = parse_textual_app("app s\nclass s/C\nmethod m ()V\nstrings 3\niadd\n")
    result = inject_string_decrypt(app)
    (injection,) = result.injections
    assert injection.call_count == 3
    cls = result.app.classes[0]
    assert len(cls.methods) == 2
    helper = cls.methods[-1]
    assert helper.descriptor == DECRYPT_DESCRIPTOR
    decorated = cls.methods[0]
    calls_to_helper = [s for s in decorated.call_sites if s.name == helper.name]
    assert len(calls_to_helper) == 3


def test_decrypt_delta_is_pattern_only():
    # injected calls hit no vocabulary slot; the delta is the helper body
    app = parse_textual_app("app s\nclass s/C\nmethod m ()V\nstrings 3\niadd\n")
    result = inject_string_decrypt(app)
    delta = extract_app_id(result.app, VOCAB).counts - extract_app_id(app, VOCAB).counts
    assert np.array_equal(delta, method_id(decrypt_method(), VOCAB).counts)


def test_decrypt_pattern_hand_tally():
    counts = method_id(decrypt_method(), VOCAB).counts
    assert counts[slot("arraylength")] == 1
    assert counts[slot("ifXXX")] == 1
    assert counts[slot("xaload")] == 1
    assert counts[slot("x_xor")] == 1
    assert counts[slot("xastore")] == 1
    assert counts[slot("iinc")] == 1
    assert counts.sum() == 6


def test_helper_name_collision_resolved():
    app = parse_textual_app(
        "app s\nclass s/C\nmethod dec$ ([C)[C\nareturn\n\nmethod m ()V\nstrings 1\n\n"
    )
    result = inject_string_decrypt(app)
    names = [m.name for m in result.app.classes[0].methods]
    assert len(names) == len(set(names))


# --- full pipeline ----------------------------------------------------------


def test_disabled_transforms_identity_except_pair():
    app = fixture()
    config = ObfuscationConfig(rename=False, junk_intensity=0.0,
                               inject_string_decrypt=False, seed=7)
    result = obfuscate(app, config)
    assert result.app.pair_of == "fix"
    assert result.app.app_id == "fix__ob"
    stripped = serialize_textual_app(result.app).replace("fix__ob", "fix", 1)
    assert stripped == serialize_textual_app(app)


def test_rename_only_preserves_app_id_distribution():
    app = fixture()
    config = ObfuscationConfig(rename=True, junk_intensity=0.0,
                               inject_string_decrypt=False, seed=7)
    result = obfuscate(app, config)
    assert np.array_equal(
        extract_app_id(app, VOCAB).counts, extract_app_id(result.app, VOCAB).counts
    )


def test_full_pipeline_deterministic():
    app = fixture()
    config = default_config(seed=21, junk_intensity=0.8)
    one = obfuscate(app, config)
    two = obfuscate(app, config)
    assert serialize_textual_app(one.app) == serialize_textual_app(two.app)


def test_replay_log_reproduces_delta():
    app = fixture()
    config = default_config(seed=21, junk_intensity=0.8)
    result = obfuscate(app, config)
    delta = extract_app_id(result.app, VOCAB).counts - extract_app_id(app, VOCAB).counts
    assert np.array_equal(delta, replay_id_delta(result.log, VOCAB))


def test_config_validation():
    with pytest.raises(ValueError):
        ObfuscationConfig(junk_intensity=0.5)  # no vocabulary
    with pytest.raises(ValueError):
        ObfuscationConfig(junk_intensity=1.5, junk_vocabulary=[JunkSegment("s", ("nop",))])
    with pytest.raises(ValueError):
        JunkSegment("empty", ())
