import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sitrec.ontology import (
    BLANK,
    BoundingBox,
    OntologyError,
    SituationFrame,
    attach_swig_boxes,
    build_ontology,
    denormalize_box,
    load_frames,
    load_imsitu_space,
    load_vidsitu,
    normalize_box,
    save_frames,
    save_vidsitu,
    validate_frame,
    vidsitu_verb_vocab,
)


@pytest.fixture
def onto():
    return build_ontology({"ride": ["agent", "vehicle", "place"], "eat": ["agent", "food"]}, ["man", "horse", "bread", "", "field"])


def test_indices_are_lexicographic(onto):
    assert onto.verbs == ("eat", "ride")
    assert onto.roles == ("agent", "food", "place", "vehicle")
    assert onto.nouns == tuple(sorted(["man", "horse", "bread", BLANK, "field"]))
    assert onto.frame_roles(onto.verb_index["ride"]) == [0, 3, 2]
    assert onto.no_role == 4
    assert onto.file_noun_count == 5


def test_blank_class_added_once():
    o = build_ontology({"v": ["a"]}, ["x"])
    assert o.nouns.count(BLANK) == 1
    assert o.file_noun_count == 1


def test_digest_is_stable_and_sensitive(onto):
    again = build_ontology({"eat": ["agent", "food"], "ride": ["agent", "vehicle", "place"]}, ["field", "", "bread", "horse", "man"])
    assert again.digest() == onto.digest()
    other = build_ontology({"ride": ["agent", "place", "vehicle"], "eat": ["agent", "food"]}, ["man", "horse", "bread", "", "field"])
    assert other.digest() != onto.digest()


def test_space_round_trip(tmp_path, onto):
    onto.save(tmp_path / "space.json")
    assert load_imsitu_space(tmp_path / "space.json") == onto


@pytest.mark.parametrize(
    "payload, key",
    [
        ("{not json", None),
        ({"verbs": {}}, "nouns"),
        ({"verbs": {"v": {"order": ["a"] * 7}}, "nouns": {}}, "v"),
        ({"verbs": {"v": {"foo": 1}}, "nouns": {}}, "v"),
        ({"verbs": {"v": {"order": "a"}}, "nouns": {}}, "v"),
    ],
)
def test_malformed_space(tmp_path, payload, key):
    path = tmp_path / "space.json"
    path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
    with pytest.raises(OntologyError) as err:
        load_imsitu_space(path)
    if key is not None:
        assert err.value.key == key


def test_space_accepts_roles_without_order(tmp_path):
    path = tmp_path / "space.json"
    path.write_text(json.dumps({"verbs": {"v": {"roles": {"b": {}, "a": {}}}}, "nouns": {"n": {}}}))
    assert load_imsitu_space(path).roles_of["v"] == ("b", "a")


def _write(tmp_path, data):
    path = tmp_path / "ann.json"
    path.write_text(json.dumps(data))
    return path


def test_load_frames(tmp_path, onto):
    path = _write(tmp_path, {
        "b.jpg": {"verb": "eat", "frames": [{"agent": "man", "food": "bread"}, {"agent": "", "food": "bread"}]},
        "a.jpg": {"verb": "ride", "frames": [{"agent": "man", "vehicle": "horse", "place": "field"}]},
    })
    frames = load_frames(path, onto)
    assert [f.image_id for f in frames] == ["a.jpg", "b.jpg"]
    eat = frames[1]
    assert eat.annotator_nouns.shape == (2, 2)
    assert eat.annotator_nouns[0, 1] == onto.blank
    for f in frames:
        validate_frame(f, onto)


@pytest.mark.parametrize(
    "entry, message",
    [
        ({"verb": "fly", "frames": [{}]}, "unknown verb"),
        ({"verb": "eat", "frames": []}, "no annotator"),
        ({"verb": "eat", "frames": [{"agent": "man"}]}, "missing role"),
        ({"verb": "eat", "frames": [{"agent": "man", "food": "rock"}]}, "unknown noun"),
        ({"verb": "eat", "frames": [{"agent": "man", "food": "bread", "tool": "man"}]}, "unknown role"),
    ],
)
def test_load_frames_errors(tmp_path, onto, entry, message):
    with pytest.raises(OntologyError, match=message) as err:
        load_frames(_write(tmp_path, {"x.jpg": entry}), onto)
    assert err.value.key == "x.jpg"


def test_validate_frame_rejects_wrong_roles(onto):
    bad = SituationFrame("x", 0, (0, 2), np.zeros((2, 1), dtype=np.int64))
    with pytest.raises(OntologyError, match="roles"):
        validate_frame(bad, onto)


def test_box_normalization():
    box = normalize_box(10, 20, 30, 60, 100, 100)
    assert box.as_tuple() == pytest.approx((0.2, 0.4, 0.4, 0.2))
    assert denormalize_box(box, 100, 100) == pytest.approx((10, 20, 30, 60))
    with pytest.raises(ValueError, match="inverted"):
        normalize_box(30, 20, 10, 60, 100, 100)
    with pytest.raises(ValueError, match="outside"):
        normalize_box(10, 20, 130, 60, 100, 100)
    # within tolerance the box is clamped to the image
    assert normalize_box(0, 0, 100.00001, 50, 100, 100, tol=1e-6).w == 1.0


@given(
    st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1),
    st.integers(1, 4000), st.integers(1, 4000),
)
def test_box_round_trip_property(a, b, c, d, width, height):
    x1, x2 = sorted((a * width, c * width))
    y1, y2 = sorted((b * height, d * height))
    box = normalize_box(x1, y1, x2, y2, width, height)
    back = denormalize_box(box, width, height)
    assert back == pytest.approx((x1, y1, x2, y2), abs=1e-9 * max(width, height))


def test_bounding_box_range():
    with pytest.raises(ValueError):
        BoundingBox(0.5, 0.5, 1.5, 0.1)
    with pytest.raises(ValueError):
        BoundingBox(float("nan"), 0.5, 0.1, 0.1)


def test_swig_boxes(tmp_path, onto):
    frames = load_frames(_write(tmp_path, {"a.jpg": {"verb": "eat", "frames": [{"agent": "man", "food": "bread"}]}, "b.jpg": {"verb": "eat", "frames": [{"agent": "man", "food": "bread"}]}}), onto)
    swig = tmp_path / "swig.json"
    swig.write_text(json.dumps({"a.jpg": {"width": 200, "height": 100, "bb": {"agent": [0, 0, 100, 50], "food": [-1, -1, -1, -1]}}}))
    a, b = attach_swig_boxes(frames, swig, onto)
    assert a.boxes[0].as_tuple() == pytest.approx((0.25, 0.25, 0.5, 0.5))
    assert a.boxes[1] is None
    assert b.boxes == (None, None)
    swig.write_text(json.dumps({"a.jpg": {"width": 10, "height": 10, "bb": {"agent": [0, 0, 50, 5]}}}))
    with pytest.raises(OntologyError):
        attach_swig_boxes(frames, swig, onto)


nouns_st = st.lists(st.sampled_from(["man", "horse", "bread", BLANK, "field"]), min_size=1, max_size=4)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["eat", "ride"]), st.integers(1, 4), st.randoms()), min_size=1, max_size=6))
def test_frame_file_round_trip_property(tmp_path_factory, items):
    onto = build_ontology({"ride": ["agent", "vehicle", "place"], "eat": ["agent", "food"]}, ["man", "horse", "bread", "", "field"])
    frames = []
    for i, (verb, q, rnd) in enumerate(items):
        v = onto.verb_index[verb]
        roles = tuple(onto.frame_roles(v))
        nouns = np.array([[rnd.randrange(len(onto.nouns)) for _ in range(q)] for _ in roles], dtype=np.int64)
        frames.append(SituationFrame(f"img{i:03d}", v, roles, nouns))
    path = tmp_path_factory.mktemp("rt") / "f.json"
    save_frames(frames, onto, path)
    assert load_frames(path, onto) == frames


VIDSITU = [
    {
        "vid_seg_int_id": "v1",
        "Ev1": {"VerbID": "talk_1", "Arg0 (talker)": "man in suit", "Arg1 (hearer)": "woman", "ALoc (place)": "office"},
        "Ev2": {"VerbID": "walk_2", "Arg0 (walker)": "man", "ArgScn": "street"},
        "Ev3": {"VerbID": "talk_1"},
        "Ev4": {"VerbID": "talk_1", "AMnr (manner)": "quickly"},
        "Ev5": {"VerbID": "walk_2", "Arg2 (goal)": "door"},
    }
]


def test_vidsitu_parsing(tmp_path):
    (tmp_path / "vsann_dev.json").write_text(json.dumps([[VIDSITU[0], VIDSITU[0]]]))
    assert vidsitu_verb_vocab(tmp_path, "dev") == ("talk_1", "walk_2")
    (video,) = load_vidsitu(tmp_path, "dev")
    ev1, ev2, ev3, ev4, _ = video.events
    assert ev1.args == {"Arg0": ("talker", "man in suit"), "Arg1": ("hearer", "woman")}
    assert ev2.phrase("AScn") == "street"
    assert ev2.args["AScn"][0] == "ascn"
    assert ev3.args == {} and ev4.args == {}
    assert len(video.alt_events) == 1
    assert ev1.verb_index == 0


def test_vidsitu_errors(tmp_path):
    bad = dict(VIDSITU[0])
    del bad["Ev5"]
    (tmp_path / "vsann_train.json").write_text(json.dumps([bad]))
    with pytest.raises(OntologyError, match="5 events"):
        load_vidsitu(tmp_path, "train")
    bad = dict(VIDSITU[0], Ev5={"VerbID": "walk_2", "Arg9 (x)": "y"})
    (tmp_path / "vsann_train.json").write_text(json.dumps([bad]))
    with pytest.raises(OntologyError, match="placeholder"):
        load_vidsitu(tmp_path, "train")
    (tmp_path / "vsann_train.json").write_text(json.dumps(VIDSITU))
    with pytest.raises(OntologyError, match="unknown verb"):
        load_vidsitu(tmp_path, "train", verbs=["talk_1"])


def test_vidsitu_round_trip(tmp_path):
    (tmp_path / "vsann_dev.json").write_text(json.dumps([VIDSITU[0], [VIDSITU[0], VIDSITU[0]]]))
    videos = load_vidsitu(tmp_path, "dev")
    out = tmp_path / "copy.json"
    save_vidsitu(videos, out)
    assert load_vidsitu(out, "dev") == videos


def test_save_keeps_source_noun_count(tmp_path):
    o = build_ontology({"v": ["a"]}, ["x", "y"])
    o.save(tmp_path / "space.json")
    again = load_imsitu_space(tmp_path / "space.json")
    assert again == o and again.file_noun_count == 2
