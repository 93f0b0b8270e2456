import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from sitrec.data import event_memory_valid
from sitrec.ontology import ARG_SLOTS
from sitrec.video import (
    BOS,
    EOS,
    SEP,
    DecoderConfig,
    EventEncoder,
    Tokenizer,
    VideoConfig,
    VideoSrlModel,
    event_ids,
    event_mask,
    parse_generated,
    render,
    shift_labels,
    target_tensor,
)

D = 6


def _config(variant="tf", max_len=30):
    return VideoConfig(variant=variant, hidden_dim=8, heads=2, layers=2, ff_dim=12, decoder=DecoderConfig(layers=2, heads=2, dim=8, ff_dim=12, max_len=max_len))


def _inputs(b=2, t=3, seed=0):
    g = torch.Generator().manual_seed(seed)
    mask = torch.rand(b, 5, 4, generator=g) < 0.5
    return (torch.randn(b, 5, D, generator=g), torch.randn(b, 5, t, D, generator=g), torch.randn(b, 5, D, generator=g), torch.randn(b, 5, 4, D, generator=g), mask)


def test_render_format():
    events = [{"verb": "talk", "Arg0": "man in suit", "Arg1": "woman", "AScn": "office"}, {"verb": "walk"}]
    assert render(events) == [BOS, "verb", "talk", "Arg0", "man", "in", "suit", "Arg1", "woman", "AScn", "office", SEP, "verb", "walk", EOS]


word = st.text(alphabet="abcdefg", min_size=1, max_size=4)
phrase = st.lists(word, min_size=1, max_size=3).map(" ".join)
event = st.fixed_dictionaries({"verb": word}, optional={s: phrase for s in ARG_SLOTS})


@settings(max_examples=200)
@given(st.lists(event, min_size=5, max_size=5))
def test_render_parse_round_trip(events):
    parsed = parse_generated(render(events))
    assert parsed.warnings == 0
    assert parsed.events == events


@settings(max_examples=200)
@given(st.lists(st.sampled_from([BOS, EOS, SEP, "verb", *ARG_SLOTS, "x", "y"]), max_size=40))
def test_parse_never_raises(tokens):
    parsed = parse_generated(tokens)
    assert len(parsed.events) == 5
    assert parsed.warnings >= 0


def test_parse_counts_malformed_regions():
    toks = ["stray", "verb", "a", "Arg0", "Arg0", "b", SEP] + [SEP] * 4 + [EOS]
    parsed = parse_generated(toks)
    assert parsed.events[0] == {"verb": "a", "Arg0": "b"}
    # stray text, empty Arg0, one surplus event
    assert parsed.warnings == 3


def test_tokenizer():
    tok = Tokenizer.fit(["a b b", "b c"], min_freq=2)
    assert tok.itos[: len(Tokenizer().itos)] == Tokenizer().itos
    assert "b" in tok.stoi and "a" not in tok.stoi
    assert tok.decode(tok.encode(["b", "a"])) == ["b", "UNK"]
    assert tok.pad_id == 0


def test_target_helpers():
    t = target_tensor([[1, 5, 2], [1, 2]], pad_id=0)
    assert t.tolist() == [[1, 5, 2], [1, 2, 0]]
    assert shift_labels(t, 0).tolist() == [[5, 2, 0], [2, 0, 0]]


def test_event_ids_and_mask():
    assert event_ids().tolist() == [e for e in range(5) for _ in range(4)]
    assert torch.equal(event_mask(), torch.eye(5, dtype=torch.bool))


@pytest.mark.parametrize("variant", ["mlp", "tf", "xtf"])
def test_encoder_shapes_and_first_slot_visible(variant):
    enc = EventEncoder(D, _config(variant)).eval()
    pooled, unpooled, verbs, roles, mask = _inputs()
    mask[0, 2] = False
    memory, valid = enc(pooled, unpooled, verbs, roles, mask)
    assert memory.shape == (2, 20, 8)
    assert bool(valid.view(2, 5, 4)[:, :, 0].all())
    assert torch.equal(valid.view(2, 5, 4)[:, :, 1:], mask[:, :, 1:])
    with pytest.raises(ValueError, match="events"):
        enc(pooled[:, :4], unpooled[:, :4], verbs[:, :4], roles[:, :4], mask[:, :4])


def test_decoder_causal_and_pad_invariant():
    model = VideoSrlModel(D, 13, _config()).eval()
    memory, valid = model.encode_events(*_inputs(b=1))
    tokens = torch.tensor([[1, 5, 6, 7, 2]])
    with torch.no_grad():
        base = model.decode_teacher_forced(memory, valid, tokens)
        padded = model.decode_teacher_forced(memory, valid, torch.tensor([[1, 5, 6, 7, 2, 0, 0]]))
    # causal attention: trailing PAD never changes earlier positions
    assert torch.equal(base, padded[:, :5])
    with pytest.raises(ValueError, match="max_len"):
        model.decode_teacher_forced(memory, valid, torch.ones(1, 40, dtype=torch.long))


def test_greedy_decoding_limits():
    torch.manual_seed(0)
    model = VideoSrlModel(D, 13, _config(max_len=6)).train()
    memory, valid = model.encode_events(*_inputs(b=2))
    out = model.decode_greedy(memory, valid, bos_id=1, eos_id=2)
    assert all(len(seq) <= 6 for seq in out)
    out1 = model.decode_greedy(memory, valid, bos_id=1, eos_id=2, max_len=1)
    assert all(len(seq) == 1 for seq in out1)
    assert model.training


def test_greedy_matches_teacher_forcing():
    torch.manual_seed(1)
    model = VideoSrlModel(D, 13, _config(max_len=8)).eval()
    memory, valid = model.encode_events(*_inputs(b=1))
    (seq,) = model.decode_greedy(memory, valid, bos_id=1, eos_id=2)
    with torch.no_grad():
        logits = model.decode_teacher_forced(memory, valid, torch.tensor([[1] + seq[:-1]]))
    assert logits.argmax(-1)[0].tolist() == seq


def test_event_memory_valid():
    valid = torch.zeros(2, 20, dtype=torch.bool)
    valid[0, 4:6] = True
    out = event_memory_valid(valid, 1)
    assert out[0].nonzero().flatten().tolist() == [4, 5]
    # an empty event still exposes its first slot
    assert out[1].nonzero().flatten().tolist() == [4]
