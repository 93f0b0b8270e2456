import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from sitrec.heads import (
    RoleHead,
    RoleHeadConfig,
    VerbHeadConfig,
    VerbMLP,
    decode_roles,
    predict_roles,
    predict_verb,
    role_targets,
    topk_with_ties,
)


def test_verb_head_shapes():
    head = VerbMLP(16, 7, VerbHeadConfig(hidden_layers=2, hidden_dim=8))
    assert head(torch.randn(3, 16)).shape == (3, 7)
    assert sum(isinstance(m, torch.nn.Linear) for m in head.modules()) == 3
    with pytest.raises(ValueError, match="dim 16"):
        head(torch.randn(3, 15))
    with pytest.raises(ValueError):
        VerbHeadConfig(hidden_layers=0)


def test_topk_ties_prefer_lower_index():
    logits = torch.tensor([1.0, 3.0, 3.0, 0.0, 3.0])
    assert topk_with_ties(logits, 3).tolist() == [1, 2, 4]
    assert topk_with_ties(logits, 1).tolist() == [1]
    with pytest.raises(ValueError):
        topk_with_ties(logits, 6)


@given(st.lists(st.integers(-3, 3), min_size=1, max_size=12), st.data())
def test_topk_property(values, data):
    logits = torch.tensor(values, dtype=torch.float32)
    k = data.draw(st.integers(1, len(values)))
    idx = topk_with_ties(logits, k).tolist()
    assert len(set(idx)) == k
    chosen = sorted((-values[i], i) for i in idx)
    assert [i for _, i in chosen] == idx
    # nothing outside the selection beats anything inside it
    worst = min(values[i] for i in idx)
    assert all(values[j] <= worst for j in range(len(values)) if j not in idx)


def test_predict_verb_is_eval_mode_and_restores_training():
    torch.manual_seed(0)
    head = VerbMLP(8, 5, VerbHeadConfig(hidden_dim=16, dropout=0.9)).train()
    x = torch.randn(8)
    a, b = predict_verb(head, x, k=3), predict_verb(head, x, k=3)
    assert a == b and len(a) == 3
    assert a[0][1] >= a[1][1] >= a[2][1]
    assert head.training


def test_role_head_shapes_and_decoding():
    head = RoleHead(8, 4, RoleHeadConfig(heads=6, hidden_dim=16))
    out = head(torch.randn(2, 8), torch.randn(2, 8))
    assert out.shape == (2, 6, 5)
    assert head.no_role == 4
    assert decode_roles([2, 0, 2, 4, 1, 3], 4) == [2, 0]
    assert decode_roles([4, 1], 4) == []
    assert isinstance(predict_roles(head, torch.randn(8), torch.randn(8)), list)


def test_role_targets():
    assert role_targets([3, 1], 4, 9) == [3, 1, 9, 9]
    with pytest.raises(ValueError):
        role_targets([1, 2, 3], 2, 9)


@given(st.lists(st.integers(0, 5), min_size=0, max_size=6, unique=True))
def test_decode_inverts_targets(roles):
    assert decode_roles(role_targets(roles, 6, 6), 6) == roles
