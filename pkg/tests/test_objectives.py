import math

import pytest
import torch
import torch.nn.functional as F
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from oracles import loop_maxe

from sitrec.objectives import (
    annotator_ce_loss,
    bbox_l1,
    combined_loss,
    maxe_loss,
    per_annotator_ce,
    role_ce,
    seq_ce,
)

finite = st.floats(-20, 20, allow_nan=False, width=64)


@st.composite
def instances(draw):
    m = draw(st.integers(1, 6))
    q = draw(st.integers(1, 4))
    c = draw(st.integers(2, 12))
    logits = draw(arrays("float64", (m, c), elements=finite))
    labels = draw(arrays("int64", (m, q), elements=st.integers(0, c - 1)))
    return torch.tensor(logits), torch.tensor(labels)


@settings(max_examples=200, deadline=None)
@given(instances())
def test_maxe_matches_loop_oracle(inst):
    logits, labels = inst
    assert float(maxe_loss(logits, labels)) == pytest.approx(loop_maxe(logits.tolist(), labels.tolist()), abs=1e-8)


@settings(max_examples=200, deadline=None)
@given(instances())
def test_maxe_bounds(inst):
    logits, labels = inst
    maxe = float(maxe_loss(logits, labels))
    assert maxe >= 0
    # the minimum never exceeds the average over annotators
    assert maxe <= float(annotator_ce_loss(logits, labels)) + 1e-9


@settings(max_examples=100, deadline=None)
@given(instances(), st.data())
def test_maxe_permutation_invariant(inst, data):
    logits, labels = inst
    perm = data.draw(st.permutations(range(labels.shape[1])))
    assert float(maxe_loss(logits, labels[:, list(perm)])) == pytest.approx(float(maxe_loss(logits, labels)), abs=1e-12)


def test_maxe_masks_and_padding():
    logits = torch.tensor([[2.0, 0.0, 0.0], [0.0, 5.0, 0.0]])
    labels = torch.tensor([[1, 0], [2, -1]])
    mask = torch.tensor([True, False])
    expected = -torch.log_softmax(logits[0], -1)[0]
    assert float(maxe_loss(logits, labels, mask)) == pytest.approx(float(expected))
    with pytest.raises(ValueError, match="masked"):
        maxe_loss(logits, labels, torch.tensor([False, False]))
    with pytest.raises(ValueError, match="exceeds"):
        maxe_loss(logits, torch.tensor([[3, 0], [0, 0]]))


def test_maxe_gradient_flows_through_first_minimum():
    logits = torch.zeros(1, 3, requires_grad=True)
    maxe_loss(logits, torch.tensor([[1, 1]])).backward()
    expected = torch.softmax(torch.zeros(3), -1) - F.one_hot(torch.tensor(1), 3)
    assert torch.allclose(logits.grad[0], expected)


def test_per_annotator_ce_inf_for_missing():
    ce = per_annotator_ce(torch.zeros(2, 4), torch.tensor([[0, -1], [3, 2]]))
    assert math.isinf(float(ce[0, 1]))
    assert float(ce[1, 0]) == pytest.approx(math.log(4))


def test_bbox_l1():
    pred = torch.tensor([[[0.5, 0.5, 0.2, 0.2], [0.1, 0.1, 0.1, 0.1]]])
    gt = torch.tensor([[[0.4, 0.5, 0.2, 0.3], [0.9, 0.9, 0.9, 0.9]]])
    loss, n = bbox_l1(pred, gt, torch.tensor([[True, False]]))
    assert n == 1 and float(loss) == pytest.approx(0.2)
    loss, n = bbox_l1(pred, gt, torch.tensor([[False, False]]))
    assert n == 0 and float(loss) == 0.0


def test_combined_loss_adds_terms():
    logits = torch.randn(1, 2, 5)
    labels = torch.tensor([[[1, 2], [3, 3]]])
    mask = torch.tensor([[True, True]])
    boxes = torch.rand(1, 2, 4)
    report = combined_loss(logits, labels, mask, boxes, torch.rand(1, 2, 4), mask)
    d = report.as_dict()
    assert d["total"] == pytest.approx(d["maxe"] + d["l1"], rel=1e-6)
    assert report.count == 4


def test_role_ce():
    logits = torch.randn(2, 3, 5)
    targets = torch.tensor([[0, 4, 4], [1, 2, 4]])
    expected = F.cross_entropy(logits.reshape(-1, 5), targets.reshape(-1))
    assert torch.allclose(role_ce(logits, targets), expected)
    assert torch.allclose(role_ce(logits, targets, scale=0.5), expected * 0.5)
    with pytest.raises(ValueError):
        role_ce(logits, torch.tensor([[0, 5, 4], [1, 2, 4]]))


def test_seq_ce_ignores_padding():
    logits = torch.randn(1, 4, 6)
    targets = torch.tensor([[2, 3, 0, 0]])
    pad = targets == 0
    expected = F.cross_entropy(logits[0, :2], targets[0, :2])
    assert torch.allclose(seq_ce(logits, targets, pad), expected)
    logits2 = logits.clone()
    logits2[0, 2:] = 100 * torch.randn(2, 6)
    assert torch.equal(seq_ce(logits2, targets, pad), seq_ce(logits, targets, pad))
    with pytest.raises(ValueError):
        seq_ce(logits, targets, torch.ones_like(pad))
