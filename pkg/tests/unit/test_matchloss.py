import itertools
import math

import numpy as np
import pytest

from ovavss.config import LossConfig
from ovavss.data import ObjectTrack, VideoSample
from ovavss.errors import InputError
from ovavss.model import CostMatrix, QueryOutputs, dice_loss, focal_loss, hungarian, mask_targets, total_loss
from ovavss.model.matchloss import match_cost
from ovavss.numcore import Tensor, grad_check

BIG = 30.0


def _brute_force(values: np.ndarray) -> float:
    n, k = values.shape
    return min(sum(values[q, j] for j, q in enumerate(perm)) for perm in itertools.permutations(range(n), k))


def test_hungarian_small_example():
    result = hungarian(np.array([[1.0, 2.0], [3.0, 1.0]]))
    assert result.pairs == [(0, 0), (1, 1)]
    assert result.total == 2.0


def test_hungarian_prefers_zero_diagonal():
    result = hungarian(CostMatrix(values=1.0 - np.eye(4)))
    assert result.total == 0.0
    assert all(q == k for q, k in result.pairs)


def test_hungarian_matches_brute_force(rng):
    for _ in range(100):
        k = int(rng.integers(1, 7))
        n = int(rng.integers(k, 7))
        values = rng.uniform(size=(n, k))
        result = hungarian(values)
        assert result.total == pytest.approx(_brute_force(values), abs=1e-12)
        assert len(set(result.queries)) == k and sorted(result.targets) == list(range(k))


def test_hungarian_ties_go_to_the_lowest_query():
    result = hungarian(np.array([[1.0, 1.0], [0.0, 0.0], [1.0, 1.0]]))
    assert result.pairs == [(0, 0), (1, 1)]
    assert result.total == 1.0
    assert hungarian(np.zeros((5, 2))).pairs == [(0, 0), (1, 1)]


def test_hungarian_tie_break_matches_brute_force(rng):
    for _ in range(150):
        k = int(rng.integers(1, 5))
        n = int(rng.integers(k, 6))
        values = rng.integers(0, 2, size=(n, k)).astype(np.float64)
        candidates = [
            (sum(values[q, j] for j, q in enumerate(perm)), sorted((q, j) for j, q in enumerate(perm)))
            for perm in itertools.permutations(range(n), k)
        ]
        best = min(c[0] for c in candidates)
        expected = min(pairs for total, pairs in candidates if total == best)
        result = hungarian(values)
        assert result.pairs == expected
        assert result.total == best


def test_hungarian_rejects_bad_input():
    with pytest.raises(InputError):
        hungarian(np.zeros((2, 3)))
    with pytest.raises(InputError):
        hungarian(np.array([[np.nan]]))
    with pytest.raises(InputError):
        hungarian(np.zeros(3))


def test_hungarian_no_targets():
    assert hungarian(np.zeros((4, 0))).pairs == []


def test_focal_examples():
    assert focal_loss([0.0], [1.0]).item() == pytest.approx(0.25 * 0.25 * math.log(2.0), abs=1e-5)
    assert focal_loss([BIG, -BIG], [1.0, 0.0]).item() < 1e-12


def test_focal_without_modulation_is_bce(rng):
    x = rng.normal(size=20)
    t = (rng.uniform(size=20) > 0.5).astype(float)
    p = 1.0 / (1.0 + np.exp(-x))
    bce = -np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))
    assert focal_loss(x, t, alpha=None, gamma=0.0).item() == pytest.approx(bce, rel=1e-9)


def test_dice_examples():
    assert dice_loss(np.ones(5), np.ones(5)).item() == pytest.approx(0.0)
    assert dice_loss(np.zeros(5), np.ones(5)).item() == pytest.approx(1.0 - 1.0 / 6.0)
    p, t = [1, 1, 1, 1, 0, 0], [0, 0, 1, 1, 1, 1]
    assert dice_loss(np.array(p, float), np.array(t, float)).item() == pytest.approx(4.0 / 9.0)


def test_shape_mismatch_rejected():
    with pytest.raises(InputError):
        focal_loss(np.zeros(3), np.zeros(4))
    with pytest.raises(InputError):
        dice_loss(np.zeros(3), np.zeros(4))


def _sample(silent_second: bool = False) -> VideoSample:
    a = np.zeros((2, 32, 32), dtype=bool)
    a[:, 0:8, 0:12] = True
    b = np.zeros((2, 32, 32), dtype=bool)
    b[:, 16:32, 20:28] = True
    return VideoSample(
        sample_id="s",
        frames=np.zeros((2, 3, 32, 32)),
        audio_feats=np.zeros((2, 128)),
        objects=[
            ObjectTrack(class_id=1, masks=a, sounding=np.array([True, False])),
            ObjectTrack(class_id=2, masks=b, sounding=np.array([not silent_second] * 2)),
        ],
    )


def test_mask_targets_pool_and_silence():
    targets = mask_targets(_sample(), (8, 8))
    assert targets.shape == (2, 2, 8, 8)
    assert targets[0, 0].sum() == 2 * 3 and not targets[0, 1].any()
    assert targets[1, 1, 4:8, 5:7].all()
    assert mask_targets(_sample(silent_second=True), (8, 8)).shape[0] == 1


def _oracle(sample: VideoSample, n: int = 4) -> QueryOutputs:
    targets = mask_targets(sample, (8, 8))
    sound = np.tile([-BIG, BIG], (n, 1))
    masks = np.full((n, 2, 8, 8), -BIG)
    for k in range(targets.shape[0]):
        sound[k] = [BIG, -BIG]
        masks[k] = np.where(targets[k] > 0, BIG, -BIG)
    return QueryOutputs(Tensor(sound), Tensor(masks), Tensor(np.zeros((n, 16))))


def test_match_cost_with_no_sounding_objects(rng):
    out = QueryOutputs(Tensor(rng.normal(size=(4, 2))), Tensor(rng.normal(size=(4, 2, 8, 8))), Tensor(np.zeros((4, 16))))
    cost = match_cost(out, mask_targets(_sample(silent_second=True), (8, 8))[:0], LossConfig())
    assert cost.values.shape == (4, 0)
    assert cost.terms["cost_focal"].shape == (4, 0)
    assert hungarian(cost).pairs == []


def test_silent_clip_loss_is_ce_only(rng):
    sample = VideoSample("s", np.zeros((2, 3, 32, 32)), np.zeros((2, 128)))
    outputs = [
        QueryOutputs(Tensor(np.zeros((4, 2))), Tensor(rng.normal(size=(4, 2, 8, 8))), Tensor(np.zeros((4, 16))))
        for _ in range(3)
    ]
    loss, parts = total_loss(outputs, sample)
    assert loss.item() == pytest.approx(3 * 2.0 * math.log(2.0))
    assert parts.focal == 0.0 and parts.dice == 0.0


def test_oracle_prediction_has_near_zero_loss():
    sample = _sample()
    loss, _ = total_loss([_oracle(sample)] * 2, sample)
    assert loss.item() < 1e-6


def test_loss_invariant_to_object_order(rng):
    sample = _sample()
    out = QueryOutputs(Tensor(rng.normal(size=(4, 2))), Tensor(rng.normal(size=(4, 2, 8, 8))), Tensor(np.zeros((4, 16))))
    flipped = VideoSample(sample.sample_id, sample.frames, sample.audio_feats, sample.objects[::-1])
    assert total_loss([out], sample)[0].item() == pytest.approx(total_loss([out], flipped)[0].item(), rel=1e-12)


def test_loss_invariant_to_query_order(rng):
    sample = _sample()
    sound, masks, emb = rng.normal(size=(5, 2)), rng.normal(size=(5, 2, 8, 8)), rng.normal(size=(5, 16))
    perm = rng.permutation(5)
    outputs = [QueryOutputs(Tensor(sound), Tensor(masks), Tensor(emb))]
    shuffled = [QueryOutputs(Tensor(sound[perm]), Tensor(masks[perm]), Tensor(emb[perm]))]
    assert total_loss(outputs, sample)[0].item() == pytest.approx(total_loss(shuffled, sample)[0].item(), rel=1e-12)


def test_loss_grows_with_corruption():
    sample = _sample()
    losses = []
    # two queries for two objects keep the matching fixed while query 0 degrades
    for flips in (0, 4, 16, 64):
        out = _oracle(sample, n=2)
        logits = out.mask_logits.data.reshape(2, -1)
        logits[0, :flips] *= -1.0
        losses.append(total_loss([out], sample)[0].item())
    assert all(a < b for a, b in zip(losses, losses[1:]))


def test_loss_gradient_through_matching(rng):
    sample = _sample()
    sound = Tensor(rng.normal(size=(3, 2)))
    emb = Tensor(np.zeros((3, 16)))
    masks = Tensor(rng.normal(size=(3, 2, 8, 8)))
    f_masks = lambda x: total_loss([QueryOutputs(sound, x, emb)], sample)[0]  # noqa: E731
    assert grad_check(f_masks, masks, max_entries=25) < 1e-4
    f_sound = lambda x: total_loss([QueryOutputs(x, masks, emb)], sample)[0]  # noqa: E731
    assert grad_check(f_sound, sound) < 1e-4
