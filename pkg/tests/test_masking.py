import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skelpaint.coloring import ColorScheme, build_cloud, colorize
from skelpaint.masking import MaskResult, MaskSpec, apply_mask
from skelpaint.skeleton import SkeletonSequence, body_partition


def make_cloud(T, J, M=1, seed=0, colored=False):
    gen = np.random.Generator(np.random.PCG64(seed))
    seq = SkeletonSequence(coords=gen.normal(size=(T, M, J, 3)))
    cloud = build_cloud(seq)
    if colored:
        cloud = colorize(cloud, ColorScheme("temporal"))
    return cloud


def test_random_count_pinned():
    cloud = make_cloud(40, 25, 2)
    res = apply_mask(cloud, MaskSpec(strategy="random", param=0.25, seed=1))
    assert res.masked_indices.size == 500
    assert np.all(res.masked_cloud.points[res.masked_indices] == 0.0)


def test_random_rounding_half_even():
    # round-half-to-even fixes the count: 0.25 of 10 -> 2.5 -> 2
    cloud = make_cloud(2, 5, 1)
    res = apply_mask(cloud, MaskSpec(strategy="random", param=0.25, seed=3))
    assert res.masked_indices.size == round(0.25 * 10) == 2


def test_frame_only_count():
    cloud = make_cloud(40, 25, 1)
    res = apply_mask(cloud, MaskSpec(strategy="frame_only", param=10, seed=2))
    assert res.masked_indices.size == 250
    masked_frames = {int(t) for t in res.masked_cloud.prov[res.masked_indices, 0]}
    assert len(masked_frames) == 10


def test_segment_clipped_window():
    # center t=3 with length 15 clips to [1,10]: 10 frames * 25 joints
    cloud = make_cloud(40, 25, 1)
    spec = MaskSpec(strategy="segment", param=15, seed=0)
    found = None
    for seed in range(200):
        res = apply_mask(cloud, spec.with_seed(seed))
        frames = sorted({int(t) for t in cloud.prov[res.masked_indices, 0]})
        if frames[0] == 1 and len(frames) < 15:
            found = (seed, frames, res)
            break
    assert found is not None, "no clipped draw in 200 seeds"
    _, frames, res = found
    assert frames == list(range(1, frames[-1] + 1))
    assert res.masked_indices.size == len(frames) * 25


def test_segment_window_rule():
    # window = [c - floor((L-1)/2), c + ceil((L-1)/2)] clipped
    cloud = make_cloud(12, 2, 1)
    for L in (1, 2, 3, 8):
        for seed in range(30):
            res = apply_mask(cloud, MaskSpec(strategy="segment", param=L, seed=seed))
            frames = sorted({int(t) for t in cloud.prov[res.masked_indices, 0]})
            assert frames == list(range(frames[0], frames[-1] + 1))
            assert len(frames) <= L
            span = frames[-1] - frames[0] + 1
            if frames[0] > 1 and frames[-1] < 12:
                assert span == L


def test_joint_only_count_two_person():
    cloud = make_cloud(40, 25, 2)
    res = apply_mask(cloud, MaskSpec(strategy="joint_only", param=10, seed=4))
    assert res.masked_indices.size == 10 * 40 * 2


def test_body_part_union():
    part = body_partition(25, 1)
    cloud = make_cloud(6, 25, 1)
    res = apply_mask(
        cloud, MaskSpec(strategy="body_part", param=3, seed=5, partition=part)
    )
    masked_joints = {int(j) for j in cloud.prov[res.masked_indices, 1]}
    parts_hit = {part.part_of(j) for j in masked_joints}
    assert len(parts_hit) == 3
    union = set().union(*(part.parts[p - 1] for p in parts_hit))
    assert masked_joints == union
    assert res.masked_indices.size == len(union) * 6


def test_unmasked_points_bitwise_unchanged():
    cloud = make_cloud(8, 6, 2, colored=True)
    res = apply_mask(cloud, MaskSpec(strategy="random", param=0.3, seed=6))
    keep = np.setdiff1d(np.arange(cloud.size), res.masked_indices)
    np.testing.assert_array_equal(res.masked_cloud.points[keep], cloud.points[keep])
    np.testing.assert_array_equal(res.masked_cloud.prov, cloud.prov)
    assert res.masked_cloud.kind == "masked"


def test_determinism():
    cloud = make_cloud(10, 5)
    spec = MaskSpec(strategy="random", param=0.4, seed=11)
    a = apply_mask(cloud, spec)
    b = apply_mask(cloud, spec)
    np.testing.assert_array_equal(a.masked_indices, b.masked_indices)
    np.testing.assert_array_equal(a.masked_cloud.points, b.masked_cloud.points)


def test_different_seeds_differ():
    cloud = make_cloud(10, 5)
    a = apply_mask(cloud, MaskSpec(strategy="random", param=0.4, seed=1))
    b = apply_mask(cloud, MaskSpec(strategy="random", param=0.4, seed=2))
    assert not np.array_equal(a.masked_indices, b.masked_indices)


def test_spec_validation():
    with pytest.raises(ValueError):
        MaskSpec(strategy="random", param=0.0)
    with pytest.raises(ValueError):
        MaskSpec(strategy="random", param=1.0)
    with pytest.raises(ValueError):
        MaskSpec(strategy="frame_only", param=2.5)
    with pytest.raises(ValueError):
        MaskSpec(strategy="frame_only", param=0)
    with pytest.raises(ValueError):
        MaskSpec(strategy="nonsense", param=1)
    with pytest.raises(ValueError):
        MaskSpec(strategy="body_part", param=2)


def test_over_budget_counts_rejected():
    cloud = make_cloud(5, 4)
    with pytest.raises(ValueError):
        apply_mask(cloud, MaskSpec(strategy="frame_only", param=6))
    with pytest.raises(ValueError):
        apply_mask(cloud, MaskSpec(strategy="joint_only", param=5))
    with pytest.raises(ValueError):
        apply_mask(cloud, MaskSpec(strategy="segment", param=6))


@settings(max_examples=40, deadline=None)
@given(
    T=st.integers(2, 12),
    J=st.integers(2, 10),
    M=st.integers(1, 2),
    seed=st.integers(0, 10_000),
    data=st.data(),
)
def test_cardinality_laws(T, J, M, seed, data):
    cloud = make_cloud(T, J, M, seed=seed % 97)
    n = T * J * M
    strat = data.draw(st.sampled_from(["random", "frame_only", "segment", "joint_only"]))
    if strat == "random":
        ratio = data.draw(st.floats(0.05, 0.95))
        spec = MaskSpec(strategy="random", param=ratio, seed=seed)
        expected = round(ratio * n)
    elif strat == "frame_only":
        count = data.draw(st.integers(1, T))
        spec = MaskSpec(strategy="frame_only", param=count, seed=seed)
        expected = count * J * M
    elif strat == "joint_only":
        count = data.draw(st.integers(1, J))
        spec = MaskSpec(strategy="joint_only", param=count, seed=seed)
        expected = count * T * M
    else:
        L = data.draw(st.integers(1, T))
        spec = MaskSpec(strategy="segment", param=L, seed=seed)
        expected = None  # window length after clipping, checked below
    res = apply_mask(cloud, spec)
    if expected is not None:
        assert res.masked_indices.size == expected
    else:
        frames = {int(t) for t in cloud.prov[res.masked_indices, 0]}
        assert res.masked_indices.size == len(frames) * J * M
        assert len(frames) <= spec.param
    # disjoint partition of indices
    keep = np.setdiff1d(np.arange(n), res.masked_indices)
    assert keep.size + res.masked_indices.size == n
    assert np.all(res.masked_cloud.points[res.masked_indices] == 0.0)


def test_selection_frequencies_roughly_uniform():
    cloud = make_cloud(8, 3)
    counts = np.zeros(8)
    trials = 600
    for seed in range(trials):
        res = apply_mask(cloud, MaskSpec(strategy="frame_only", param=2, seed=seed))
        for t in {int(v) for v in cloud.prov[res.masked_indices, 0]}:
            counts[t - 1] += 1
    expected = trials * 2 / 8
    assert np.all(np.abs(counts - expected) < 5 * np.sqrt(expected))


def test_result_type():
    cloud = make_cloud(4, 3)
    res = apply_mask(cloud, MaskSpec(strategy="random", param=0.5, seed=1))
    assert isinstance(res, MaskResult)
    assert res.masked_indices.dtype.kind == "i"
    assert np.all(np.diff(res.masked_indices) > 0)
