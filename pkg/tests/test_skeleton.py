import numpy as np
import pytest

from skelpaint.skeleton import (
    BodyPartition,
    SkeletonSequence,
    SklBodyError,
    SklCoordinateError,
    SklEmptyFileError,
    SklHeaderError,
    SklJointCountError,
    body_partition,
    center_on_root,
    read_partition_file,
    read_skl,
    uniform_sample,
    write_skl,
)


def make_seq(T=3, M=1, J=2, label=None, seed=0):
    gen = np.random.Generator(np.random.PCG64(seed))
    return SkeletonSequence(coords=gen.normal(size=(T, M, J, 3)), label=label)


def test_round_trip(tmp_path):
    seq = make_seq(T=3, M=1, J=2, label=7)
    path = tmp_path / "a.skl"
    write_skl(path, seq)
    back = read_skl(path)
    assert back.frames == 3 and back.joints == 2 and back.persons == 1
    assert back.label == 7
    np.testing.assert_array_equal(back.coords, seq.coords)


def test_round_trip_two_person(tmp_path):
    seq = make_seq(T=4, M=2, J=3)
    path = tmp_path / "b.skl"
    write_skl(path, seq)
    back = read_skl(path)
    assert back.label is None
    np.testing.assert_array_equal(back.coords, seq.coords)


def test_header_example(tmp_path):
    lines = ["SKL 1 3 2 1"]
    for t in range(1, 4):
        for j in range(1, 3):
            lines.append(f"{t} 1 {j} 0.0 0.0 0.0")
    path = tmp_path / "c.skl"
    path.write_text("\n".join(lines) + "\n")
    seq = read_skl(path)
    assert (seq.frames, seq.joints, seq.persons) == (3, 2, 1)


def test_empty_file(tmp_path):
    path = tmp_path / "empty.skl"
    path.write_text("")
    with pytest.raises(SklEmptyFileError):
        read_skl(path)


def test_bad_header(tmp_path):
    path = tmp_path / "h.skl"
    path.write_text("SKX 1 2 2 1\n")
    with pytest.raises(SklHeaderError) as err:
        read_skl(path)
    assert err.value.line == 1


def test_nan_coordinate_names_line(tmp_path):
    seq = make_seq(T=2, M=1, J=2)
    path = tmp_path / "n.skl"
    write_skl(path, seq)
    lines = path.read_text().splitlines()
    fields = lines[3].split()
    fields[3] = "nan"
    lines[3] = " ".join(fields)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SklCoordinateError) as err:
        read_skl(path)
    assert err.value.line == 4


def test_non_numeric_coordinate(tmp_path):
    path = tmp_path / "x.skl"
    path.write_text("SKL 1 1 1 1\n1 1 1 0.0 oops 0.0\n")
    with pytest.raises(SklCoordinateError) as err:
        read_skl(path)
    assert err.value.line == 2


def test_joint_count_mismatch(tmp_path):
    seq = make_seq(J=2)
    path = tmp_path / "j.skl"
    write_skl(path, seq)
    with pytest.raises(SklJointCountError):
        read_skl(path, expected_joints=5)
    assert read_skl(path, expected_joints=2).joints == 2


def test_wrong_line_count(tmp_path):
    path = tmp_path / "w.skl"
    path.write_text("SKL 1 2 2 1\n1 1 1 0 0 0\n")
    with pytest.raises(SklBodyError):
        read_skl(path)


def test_out_of_order_indices(tmp_path):
    path = tmp_path / "o.skl"
    path.write_text("SKL 1 1 2 1\n1 1 2 0 0 0\n1 1 1 0 0 0\n")
    with pytest.raises(SklBodyError) as err:
        read_skl(path)
    assert err.value.line == 2


def test_error_classes_are_distinct():
    kinds = {SklEmptyFileError, SklHeaderError, SklCoordinateError, SklJointCountError, SklBodyError}
    assert len(kinds) == 5


def test_sequence_validation():
    with pytest.raises(ValueError):
        SkeletonSequence(coords=np.zeros((2, 3, 4, 3)))  # M=3
    with pytest.raises(ValueError):
        SkeletonSequence(coords=np.full((1, 1, 1, 3), np.nan))
    with pytest.raises(ValueError):
        SkeletonSequence(coords=np.zeros((1, 1, 1, 3)), label=0)


# frame selection oracle: enumerate floor((i-1)*T/target)+1 by hand
def test_uniform_sample_identity():
    seq = make_seq(T=40, J=2)
    out = uniform_sample(seq, 40)
    np.testing.assert_array_equal(out.coords, seq.coords)


def test_uniform_sample_downsample():
    seq = make_seq(T=80, J=1)
    out = uniform_sample(seq, 40)
    expected_frames = list(range(1, 80, 2))  # 1,3,5,...,79
    np.testing.assert_array_equal(out.coords, seq.coords[[f - 1 for f in expected_frames]])


def test_uniform_sample_upsample():
    seq = make_seq(T=10, J=1)
    out = uniform_sample(seq, 40)
    expected = [i for i in range(1, 11) for _ in range(4)]
    np.testing.assert_array_equal(out.coords, seq.coords[[f - 1 for f in expected]])


def test_uniform_sample_idempotent():
    seq = make_seq(T=23, J=2)
    once = uniform_sample(seq, 9)
    twice = uniform_sample(once, 9)
    np.testing.assert_array_equal(once.coords, twice.coords)


def test_uniform_sample_order_preserved():
    seq = make_seq(T=17)
    for target in (1, 5, 16, 17, 50):
        idx = [((i - 1) * 17) // target for i in range(1, target + 1)]
        assert idx == sorted(idx)
        out = uniform_sample(seq, target)
        assert out.frames == target


def test_uniform_sample_preserves_label():
    seq = make_seq(T=6, label=3)
    assert uniform_sample(seq, 4).label == 3


def test_center_on_root():
    seq = make_seq(T=3, J=4)
    centered = center_on_root(seq, root_joint=2)
    np.testing.assert_array_equal(centered.coords[0, 0, 1], np.zeros(3))
    np.testing.assert_allclose(
        centered.coords, seq.coords - seq.coords[0, 0, 1], atol=0
    )


@pytest.mark.parametrize("joints", [25, 20, 15])
@pytest.mark.parametrize("scale", [1, 2])
def test_partitions_cover_all_joints(joints, scale):
    part = body_partition(joints, scale)
    assert part.part_count == (10 if scale == 1 else 6)
    union = set()
    for p in part.parts:
        assert not (union & p)
        union |= p
    assert union == set(range(1, joints + 1))


def test_partition_part_of():
    part = body_partition(25, 1)
    for j in range(1, 26):
        p = part.part_of(j)
        assert j in part.parts[p - 1]


def test_partition_unknown_joint_count():
    with pytest.raises(ValueError):
        body_partition(17, 1)


def test_partition_validation_rejects_overlap():
    with pytest.raises(ValueError):
        BodyPartition(
            scale=2,
            names=("a", "b", "c", "d", "e", "f"),
            parts=tuple(frozenset(s) for s in [{1, 2}, {2, 3}, {4}, {5}, {6}, {7}]),
            joints=7,
        )


def test_partition_file(tmp_path):
    path = tmp_path / "layout.txt"
    path.write_text(
        "# toy layout\n"
        "PART 2 6\n"
        "head 1\n"
        "torso 2\n"
        "arm_r 3\n"
        "arm_l 4\n"
        "leg_r 5\n"
        "leg_l 6\n"
    )
    part = read_partition_file(path, 2)
    assert part.joints == 6
    assert part.names[0] == "head"
    assert body_partition(6, 2, layout_path=path).part_count == 6


def test_partition_file_unnamed_parts(tmp_path):
    path = tmp_path / "plain.txt"
    path.write_text("PART 2 6\n1\n2\n3\n4\n5\n6\n")
    part = read_partition_file(path, 2)
    assert part.parts[2] == frozenset({3})


def test_partition_file_missing_scale(tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("PART 1 10\n" + "\n".join(str(i) for i in range(1, 11)) + "\n")
    with pytest.raises(ValueError):
        read_partition_file(path, 2)
