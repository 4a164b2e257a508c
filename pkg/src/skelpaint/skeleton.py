"""Skeleton sequences: loading, validation, temporal sampling, body parts.

A sequence is a (T, M, J, 3) array of joint positions in meters, plus an
optional 1-based class label.  The on-disk form is a small line-oriented
text format:

    SKL 1 <T> <J> <M> [label]
    t m j x y z          (T*M*J lines, ordered by t, then m, then j)

All indices in the file are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


class SklError(ValueError):
    """Base class for SKL parse failures. ``line`` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SklEmptyFileError(SklError):
    pass


class SklHeaderError(SklError):
    pass


class SklCoordinateError(SklError):
    """Non-numeric or non-finite coordinate value."""


class SklJointCountError(SklError):
    """Joint count does not match what the caller expected."""


class SklBodyError(SklError):
    """Wrong line count or out-of-order (t, m, j) indices."""


@dataclass(frozen=True)
class SkeletonSequence:
    """One skeleton sequence.

    Attributes:
        coords: float64 array of shape (T, M, J, 3), finite.
        label: optional 1-based class id.
    """

    coords: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 4 or coords.shape[3] != 3:
            raise ValueError(f"coords must have shape (T, M, J, 3), got {coords.shape}")
        T, M, J, _ = coords.shape
        if T < 1 or J < 1:
            raise ValueError("need at least one frame and one joint")
        if M not in (1, 2):
            raise ValueError(f"persons must be 1 or 2, got {M}")
        if not np.isfinite(coords).all():
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, "coords", coords)
        if self.label is not None and self.label < 1:
            raise ValueError(f"label must be >= 1, got {self.label}")

    @property
    def frames(self) -> int:
        return self.coords.shape[0]

    @property
    def persons(self) -> int:
        return self.coords.shape[1]

    @property
    def joints(self) -> int:
        return self.coords.shape[2]


def read_skl(path, expected_joints: Optional[int] = None) -> SkeletonSequence:
    """Parse an SKL file into a validated SkeletonSequence.

    ``expected_joints``, when given, must match the header's joint count.
    Raises a subclass of SklError naming the offending 1-based line.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or all(not ln.strip() for ln in lines):
        raise SklEmptyFileError("file is empty", line=1)

    header = lines[0].split()
    if len(header) not in (5, 6) or header[0] != "SKL":
        raise SklHeaderError(
            "expected 'SKL 1 <frames> <joints> <persons> [label]'", line=1
        )
    try:
        version, T, J, M = (int(x) for x in header[1:5])
        label = int(header[5]) if len(header) == 6 else None
    except ValueError:
        raise SklHeaderError("header fields must be integers", line=1) from None
    if version != 1:
        raise SklHeaderError(f"unsupported version {version}", line=1)
    if T < 1 or J < 1 or M not in (1, 2):
        raise SklHeaderError(f"bad sizes T={T} J={J} M={M}", line=1)
    if expected_joints is not None and J != expected_joints:
        raise SklJointCountError(
            f"file has {J} joints, expected {expected_joints}", line=1
        )

    body = [(i + 1, ln) for i, ln in enumerate(lines[1:], start=1) if ln.strip()]
    want = T * M * J
    if len(body) != want:
        line = body[-1][0] + 1 if body else 2
        raise SklBodyError(
            f"expected {want} coordinate lines, found {len(body)}", line=line
        )

    coords = np.empty((T, M, J, 3), dtype=np.float64)
    row = 0
    for lineno, ln in body:
        fields = ln.split()
        if len(fields) != 6:
            raise SklBodyError(f"expected 't m j x y z', got {len(fields)} fields", line=lineno)
        try:
            t, m, j = int(fields[0]), int(fields[1]), int(fields[2])
        except ValueError:
            raise SklBodyError(f"non-integer index in {fields[:3]}", line=lineno) from None
        et = row // (M * J) + 1
        em = row % (M * J) // J + 1
        ej = row % J + 1
        if (t, m, j) != (et, em, ej):
            raise SklBodyError(
                f"indices ({t} {m} {j}) out of order, expected ({et} {em} {ej})",
                line=lineno,
            )
        try:
            xyz = [float(f) for f in fields[3:6]]
        except ValueError:
            raise SklCoordinateError(f"non-numeric coordinate in {fields[3:6]}", line=lineno) from None
        if not all(np.isfinite(v) for v in xyz):
            raise SklCoordinateError(f"non-finite coordinate in {fields[3:6]}", line=lineno)
        coords[t - 1, m - 1, j - 1] = xyz
        row += 1
    return SkeletonSequence(coords=coords, label=label)


def write_skl(path, seq: SkeletonSequence) -> None:
    """Write ``seq`` in SKL format. repr() keeps full float precision."""
    T, M, J = seq.frames, seq.persons, seq.joints
    with open(path, "w", encoding="utf-8") as fh:
        head = f"SKL 1 {T} {J} {M}"
        if seq.label is not None:
            head += f" {seq.label}"
        fh.write(head + "\n")
        for t in range(T):
            for m in range(M):
                for j in range(J):
                    x, y, z = (float(v) for v in seq.coords[t, m, j])
                    fh.write(f"{t + 1} {m + 1} {j + 1} {x!r} {y!r} {z!r}\n")


def uniform_sample(seq: SkeletonSequence, target_T: int) -> SkeletonSequence:
    """Resample to exactly ``target_T`` frames.

    Output frame i (1-based) is input frame floor((i-1)*T/target_T)+1,
    which handles both down-sampling and up-sampling by repetition and
    never reorders frames.
    """
    if target_T < 1:
        raise ValueError(f"target_T must be >= 1, got {target_T}")
    T = seq.frames
    idx = [((i - 1) * T) // target_T for i in range(1, target_T + 1)]
    return SkeletonSequence(coords=seq.coords[idx], label=seq.label)


def center_on_root(seq: SkeletonSequence, root_joint: int = 1) -> SkeletonSequence:
    """Translate so person 1's ``root_joint`` in frame 1 sits at the origin.

    Optional convenience; nothing in the pipeline applies it implicitly.
    """
    if not 1 <= root_joint <= seq.joints:
        raise ValueError(f"root_joint {root_joint} outside [1, {seq.joints}]")
    origin = seq.coords[0, 0, root_joint - 1]
    return SkeletonSequence(coords=seq.coords - origin, label=seq.label)


@dataclass(frozen=True)
class BodyPartition:
    """Disjoint named joint groups covering {1..J}.

    scale 1 has 10 parts, scale 2 has 6.  Part order is meaningful: it
    fixes the part index used by coarse spatial coloring.
    """

    scale: int
    names: tuple
    parts: tuple  # tuple of frozensets of 1-based joint ids
    joints: int

    def __post_init__(self):
        expected = {1: 10, 2: 6}.get(self.scale)
        if expected is None:
            raise ValueError(f"scale must be 1 or 2, got {self.scale}")
        if len(self.parts) != expected:
            raise ValueError(
                f"scale {self.scale} needs {expected} parts, got {len(self.parts)}"
            )
        if len(self.names) != len(self.parts):
            raise ValueError("names and parts length mismatch")
        seen = set()
        for part in self.parts:
            if not part:
                raise ValueError("empty part")
            if seen & part:
                raise ValueError(f"parts overlap on joints {sorted(seen & part)}")
            seen |= part
        if seen != set(range(1, self.joints + 1)):
            missing = sorted(set(range(1, self.joints + 1)) - seen)
            extra = sorted(seen - set(range(1, self.joints + 1)))
            raise ValueError(f"parts must cover 1..{self.joints}; missing {missing}, extra {extra}")

    @property
    def part_count(self) -> int:
        return len(self.parts)

    def part_of(self, joint: int) -> int:
        """1-based part index containing ``joint``."""
        for p, part in enumerate(self.parts, start=1):
            if joint in part:
                return p
        raise ValueError(f"joint {joint} not in any part")


def _partition(scale, joints, named):
    return BodyPartition(
        scale=scale,
        names=tuple(name for name, _ in named),
        parts=tuple(frozenset(ids) for _, ids in named),
        joints=joints,
    )


# Built-in layouts. Joint numbering for 25 follows the Kinect v2 skeleton
# (1 spine base .. 25 right thumb), for 20 the Kinect v1 skeleton, and the
# 15-joint layout is a common coarse pose (head, neck, torso, limbs).
_LAYOUTS = {
    25: {
        1: [
            ("neck", {3, 4}),
            ("trunk", {1, 2, 21}),
            ("right_arm", {9, 10, 11}),
            ("right_hand", {12, 24, 25}),
            ("left_arm", {5, 6, 7}),
            ("left_hand", {8, 22, 23}),
            ("right_leg", {17, 18, 19}),
            ("right_foot", {20}),
            ("left_leg", {13, 14, 15}),
            ("left_foot", {16}),
        ],
        2: [
            ("head", {3, 4}),
            ("torso", {1, 2, 21}),
            ("right_arm", {9, 10, 11, 12, 24, 25}),
            ("left_arm", {5, 6, 7, 8, 22, 23}),
            ("right_leg", {17, 18, 19, 20}),
            ("left_leg", {13, 14, 15, 16}),
        ],
    },
    20: {
        1: [
            ("neck", {3, 4}),
            ("trunk", {1, 2}),
            ("right_arm", {9, 10, 11}),
            ("right_hand", {12}),
            ("left_arm", {5, 6, 7}),
            ("left_hand", {8}),
            ("right_leg", {17, 18, 19}),
            ("right_foot", {20}),
            ("left_leg", {13, 14, 15}),
            ("left_foot", {16}),
        ],
        2: [
            ("head", {3, 4}),
            ("torso", {1, 2}),
            ("right_arm", {9, 10, 11, 12}),
            ("left_arm", {5, 6, 7, 8}),
            ("right_leg", {17, 18, 19, 20}),
            ("left_leg", {13, 14, 15, 16}),
        ],
    },
    15: {
        1: [
            ("neck", {1, 2}),
            ("trunk", {3}),
            ("right_arm", {7, 8}),
            ("right_hand", {9}),
            ("left_arm", {4, 5}),
            ("left_hand", {6}),
            ("right_leg", {13, 14}),
            ("right_foot", {15}),
            ("left_leg", {10, 11}),
            ("left_foot", {12}),
        ],
        2: [
            ("head", {1, 2}),
            ("torso", {3}),
            ("right_arm", {7, 8, 9}),
            ("left_arm", {4, 5, 6}),
            ("right_leg", {13, 14, 15}),
            ("left_leg", {10, 11, 12}),
        ],
    },
}


def body_partition(joints: int, scale: int, layout_path=None) -> BodyPartition:
    """Return the body partition for ``joints`` at ``scale`` (1 or 2).

    Layouts for 25, 20 and 15 joints are built in; any other joint count
    needs a layout file (see read_partition_file).
    """
    if layout_path is not None:
        part = read_partition_file(layout_path, scale)
        if part.joints != joints:
            raise ValueError(
                f"layout file covers {part.joints} joints, sequence has {joints}"
            )
        return part
    if joints not in _LAYOUTS:
        raise ValueError(
            f"no built-in layout for {joints} joints (have {sorted(_LAYOUTS)}); "
            "pass a layout file"
        )
    if scale not in _LAYOUTS[joints]:
        raise ValueError(f"scale must be 1 or 2, got {scale}")
    return _partition(scale, joints, _LAYOUTS[joints][scale])


def read_partition_file(path, scale: int) -> BodyPartition:
    """Parse a layout file.

    Format: a header line ``PART <scale> <part_count>`` followed by one
    line per part listing its 1-based joint indices.  A part line may
    start with a non-numeric name token.  Several scales may share one
    file; the block matching ``scale`` is used.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh.read().splitlines()]
    i = 0
    while i < len(lines):
        if not lines[i] or lines[i].startswith("#"):
            i += 1
            continue
        head = lines[i].split()
        if head[0] != "PART" or len(head) != 3:
            raise ValueError(f"line {i + 1}: expected 'PART <scale> <part_count>'")
        try:
            file_scale, count = int(head[1]), int(head[2])
        except ValueError:
            raise ValueError(f"line {i + 1}: PART fields must be integers") from None
        named = []
        i += 1
        for p in range(count):
            while i < len(lines) and (not lines[i] or lines[i].startswith("#")):
                i += 1
            if i >= len(lines):
                raise ValueError(f"PART {file_scale}: expected {count} part lines")
            fields = lines[i].split()
            if fields and not fields[0].lstrip("-").isdigit():
                name, fields = fields[0], fields[1:]
            else:
                name = f"part_{p + 1}"
            try:
                ids = {int(f) for f in fields}
            except ValueError:
                raise ValueError(f"line {i + 1}: joint indices must be integers") from None
            if not ids:
                raise ValueError(f"line {i + 1}: empty part")
            named.append((name, ids))
            i += 1
        if file_scale == scale:
            joints = max(max(ids) for _, ids in named)
            return _partition(scale, joints, named)
    raise ValueError(f"no PART block for scale {scale} in {path}")
