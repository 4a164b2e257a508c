"""Skeleton clouds and order colorization.

A skeleton sequence is stacked into an unordered cloud of N = T*J*M
points.  Each point is (x, y, z, r, g, b) plus a provenance triple
(t, j, m) recording which frame, joint and person it came from.  The
color channels encode an order index along a red -> green -> blue ramp;
five schemes pick what that index is (frame, joint, person, frame
segment, or body part).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .skeleton import BodyPartition, SkeletonSequence

KINDS = (
    "raw",
    "temporal",
    "spatial",
    "person",
    "coarse_temporal",
    "coarse_spatial",
    "masked",
)


@dataclass(frozen=True)
class SkeletonCloud:
    """N points of (x, y, z, r, g, b) with per-point provenance.

    Attributes:
        points: (N, 6) float64; columns 0..2 position, 3..5 color.
        prov: (N, 3) int32 of 1-based (t, j, m).
        kind: one of KINDS.
        frames, joints, persons: source sequence sizes.
    """

    points: np.ndarray
    prov: np.ndarray
    kind: str
    frames: int
    joints: int
    persons: int

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        prov = np.asarray(self.prov, dtype=np.int32)
        n = self.frames * self.joints * self.persons
        if points.shape != (n, 6):
            raise ValueError(f"points must be ({n}, 6), got {points.shape}")
        if prov.shape != (n, 3):
            raise ValueError(f"prov must be ({n}, 3), got {prov.shape}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if not np.isfinite(points).all():
            raise ValueError("cloud values must be finite")
        if self.kind == "raw" and np.any(points[:, 3:] != 0.0):
            raise ValueError("raw clouds must have zero color")
        if self.kind not in ("raw", "masked"):
            rgb = points[:, 3:]
            if rgb.min() < 0.0 or rgb.max() > 1.0:
                raise ValueError("colors must lie in [0, 1]")
        lo, hi = prov.min(axis=0), prov.max(axis=0)
        if (lo < 1).any() or (hi > (self.frames, self.joints, self.persons)).any():
            raise ValueError("provenance indices out of range")
        if len(np.unique(prov, axis=0)) != n:
            raise ValueError("provenance must be a bijection onto (t, j, m) triples")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "prov", prov)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def replaced(self, points: np.ndarray, kind: str) -> "SkeletonCloud":
        return SkeletonCloud(
            points=points,
            prov=self.prov,
            kind=kind,
            frames=self.frames,
            joints=self.joints,
            persons=self.persons,
        )


def build_cloud(seq: SkeletonSequence) -> SkeletonCloud:
    """Stack a sequence into a raw (uncolored) cloud.

    Points are laid out in (t, j, m) order so exports are reproducible;
    consumers must not rely on the order otherwise.
    """
    T, M, J = seq.frames, seq.persons, seq.joints
    xyz = np.transpose(seq.coords, (0, 2, 1, 3)).reshape(T * J * M, 3)
    points = np.concatenate([xyz, np.zeros_like(xyz)], axis=1)
    t, j, m = np.meshgrid(
        np.arange(1, T + 1), np.arange(1, J + 1), np.arange(1, M + 1), indexing="ij"
    )
    prov = np.stack([t.ravel(), j.ravel(), m.ravel()], axis=1)
    return SkeletonCloud(
        points=points, prov=prov, kind="raw", frames=T, joints=J, persons=M
    )


def order_color(k: int, K: int):
    """Color for order index k of K on the red -> green -> blue ramp.

    r falls 1 -> 0 over the first half, b rises 0 -> 1 over the second,
    g peaks at 1 in the middle; the three always sum to 1.
    """
    if not 1 <= k <= K:
        raise ValueError(f"order index {k} outside [1, {K}]")
    x = 2.0 * k / K
    r = max(0.0, 1.0 - x)
    g = x if k <= K / 2 else 2.0 - x
    b = max(0.0, x - 1.0)
    return (min(r, 1.0), min(max(g, 0.0), 1.0), min(b, 1.0))


def _ramp(k: np.ndarray, K: int) -> np.ndarray:
    x = 2.0 * k.astype(np.float64) / K
    r = np.maximum(0.0, 1.0 - x)
    g = np.where(k <= K / 2, x, 2.0 - x)
    b = np.maximum(0.0, x - 1.0)
    return np.clip(np.stack([r, g, b], axis=1), 0.0, 1.0)


@dataclass(frozen=True)
class ColorScheme:
    """Which order index drives the ramp.

    variant: temporal | spatial | person | coarse_temporal | coarse_spatial.
    coarse_temporal groups frames into blocks of ``segment_size``;
    coarse_spatial needs a ``partition`` of the joints.
    """

    variant: str
    segment_size: Optional[int] = None
    partition: Optional[BodyPartition] = None

    def __post_init__(self):
        if self.variant not in ("temporal", "spatial", "person", "coarse_temporal", "coarse_spatial"):
            raise ValueError(f"unknown color scheme {self.variant!r}")
        if self.variant == "coarse_temporal":
            if self.segment_size is None or self.segment_size < 1:
                raise ValueError("coarse_temporal needs segment_size >= 1")
        if self.variant == "coarse_spatial" and self.partition is None:
            raise ValueError("coarse_spatial needs a body partition")


def colorize(cloud: SkeletonCloud, scheme: ColorScheme) -> SkeletonCloud:
    """Color a raw cloud in place of its zero colors.

    Positions and provenance are untouched.  Person coloring is defined
    only for two-person data (red = person 1, blue = person 2).
    """
    if cloud.kind != "raw":
        raise ValueError(f"can only colorize raw clouds, got kind={cloud.kind!r}")
    t, j, m = cloud.prov[:, 0], cloud.prov[:, 1], cloud.prov[:, 2]
    v = scheme.variant
    if v == "temporal":
        rgb = _ramp(t, cloud.frames)
    elif v == "spatial":
        rgb = _ramp(j, cloud.joints)
    elif v == "person":
        if cloud.persons != 2:
            raise ValueError("person coloring needs two-person data")
        rgb = np.where((m == 1)[:, None], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0])
    elif v == "coarse_temporal":
        if scheme.segment_size > cloud.frames:
            raise ValueError(
                f"segment_size {scheme.segment_size} exceeds frame count {cloud.frames}"
            )
        s = -(-t // scheme.segment_size)  # ceil division
        S = -(-cloud.frames // scheme.segment_size)
        rgb = _ramp(s, S)
    else:
        part = scheme.partition
        if part.joints != cloud.joints:
            raise ValueError(
                f"partition covers {part.joints} joints, cloud has {cloud.joints}"
            )
        joint_to_part = np.empty(cloud.joints + 1, dtype=np.int64)
        for p, ids in enumerate(part.parts, start=1):
            joint_to_part[list(ids)] = p
        rgb = _ramp(joint_to_part[j], part.part_count)
    points = cloud.points.copy()
    points[:, 3:] = rgb
    return cloud.replaced(points, kind=v)


def cloud_from_sequence(seq: SkeletonSequence, scheme: ColorScheme) -> SkeletonCloud:
    """build_cloud + colorize in one step."""
    return colorize(build_cloud(seq), scheme)
