"""Mask sampling for masked repainting pretraining.

Five strategies pick which cloud points to hide: a random fraction of
points, whole frames, one contiguous frame segment, whole joints, or
whole body parts.  Hidden points have all six values set to zero; the
selection is resampled per sample per epoch via the spec seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .coloring import SkeletonCloud
from .seeding import rng
from .skeleton import BodyPartition

STRATEGIES = ("random", "frame_only", "segment", "joint_only", "body_part")


@dataclass(frozen=True)
class MaskSpec:
    """One mask draw.

    ``param`` means: random -> ratio in (0,1); frame_only -> frame
    count; segment -> segment length in frames; joint_only -> joint
    count; body_part -> part count (needs ``partition``).
    """

    strategy: str
    param: float
    seed: int = 0
    partition: Optional[BodyPartition] = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown mask strategy {self.strategy!r}")
        if self.strategy == "random":
            if not 0.0 < self.param < 1.0:
                raise ValueError(f"random mask ratio must be in (0,1), got {self.param}")
        else:
            if self.param != int(self.param) or self.param < 1:
                raise ValueError(
                    f"{self.strategy} mask needs a positive integer count, got {self.param}"
                )
        if self.strategy == "body_part" and self.partition is None:
            raise ValueError("body_part masking needs a partition")

    def with_seed(self, seed: int) -> "MaskSpec":
        return MaskSpec(
            strategy=self.strategy, param=self.param, seed=seed, partition=self.partition
        )


@dataclass(frozen=True)
class MaskResult:
    """Masked cloud plus the sorted indices of the zeroed points."""

    masked_cloud: SkeletonCloud
    masked_indices: np.ndarray


def apply_mask(cloud: SkeletonCloud, spec: MaskSpec) -> MaskResult:
    """Zero out the points selected by ``spec``.

    Pure function of (cloud, spec): the same seed gives the same mask.
    Selections are without replacement; the segment window is clipped
    at the sequence ends rather than wrapping.
    """
    T, J, M = cloud.frames, cloud.joints, cloud.persons
    n = cloud.size
    r = rng(spec.seed, "mask")
    t, j = cloud.prov[:, 0], cloud.prov[:, 1]

    if spec.strategy == "random":
        count = round(spec.param * n)
        chosen = r.choice(n, size=count, replace=False)
        hit = np.zeros(n, dtype=bool)
        hit[chosen] = True
    elif spec.strategy == "frame_only":
        count = int(spec.param)
        if count > T:
            raise ValueError(f"cannot mask {count} of {T} frames")
        frames = r.choice(T, size=count, replace=False) + 1
        hit = np.isin(t, frames)
    elif spec.strategy == "segment":
        length = int(spec.param)
        if length > T:
            raise ValueError(f"segment length {length} exceeds {T} frames")
        center = int(r.integers(1, T + 1))
        lo = max(1, center - (length - 1) // 2)
        hi = min(T, center + length // 2)
        hit = (t >= lo) & (t <= hi)
    elif spec.strategy == "joint_only":
        count = int(spec.param)
        if count > J:
            raise ValueError(f"cannot mask {count} of {J} joints")
        joints = r.choice(J, size=count, replace=False) + 1
        hit = np.isin(j, joints)
    else:
        part = spec.partition
        count = int(spec.param)
        if part.joints != J:
            raise ValueError(f"partition covers {part.joints} joints, cloud has {J}")
        if count > part.part_count:
            raise ValueError(f"cannot mask {count} of {part.part_count} parts")
        picked = r.choice(part.part_count, size=count, replace=False) + 1
        union = sorted(set().union(*(part.parts[p - 1] for p in picked)))
        hit = np.isin(j, union)

    points = cloud.points.copy()
    points[hit] = 0.0
    return MaskResult(
        masked_cloud=cloud.replaced(points, kind="masked"),
        masked_indices=np.flatnonzero(hit),
    )
