"""Skeleton-cloud colorization pretraining toolkit.

Skeleton sequences are flattened into unordered 3D point clouds whose
points carry synthetic colors encoding where each point came from
(frame, joint, or person).  Masked auto-encoders are trained to repaint
those colors, and the resulting encoders are evaluated with linear
probes and fine-tuning.
"""

from .skeleton import SkeletonSequence, read_skl, write_skl, uniform_sample
from .coloring import SkeletonCloud, build_cloud, order_color, colorize
from .masking import MaskSpec, MaskResult, apply_mask

__all__ = [
    "SkeletonSequence",
    "read_skl",
    "write_skl",
    "uniform_sample",
    "SkeletonCloud",
    "build_cloud",
    "order_color",
    "colorize",
    "MaskSpec",
    "MaskResult",
    "apply_mask",
]
