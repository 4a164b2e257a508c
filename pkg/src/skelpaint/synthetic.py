"""Synthetic labeled motion sequences for desk-scale experiments.

Each motion class is a deterministic trajectory generator plus per-sample
parameter jitter (phase, amplitude, placement) and optional Gaussian
coordinate noise.  Classes built from the same path traversed in
opposite directions (circle vs. reversed circle) produce identical
unordered point sets, so they can only be told apart once temporal
structure is encoded.  That makes them a sharp test bed for
order-colorization pretraining.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .seeding import rng
from .skeleton import SkeletonSequence


def rest_pose(joints: int) -> np.ndarray:
    """Deterministic (J, 3) base pose: a loose helix, roughly body sized."""
    j = np.arange(joints, dtype=np.float64)
    theta = 2.0 * np.pi * 1.7 * j / joints
    span = max(joints - 1, 1)
    return np.stack(
        [0.3 * np.cos(theta), 0.3 * np.sin(theta), 0.8 * j / span - 0.4], axis=1
    )


@dataclass(frozen=True)
class Motion:
    """A named motion class.

    ``params(rng)`` draws per-sample variation; ``offset(t, T, params)``
    gives the rigid displacement at frame t (1-based).  Non-rigid
    motions supply ``frame_fn(t, T, joints, params)`` for the full pose
    instead.
    """

    name: str
    params: Callable
    offset: Callable
    frame_fn: Callable = None

    def frame(self, t: int, T: int, joints: int, p: dict) -> np.ndarray:
        if self.frame_fn is not None:
            return self.frame_fn(t, T, joints, p)
        return rest_pose(joints) + self.offset(t, T, p)


def _placement(r):
    return {
        "phase": r.uniform(0.0, 2.0 * np.pi),
        "scale": r.uniform(0.85, 1.15),
        "center": r.uniform(-0.1, 0.1, size=3),
    }


def circle(direction: int = 1, radius: float = 0.5) -> Motion:
    """Rigid translation around a horizontal circle, one full turn.

    direction=-1 traverses the same circle the opposite way: the two
    classes cover the same positions frame-for-frame as sets.
    """

    def offset(t, T, p):
        ang = p["phase"] + direction * 2.0 * np.pi * (t - 1) / T
        r = radius * p["scale"]
        return p["center"] + np.array([r * np.cos(ang), r * np.sin(ang), 0.0])

    name = "circle" if direction >= 0 else "circle_rev"
    return Motion(name=name, params=_placement, offset=offset)


def raise_line(direction: int = 1, height: float = 0.8) -> Motion:
    """Rigid vertical translation, bottom-to-top (or reversed)."""

    def offset(t, T, p):
        frac = (t - 1) / max(T - 1, 1)
        if direction < 0:
            frac = 1.0 - frac
        return p["center"] + np.array([0.0, 0.0, height * p["scale"] * frac])

    name = "raise" if direction >= 0 else "raise_rev"
    return Motion(name=name, params=_placement, offset=offset)


def oscillate(cycles: float = 2.0, amount: float = 0.4) -> Motion:
    """Sideways sinusoidal sway."""

    def offset(t, T, p):
        frac = (t - 1) / max(T - 1, 1)
        y = amount * p["scale"] * np.sin(2.0 * np.pi * cycles * frac + p["phase"])
        return p["center"] + np.array([0.0, y, 0.0])

    return Motion(name="oscillate", params=_placement, offset=offset)


def twist(direction: int = 1, max_angle: float = 0.5 * np.pi) -> Motion:
    """Rotation of the pose about its vertical axis."""

    def frame_fn(t, T, joints, p):
        ang = direction * max_angle * (t - 1) / max(T - 1, 1)
        c, s = np.cos(ang), np.sin(ang)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return rest_pose(joints) @ rot.T + p["center"]

    name = "twist" if direction >= 0 else "twist_rev"
    return Motion(name=name, params=_placement, offset=None, frame_fn=frame_fn)


@dataclass(frozen=True)
class LabeledDataset:
    """A list of labeled sequences forming one split."""

    samples: tuple
    class_count: int
    split: str

    def __post_init__(self):
        for s in self.samples:
            if s.label is None or not 1 <= s.label <= self.class_count:
                raise ValueError(f"label {s.label} outside [1, {self.class_count}]")

    def __len__(self):
        return len(self.samples)


def generate_synthetic(
    class_specs: Sequence[Motion],
    samples_per_class: int,
    T: int,
    J: int,
    noise_sigma: float = 0.0,
    seed: int = 0,
    persons: int = 1,
):
    """Build a labeled synthetic dataset, split 80/20 per class.

    Returns (train, test) LabeledDatasets.  Pure function of its
    arguments: the same seed always yields bitwise-identical data.
    With persons=2 a second, independently parameterized actor of the
    same class is placed beside the first.
    """
    if len(class_specs) < 2:
        raise ValueError("need at least 2 classes")
    if samples_per_class < 5:
        raise ValueError(f"samples_per_class must be >= 5 to split, got {samples_per_class}")
    if persons not in (1, 2):
        raise ValueError(f"persons must be 1 or 2, got {persons}")

    per_class = []
    for c, spec in enumerate(class_specs, start=1):
        seqs = []
        for s in range(1, samples_per_class + 1):
            r = rng(seed, "synth", c, s)
            coords = np.empty((T, persons, J, 3), dtype=np.float64)
            for m in range(persons):
                p = spec.params(r)
                if m == 1:
                    p["center"] = p["center"] + np.array([0.9, 0.0, 0.0])
                for t in range(1, T + 1):
                    coords[t - 1, m] = spec.frame(t, T, J, p)
            if noise_sigma > 0.0:
                coords = coords + r.normal(0.0, noise_sigma, size=coords.shape)
            seqs.append(SkeletonSequence(coords=coords, label=c))
        per_class.append(seqs)

    n_test = max(1, round(samples_per_class * 0.2))
    train, test = [], []
    for seqs in per_class:
        train.extend(seqs[: samples_per_class - n_test])
        test.extend(seqs[samples_per_class - n_test :])
    C = len(class_specs)
    return (
        LabeledDataset(samples=tuple(train), class_count=C, split="train"),
        LabeledDataset(samples=tuple(test), class_count=C, split="test"),
    )
