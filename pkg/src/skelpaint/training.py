"""Self-supervised pretraining of repainting auto-encoders.

Two paths: the person stream trains a single encoder-decoder pair with
one Chamfer loss; the temporal and spatial streams train a fine and a
coarse pair jointly (no weight sharing), adding an MSE alignment term
between the two latents.  Inputs are masked raw clouds; targets are the
full, unmasked colorized clouds.  Masks are redrawn for every sample in
every epoch from seeds derived off the run seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import torch

from .checkpoint import Checkpoint, tensors_from_module
from .coloring import ColorScheme, SkeletonCloud, build_cloud, colorize
from .losses import mse_align
from .masking import MaskSpec, apply_mask
from .model import (
    CloudEncoder,
    DecoderConfig,
    EncoderConfig,
    FoldingDecoder,
    init_model,
)
from .seeding import derive_seed, rng
from .skeleton import BodyPartition, body_partition

_CDIST_MODE = "donot_use_mm_for_euclid_dist"

STREAMS = ("temporal", "spatial", "person")


def cosine_lr(step: int, total_steps: int, lr_start: float, lr_end: float) -> float:
    """Cosine anneal from lr_start (step 0) to lr_end (step total_steps)."""
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if total_steps < 1:
        raise ValueError("total_steps must be >= 1")
    return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + math.cos(math.pi * step / total_steps))


@dataclass(frozen=True)
class TrainConfig:
    """Pretraining hyperparameters.

    Defaults follow the published recipe (Adam, 1e-5 -> 1e-7 cosine,
    batch 24, 150 epochs, alignment weight 1).  ``segment_size`` feeds
    the coarse temporal scheme, ``partition_scale`` the coarse spatial
    one.  ``save_extras`` additionally stores the decoder and coarse
    branch in the checkpoint.
    """

    stream: str
    mask: MaskSpec
    seed: int = 0
    epochs: int = 150
    batch_size: int = 24
    lr_start: float = 1e-5
    lr_end: float = 1e-7
    align_weight: float = 1.0
    segment_size: int = 5
    partition_scale: int = 1
    partition: Optional[BodyPartition] = None
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    fold_widths: tuple = (64, 64)
    save_extras: bool = False

    def __post_init__(self):
        if self.stream not in STREAMS:
            raise ValueError(f"stream must be one of {STREAMS}, got {self.stream!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not self.lr_start >= self.lr_end > 0:
            raise ValueError("need lr_start >= lr_end > 0")
        if self.align_weight < 0:
            raise ValueError("align_weight must be >= 0")
        if self.segment_size < 1:
            raise ValueError("segment_size must be >= 1")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    chamfer_fine: float
    chamfer_coarse: float
    align: float
    lr: float
    seconds: float


@dataclass(frozen=True)
class TrainReport:
    """Per-epoch loss trace plus total wall time."""

    rows: tuple
    wall_seconds: float

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,chamfer_fine,chamfer_coarse,align,lr,seconds\n")
            for r in self.rows:
                fh.write(
                    f"{r.epoch},{r.chamfer_fine!r},{r.chamfer_coarse!r},"
                    f"{r.align!r},{r.lr!r},{r.seconds!r}\n"
                )


def chamfer_batch(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Per-sample Chamfer over a (B, n, d) batch, returned as (B,)."""
    d = torch.cdist(pred, target, compute_mode=_CDIST_MODE)
    a = d.min(dim=2).values.mean(dim=1)
    b = d.min(dim=1).values.mean(dim=1)
    return torch.maximum(a, b)


def _sequences(dataset) -> list:
    seqs = list(dataset.samples) if hasattr(dataset, "samples") else list(dataset)
    if not seqs:
        raise ValueError("empty dataset")
    T, J, M = seqs[0].frames, seqs[0].joints, seqs[0].persons
    for s in seqs:
        if (s.frames, s.joints, s.persons) != (T, J, M):
            raise ValueError(
                "all sequences must share (frames, joints, persons); "
                "resample with uniform_sample first"
            )
    return seqs


def _schemes(cfg: TrainConfig, joints: int):
    if cfg.stream == "temporal":
        return ColorScheme("temporal"), ColorScheme("coarse_temporal", segment_size=cfg.segment_size)
    if cfg.stream == "spatial":
        part = cfg.partition
        if part is None:
            part = body_partition(joints, cfg.partition_scale)
        return ColorScheme("spatial"), ColorScheme("coarse_spatial", partition=part)
    return ColorScheme("person"), None


def _to_batch(arrays: Sequence[np.ndarray]) -> torch.Tensor:
    return torch.from_numpy(np.stack(arrays)).float()


class _Run:
    """Shared plumbing for both pretraining paths."""

    def __init__(self, dataset, cfg: TrainConfig, coarse: bool):
        self.cfg = cfg
        self.seqs = _sequences(dataset)
        first = self.seqs[0]
        self.raw = [build_cloud(s) for s in self.seqs]
        fine_scheme, coarse_scheme = _schemes(cfg, first.joints)
        self.fine_scheme = fine_scheme
        self.fine_targets = [colorize(c, fine_scheme) for c in self.raw]
        self.coarse_targets = (
            [colorize(c, coarse_scheme) for c in self.raw] if coarse else None
        )
        n_points = self.raw[0].size

        enc_cfg = cfg.encoder
        dec_cfg = DecoderConfig(output_points=n_points, fold_widths=cfg.fold_widths)
        self.enc_cfg, self.dec_cfg = enc_cfg, dec_cfg
        self.fine_enc = init_model(CloudEncoder(enc_cfg), derive_seed(cfg.seed, "init", "fine_encoder"))
        self.fine_dec = init_model(
            FoldingDecoder(dec_cfg, enc_cfg.latent_dim), derive_seed(cfg.seed, "init", "fine_decoder")
        )
        modules = [self.fine_enc, self.fine_dec]
        if coarse:
            self.coarse_enc = init_model(
                CloudEncoder(enc_cfg), derive_seed(cfg.seed, "init", "coarse_encoder")
            )
            self.coarse_dec = init_model(
                FoldingDecoder(dec_cfg, enc_cfg.latent_dim),
                derive_seed(cfg.seed, "init", "coarse_decoder"),
            )
            modules += [self.coarse_enc, self.coarse_dec]
        params = [p for m in modules for p in m.parameters()]
        self.opt = torch.optim.Adam(params, lr=cfg.lr_start, betas=(0.9, 0.999), eps=1e-8)

    def masked_input(self, epoch: int, sample: int) -> np.ndarray:
        spec = self.cfg.mask.with_seed(derive_seed(self.cfg.seed, "mask", epoch, sample))
        return apply_mask(self.raw[sample], spec).masked_cloud.points

    def batches(self, epoch: int):
        order = rng(self.cfg.seed, "shuffle", epoch).permutation(len(self.seqs))
        bs = self.cfg.batch_size
        for start in range(0, len(order), bs):
            yield [int(i) for i in order[start : start + bs]]

    def set_lr(self, epoch: int):
        lr = cosine_lr(epoch - 1, max(self.cfg.epochs - 1, 1), self.cfg.lr_start, self.cfg.lr_end)
        for group in self.opt.param_groups:
            group["lr"] = lr
        return lr

    def checkpoint(self) -> Checkpoint:
        tensors = tensors_from_module(self.fine_enc, "encoder.")
        if self.cfg.save_extras:
            tensors.update(tensors_from_module(self.fine_dec, "decoder."))
            if self.coarse_targets is not None:
                tensors.update(tensors_from_module(self.coarse_enc, "coarse_encoder."))
                tensors.update(tensors_from_module(self.coarse_dec, "coarse_decoder."))
        return Checkpoint(
            encoder_cfg=self.enc_cfg,
            decoder_cfg=self.dec_cfg,
            stream=self.cfg.stream,
            tensors=tensors,
        )


def pretrain_coarse_fine(dataset, cfg: TrainConfig):
    """Two-stream pretraining for the temporal or spatial stream.

    Loss per batch: chamfer(fine) + chamfer(coarse) + weight * MSE of
    the two latents.  Only the fine encoder lands in the checkpoint
    unless save_extras is set.  Returns (Checkpoint, TrainReport).
    """
    if cfg.stream not in ("temporal", "spatial"):
        raise ValueError("coarse-fine pretraining covers temporal and spatial streams")
    run = _Run(dataset, cfg, coarse=True)
    start_all = time.perf_counter()
    rows: List[EpochStats] = []
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        lr = run.set_lr(epoch)
        sums = np.zeros(3)
        seen = 0
        for batch in run.batches(epoch):
            inputs = _to_batch([run.masked_input(epoch, i) for i in batch])
            fine_t = _to_batch([run.fine_targets[i].points for i in batch])
            coarse_t = _to_batch([run.coarse_targets[i].points for i in batch])
            f_fine = run.fine_enc(inputs)
            f_coarse = run.coarse_enc(inputs)
            ch_fine = chamfer_batch(run.fine_dec(f_fine), fine_t).mean()
            ch_coarse = chamfer_batch(run.coarse_dec(f_coarse), coarse_t).mean()
            align = mse_align(f_fine, f_coarse)
            total = ch_fine + ch_coarse + cfg.align_weight * align
            run.opt.zero_grad()
            total.backward()
            run.opt.step()
            k = len(batch)
            sums += (
                ch_fine.detach().item() * k,
                ch_coarse.detach().item() * k,
                align.detach().item() * k,
            )
            seen += k
        rows.append(
            EpochStats(
                epoch=epoch,
                chamfer_fine=float(sums[0]) / seen,
                chamfer_coarse=float(sums[1]) / seen,
                align=float(sums[2]) / seen,
                lr=lr,
                seconds=time.perf_counter() - t0,
            )
        )
    report = TrainReport(rows=tuple(rows), wall_seconds=time.perf_counter() - start_all)
    return run.checkpoint(), report


def pretrain_person(dataset, cfg: TrainConfig):
    """Single-pair pretraining on person-colorized two-person clouds."""
    if cfg.stream != "person":
        raise ValueError("pretrain_person requires stream = person")
    run = _Run(dataset, cfg, coarse=False)
    if run.seqs[0].persons != 2:
        raise ValueError("person stream needs two-person sequences")
    start_all = time.perf_counter()
    rows: List[EpochStats] = []
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        lr = run.set_lr(epoch)
        loss_sum, seen = 0.0, 0
        for batch in run.batches(epoch):
            inputs = _to_batch([run.masked_input(epoch, i) for i in batch])
            targets = _to_batch([run.fine_targets[i].points for i in batch])
            latent = run.fine_enc(inputs)
            loss = chamfer_batch(run.fine_dec(latent), targets).mean()
            run.opt.zero_grad()
            loss.backward()
            run.opt.step()
            loss_sum += loss.detach().item() * len(batch)
            seen += len(batch)
        rows.append(
            EpochStats(
                epoch=epoch,
                chamfer_fine=loss_sum / seen,
                chamfer_coarse=0.0,
                align=0.0,
                lr=lr,
                seconds=time.perf_counter() - t0,
            )
        )
    report = TrainReport(rows=tuple(rows), wall_seconds=time.perf_counter() - start_all)
    return run.checkpoint(), report
