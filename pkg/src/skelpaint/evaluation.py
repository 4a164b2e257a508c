"""Downstream evaluation: linear probes, fine-tuning, fusion, reports.

The unsupervised protocol trains a 3-layer head on latents from a
frozen pretrained encoder; the semi- and fully-supervised protocols
fine-tune encoder and head jointly.  Probe inputs are the unmasked
clouds colorized with the stream the checkpoint was pretrained on.
Per-stream logits can be fused by averaging softmax probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import torch

from .checkpoint import Checkpoint, restore_encoder, tensors_from_module
from .coloring import ColorScheme, build_cloud, colorize
from .losses import cross_entropy
from .model import ClassifierHead, CloudEncoder, DecoderConfig, EncoderConfig, init_model
from .seeding import derive_seed, rng
from .synthetic import LabeledDataset
from .training import cosine_lr

MODES = ("unsupervised_frozen", "semi_supervised", "supervised")


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation hyperparameters (SGD + Nesterov 0.9, cosine 1e-3 -> 1e-5)."""

    mode: str = "unsupervised_frozen"
    percent: float = 100.0
    epochs: int = 200
    batch_size: int = 32
    lr_start: float = 1e-3
    lr_end: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 < self.percent <= 100.0:
            raise ValueError(f"percent must be in (0, 100], got {self.percent}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass(frozen=True)
class EvalReport:
    """Test-set results for one stream (or a fusion of streams)."""

    accuracy: float
    per_class: np.ndarray
    confusion: np.ndarray
    true: np.ndarray
    pred: np.ndarray
    logits: np.ndarray
    stream: str

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("sample_id,true,pred,stream\n")
            for i, (t, p) in enumerate(zip(self.true, self.pred), start=1):
                fh.write(f"{i},{t},{p},{self.stream}\n")
            fh.write(f"# accuracy = {self.accuracy!r}\n")
            for c, acc in enumerate(self.per_class, start=1):
                fh.write(f"# class_{c}_accuracy = {acc!r}\n")

    def write_confusion_csv(self, path) -> None:
        np.savetxt(path, self.confusion, fmt="%d", delimiter=",")

    def write_logits_csv(self, path) -> None:
        C = self.logits.shape[1]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("sample_id,true," + ",".join(f"logit_{c}" for c in range(1, C + 1)) + "\n")
            for i, (t, row) in enumerate(zip(self.true, self.logits), start=1):
                fh.write(f"{i},{t}," + ",".join(repr(float(v)) for v in row) + "\n")


def report_from_predictions(true, pred, class_count: int, logits=None, stream: str = "") -> EvalReport:
    true = np.asarray(true, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if true.size == 0:
        raise ValueError("empty test set")
    if true.shape != pred.shape:
        raise ValueError("true/pred length mismatch")
    C = class_count
    confusion = np.zeros((C, C), dtype=np.int64)
    for t, p in zip(true, pred):
        confusion[t - 1, p - 1] += 1
    totals = confusion.sum(axis=1)
    with np.errstate(invalid="ignore"):
        per_class = np.where(totals > 0, 100.0 * np.diag(confusion) / np.maximum(totals, 1), np.nan)
    accuracy = 100.0 * np.trace(confusion) / confusion.sum()
    if logits is None:
        logits = np.zeros((true.size, C))
    return EvalReport(
        accuracy=float(accuracy),
        per_class=per_class,
        confusion=confusion,
        true=true,
        pred=pred,
        logits=np.asarray(logits, dtype=np.float64),
        stream=stream,
    )


def split_semi(dataset: LabeledDataset, percent: float, seed: int) -> LabeledDataset:
    """Per-class uniform subset of max(1, round(percent*n/100)) samples."""
    if not 0.0 < percent <= 100.0:
        raise ValueError(f"percent must be in (0, 100], got {percent}")
    by_class = {}
    for i, s in enumerate(dataset.samples):
        by_class.setdefault(s.label, []).append(i)
    chosen: List[int] = []
    for c in range(1, dataset.class_count + 1):
        idx = by_class.get(c, [])
        if not idx:
            raise ValueError(f"class {c} has no samples")
        k = max(1, round(percent * len(idx) / 100.0))
        pick = rng(seed, "semi", c).choice(len(idx), size=k, replace=False)
        chosen.extend(idx[int(i)] for i in sorted(pick))
    chosen.sort()
    return LabeledDataset(
        samples=tuple(dataset.samples[i] for i in chosen),
        class_count=dataset.class_count,
        split=dataset.split,
    )


def probe_inputs(dataset: LabeledDataset, stream: str):
    """Unmasked colorized clouds + labels as training tensors."""
    scheme = ColorScheme(stream)
    clouds = [colorize(build_cloud(s), scheme) for s in dataset.samples]
    x = torch.from_numpy(np.stack([c.points for c in clouds])).float()
    y = np.array([s.label for s in dataset.samples], dtype=np.int64)
    return x, y


def random_checkpoint(
    encoder_cfg: EncoderConfig,
    output_points: int,
    stream: str,
    seed: int,
    fold_widths: tuple = (64, 64),
) -> Checkpoint:
    """Freshly initialized, never-trained encoder checkpoint.

    Uses the same derivation path as the trainer, so at an equal seed it
    reproduces the exact weights pretraining started from.
    """
    enc = init_model(CloudEncoder(encoder_cfg), derive_seed(seed, "init", "fine_encoder"))
    dec_cfg = DecoderConfig(output_points=output_points, fold_widths=fold_widths)
    return Checkpoint(
        encoder_cfg=encoder_cfg,
        decoder_cfg=dec_cfg,
        stream=stream,
        tensors=tensors_from_module(enc, "encoder."),
    )


def _train_head(latents: torch.Tensor, labels: np.ndarray, class_count: int, cfg: EvalConfig) -> ClassifierHead:
    head = init_model(
        ClassifierHead(latents.shape[1], class_count), derive_seed(cfg.seed, "init", "head")
    )
    opt = torch.optim.SGD(head.parameters(), lr=cfg.lr_start, momentum=0.9, nesterov=True)
    n = latents.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        lr = cosine_lr(epoch - 1, max(cfg.epochs - 1, 1), cfg.lr_start, cfg.lr_end)
        for g in opt.param_groups:
            g["lr"] = lr
        order = rng(cfg.seed, "head_shuffle", epoch).permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss = cross_entropy(head(latents[idx]), labels[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
    return head


def _check_labels(train: LabeledDataset):
    present = {s.label for s in train.samples}
    missing = set(range(1, train.class_count + 1)) - present
    if missing:
        raise ValueError(f"classes {sorted(missing)} absent from training labels")


def _encode_all(encoder: CloudEncoder, x: torch.Tensor, batch_size: int) -> torch.Tensor:
    encoder.eval()
    outs = []
    with torch.no_grad():
        for start in range(0, x.shape[0], batch_size):
            outs.append(encoder(x[start : start + batch_size]))
    return torch.cat(outs, dim=0)


def linear_probe(
    ckpt: Checkpoint, train: LabeledDataset, test: LabeledDataset, cfg: EvalConfig
) -> EvalReport:
    """Frozen-encoder linear evaluation.

    The encoder only ever runs under no_grad, so its parameters stay
    bitwise identical; only the 3-layer head is optimized.
    """
    _check_labels(train)
    encoder = restore_encoder(ckpt)
    for p in encoder.parameters():
        p.requires_grad_(False)
    x_train, y_train = probe_inputs(train, ckpt.stream)
    x_test, y_test = probe_inputs(test, ckpt.stream)
    z_train = _encode_all(encoder, x_train, cfg.batch_size)
    z_test = _encode_all(encoder, x_test, cfg.batch_size)
    head = _train_head(z_train, y_train, train.class_count, cfg)
    head.eval()
    with torch.no_grad():
        logits = head(z_test)
    pred = logits.argmax(dim=1).numpy() + 1
    return report_from_predictions(
        y_test, pred, train.class_count, logits=logits.numpy(), stream=ckpt.stream
    )


def finetune(
    ckpt: Checkpoint, train: LabeledDataset, test: LabeledDataset, cfg: EvalConfig
) -> EvalReport:
    """Joint encoder + head training; honors semi-supervised subsets."""
    if cfg.mode == "semi_supervised":
        train = split_semi(train, cfg.percent, cfg.seed)
    _check_labels(train)
    encoder = restore_encoder(ckpt)
    head = init_model(
        ClassifierHead(ckpt.encoder_cfg.latent_dim, train.class_count),
        derive_seed(cfg.seed, "init", "head"),
    )
    x_train, y_train = probe_inputs(train, ckpt.stream)
    x_test, y_test = probe_inputs(test, ckpt.stream)
    params = list(encoder.parameters()) + list(head.parameters())
    opt = torch.optim.SGD(params, lr=cfg.lr_start, momentum=0.9, nesterov=True)
    n = x_train.shape[0]
    encoder.train()
    head.train()
    for epoch in range(1, cfg.epochs + 1):
        lr = cosine_lr(epoch - 1, max(cfg.epochs - 1, 1), cfg.lr_start, cfg.lr_end)
        for g in opt.param_groups:
            g["lr"] = lr
        order = rng(cfg.seed, "finetune_shuffle", epoch).permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss = cross_entropy(head(encoder(x_train[idx])), y_train[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
    encoder.eval()
    head.eval()
    with torch.no_grad():
        logits = head(_encode_all(encoder, x_test, cfg.batch_size))
    pred = logits.argmax(dim=1).numpy() + 1
    return report_from_predictions(
        y_test, pred, train.class_count, logits=logits.numpy(), stream=ckpt.stream
    )


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def fuse_streams(reports: Sequence[EvalReport], how: str = "mean") -> EvalReport:
    """Combine per-stream test logits into one report.

    ``mean`` averages softmax probabilities; ``logit_sum`` adds raw
    logits.  Streams must cover the same test samples in the same order.
    """
    if not reports:
        raise ValueError("need at least one stream")
    if how not in ("mean", "logit_sum"):
        raise ValueError(f"unknown fusion {how!r}")
    first = reports[0]
    for r in reports[1:]:
        if r.logits.shape != first.logits.shape or not np.array_equal(r.true, first.true):
            raise ValueError("streams disagree on test samples")
    if how == "mean":
        fused = np.mean([_softmax(r.logits) for r in reports], axis=0)
    else:
        fused = np.sum([r.logits for r in reports], axis=0)
    pred = fused.argmax(axis=1) + 1
    C = first.logits.shape[1]
    name = "+".join(r.stream for r in reports)
    return report_from_predictions(first.true, pred, C, logits=fused, stream=name)
