"""Losses for repainting pretraining and classification.

Chamfer distance compares predicted and target clouds over the full
six-dimensional (position + color) vectors with plain (non-squared)
Euclidean distances, taking the max of the two directed means.  Latent
alignment is an MSE between encoder outputs.  All functions accept
torch tensors and stay differentiable; numpy arrays are converted.
"""

from __future__ import annotations

import numpy as np
import torch

# exact euclidean distances; the matmul shortcut loses too much precision
# for oracle-level comparisons
_CDIST_MODE = "donot_use_mm_for_euclid_dist"


def _as_tensor(x, name):
    if isinstance(x, torch.Tensor):
        t = x
    else:
        t = torch.as_tensor(np.asarray(x))
    if t.dtype not in (torch.float32, torch.float64):
        t = t.double()
    if not torch.isfinite(t).all():
        raise ValueError(f"{name} contains non-finite values")
    return t


def chamfer(pred, target) -> torch.Tensor:
    """max of the two directed mean nearest-neighbor distances.

    Both arguments are (n, d) point sets (d is 6 for skeleton clouds).
    Zero iff the two sets cover each other exactly.  At nearest-neighbor
    ties the gradient follows the lowest-index minimizer.
    """
    p = _as_tensor(pred, "pred")
    q = _as_tensor(target, "target")
    if p.ndim != 2 or q.ndim != 2:
        raise ValueError("point sets must be 2-D (points, channels)")
    if p.shape[0] == 0 or q.shape[0] == 0:
        raise ValueError("point sets must be non-empty")
    if p.shape[1] != q.shape[1]:
        raise ValueError(f"channel mismatch: {p.shape[1]} vs {q.shape[1]}")
    if p.dtype != q.dtype:
        p, q = p.double(), q.double()
    d = torch.cdist(p, q, compute_mode=_CDIST_MODE)
    a = d.min(dim=1).values.mean()
    b = d.min(dim=0).values.mean()
    return torch.maximum(a, b)


def mse_align(fine, coarse) -> torch.Tensor:
    """Mean squared difference between two latent vectors."""
    a = _as_tensor(fine, "fine")
    b = _as_tensor(coarse, "coarse")
    if a.shape != b.shape:
        raise ValueError(f"latent shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.dtype != b.dtype:
        a, b = a.double(), b.double()
    return ((b - a) ** 2).mean()


def cross_entropy(logits, label) -> torch.Tensor:
    """Negative log softmax probability of the 1-based true class.

    ``logits`` may be a single (C,) vector with an int label, or a
    (B, C) batch with a length-B label array; batches return the mean.
    Computed with max-subtraction so large logits cannot overflow.
    """
    z = _as_tensor(logits, "logits")
    if z.ndim == 1:
        z = z[None, :]
        labels = torch.as_tensor([int(label)])
    else:
        labels = torch.as_tensor(np.asarray(label)).long().reshape(-1)
        if labels.shape[0] != z.shape[0]:
            raise ValueError(f"{labels.shape[0]} labels for {z.shape[0]} rows")
    C = z.shape[1]
    if C < 2:
        raise ValueError("need at least 2 classes")
    if (labels < 1).any() or (labels > C).any():
        raise ValueError(f"labels must lie in [1, {C}]")
    shifted = z - z.max(dim=1, keepdim=True).values
    log_prob = shifted - shifted.exp().sum(dim=1, keepdim=True).log()
    picked = log_prob[torch.arange(z.shape[0]), labels - 1]
    return -picked.mean()


def grad_check(loss_fn, params, probe_count: int = 16, step: float = 1e-4, seed: int = 0) -> float:
    """Compare autograd derivatives of ``loss_fn`` to central differences.

    ``loss_fn`` maps a 1-D float64 parameter vector to a scalar tensor.
    Probes ``probe_count`` randomly chosen coordinates (all of them if
    the vector is short) and returns the worst relative error
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    """
    theta = _as_tensor(params, "params").detach().double().clone().reshape(-1)
    theta.requires_grad_(True)
    value = loss_fn(theta)
    if not torch.isfinite(value):
        raise ValueError(f"loss is non-finite at the probe point: {value}")
    (grad,) = torch.autograd.grad(value, theta)

    dim = theta.numel()
    if probe_count >= dim:
        probes = np.arange(dim)
    else:
        probes = np.random.Generator(np.random.PCG64(seed)).choice(
            dim, size=probe_count, replace=False
        )
    worst = 0.0
    with torch.no_grad():
        base = theta.detach()
        for i in probes:
            e = torch.zeros_like(base)
            e[i] = step
            hi = loss_fn(base + e)
            lo = loss_fn(base - e)
            if not (torch.isfinite(hi) and torch.isfinite(lo)):
                raise ValueError(f"loss is non-finite near coordinate {i}")
            numeric = float((hi - lo) / (2.0 * step))
            analytic = float(grad[i])
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
