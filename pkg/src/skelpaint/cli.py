"""Command-line entry point.

Commands: synth, colorize, mask, pretrain, probe, finetune, eval, fuse,
export-ply, gradcheck.  Runs are configured by a flat ``key = value``
text file plus ``--set key=value`` overrides; unknown keys are rejected.
Every artifact directory gets a manifest recording the resolved config
hash and seed, so a run can be reproduced exactly.  Exit codes: 0 on
success, 1 on runtime failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys

import numpy as np
import torch

from . import checkpoint as ckpt_io
from . import evaluation, losses, masking, model, synthetic, training
from .coloring import ColorScheme, SkeletonCloud, build_cloud, colorize
from .seeding import derive_seed
from .skeleton import (
    body_partition,
    center_on_root,
    read_skl,
    uniform_sample,
    write_skl,
)
from .synthetic import LabeledDataset

KNOWN_KEYS = {
    "seed",
    "data.classes",
    "data.samples_per_class",
    "data.frames",
    "data.joints",
    "data.persons",
    "data.noise_sigma",
    "data.dir",
    "data.target_frames",
    "data.center",
    "color.scheme",
    "color.segment_size",
    "color.partition_scale",
    "color.layout",
    "mask.strategy",
    "mask.param",
    "mask.seed",
    "train.stream",
    "train.epochs",
    "train.batch_size",
    "train.lr_start",
    "train.lr_end",
    "train.align_weight",
    "train.segment_size",
    "train.partition_scale",
    "train.save_extras",
    "model.profile",
    "model.k_neighbors",
    "model.layer_widths",
    "model.latent_dim",
    "model.fold_widths",
    "model.normalize",
    "eval.mode",
    "eval.percent",
    "eval.epochs",
    "eval.batch_size",
    "eval.lr_start",
    "eval.lr_end",
    "eval.fusion",
}

_MOTIONS = {
    "circle": lambda: synthetic.circle(1),
    "circle_rev": lambda: synthetic.circle(-1),
    "circle_small": lambda: synthetic.circle(1, radius=0.30),
    "circle_large": lambda: synthetic.circle(1, radius=0.46),
    "raise": lambda: synthetic.raise_line(1),
    "raise_rev": lambda: synthetic.raise_line(-1),
    "raise_low": lambda: synthetic.raise_line(1, height=0.50),
    "raise_high": lambda: synthetic.raise_line(1, height=0.90),
    "oscillate": lambda: synthetic.oscillate(),
    "twist": lambda: synthetic.twist(1),
    "twist_rev": lambda: synthetic.twist(-1),
}


class ConfigError(ValueError):
    pass


def parse_config_text(text: str, source: str = "config") -> dict:
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source} line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in cfg:
            raise ConfigError(f"{source} line {lineno}: duplicate key {key!r}")
        cfg[key] = value
    unknown = sorted(set(cfg) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"{source}: unknown keys {unknown}")
    return cfg


def load_config(path, overrides) -> dict:
    cfg = {}
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = parse_config_text(fh.read(), source=path)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        key, _, value = item.partition("=")
        key = key.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"--set: unknown key {key!r}")
        cfg[key] = value.strip()
    return cfg


def config_hash(cfg: dict) -> str:
    canon = "".join(f"{k} = {cfg[k]}\n" for k in sorted(cfg))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_manifest(out_dir, command: str, cfg: dict, artifacts) -> None:
    path = os.path.join(out_dir, "manifest.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"command = {command}\n")
        fh.write(f"config_sha256 = {config_hash(cfg)}\n")
        fh.write(f"seed = {cfg.get('seed', '0')}\n")
        for k in sorted(cfg):
            fh.write(f"config.{k} = {cfg[k]}\n")
        for a in artifacts:
            fh.write(f"artifact = {a}\n")


def _get(cfg, key, default=None, cast=str):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required config key {key!r}")
        return default
    try:
        if cast is bool:
            value = cfg[key].lower()
            if value not in ("true", "false"):
                raise ValueError("expected true/false")
            return value == "true"
        return cast(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from None


# ---------------------------------------------------------------- PLY ----


def export_ply(cloud: SkeletonCloud, path) -> None:
    """ASCII PLY with float positions and 8-bit colors.

    Vertices are written in ascending (t, j, m) provenance order;
    positions keep full precision via repr, colors are round(255 * c).
    """
    prov = cloud.prov
    order = np.lexsort((prov[:, 2], prov[:, 1], prov[:, 0]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("ply\n")
        fh.write("format ascii 1.0\n")
        fh.write(f"element vertex {cloud.size}\n")
        for axis in ("x", "y", "z"):
            fh.write(f"property float {axis}\n")
        for chan in ("red", "green", "blue"):
            fh.write(f"property uchar {chan}\n")
        fh.write("end_header\n")
        for i in order:
            x, y, z, r, g, b = (float(v) for v in cloud.points[i])
            fh.write(
                f"{x!r} {y!r} {z!r} "
                f"{round(255 * r)} {round(255 * g)} {round(255 * b)}\n"
            )


def read_ply(path):
    """Read back an exported cloud: (positions, colors in [0,1])."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "ply":
        raise ValueError(f"{path}: not a PLY file")
    count = None
    body_at = None
    for i, line in enumerate(lines[1:], start=1):
        fields = line.split()
        if fields[:2] == ["element", "vertex"]:
            count = int(fields[2])
        if line == "end_header":
            body_at = i + 1
            break
    if count is None or body_at is None:
        raise ValueError(f"{path}: missing vertex element or end_header")
    rows = [ln.split() for ln in lines[body_at : body_at + count]]
    if len(rows) != count:
        raise ValueError(f"{path}: expected {count} vertices, found {len(rows)}")
    positions = np.array([[float(v) for v in r[:3]] for r in rows])
    colors = np.array([[int(v) / 255.0 for v in r[3:6]] for r in rows])
    return positions, colors


# ------------------------------------------------------------- helpers ----


def _load_sequences(cfg: dict):
    """Sequences named by the data.* keys: a directory of SKL files or
    a synthetic dataset (train split).  Returns (train, test) datasets;
    test is None for directory input without labels."""
    target = _get(cfg, "data.target_frames", default=0, cast=int)
    center = _get(cfg, "data.center", default=False, cast=bool)
    if "data.dir" in cfg:
        root = cfg["data.dir"]
        names = sorted(f for f in os.listdir(root) if f.endswith(".skl"))
        if not names:
            raise ConfigError(f"data.dir {root!r} holds no .skl files")
        seqs = [read_skl(os.path.join(root, f)) for f in names]
        if target:
            seqs = [uniform_sample(s, target) for s in seqs]
        if center:
            seqs = [center_on_root(s) for s in seqs]
        labels = [s.label for s in seqs]
        if all(l is not None for l in labels):
            train = LabeledDataset(samples=tuple(seqs), class_count=max(labels), split="train")
            return train, None
        return list(seqs), None
    names = _get(cfg, "data.classes",
                 default="circle_small,circle_large,raise_low,raise_high").split(",")
    specs = []
    for n in names:
        n = n.strip()
        if n not in _MOTIONS:
            raise ConfigError(f"unknown motion class {n!r} (have {sorted(_MOTIONS)})")
        specs.append(_MOTIONS[n]())
    train, test = synthetic.generate_synthetic(
        specs,
        samples_per_class=_get(cfg, "data.samples_per_class", default=25, cast=int),
        T=_get(cfg, "data.frames", default=20, cast=int),
        J=_get(cfg, "data.joints", default=15, cast=int),
        noise_sigma=_get(cfg, "data.noise_sigma", default=0.01, cast=float),
        seed=derive_seed(_get(cfg, "seed", default=0, cast=int), "data"),
        persons=_get(cfg, "data.persons", default=1, cast=int),
    )
    return train, test


def _encoder_config(cfg: dict, n_points: int):
    profile = _get(cfg, "model.profile", default="desk")
    if profile == "paper":
        enc, dec = model.paper_profile(n_points)
        fold = dec.fold_widths
    elif profile == "desk":
        enc = model.EncoderConfig()
        fold = (64, 64)
    else:
        raise ConfigError(f"model.profile must be desk or paper, got {profile!r}")
    widths = _get(cfg, "model.layer_widths", default=",".join(map(str, enc.layer_widths)))
    enc = model.EncoderConfig(
        k_neighbors=_get(cfg, "model.k_neighbors", default=enc.k_neighbors, cast=int),
        layer_widths=tuple(int(w) for w in widths.split(",")),
        latent_dim=_get(cfg, "model.latent_dim", default=enc.latent_dim, cast=int),
        normalize=_get(cfg, "model.normalize", default=enc.normalize, cast=bool),
    )
    fold_str = _get(cfg, "model.fold_widths", default=",".join(map(str, fold)))
    return enc, tuple(int(w) for w in fold_str.split(","))


def _mask_spec(cfg: dict, joints: int, scale: int) -> masking.MaskSpec:
    strategy = _get(cfg, "mask.strategy", default="segment")
    param = _get(cfg, "mask.param", cast=float)
    partition = None
    if strategy == "body_part":
        partition = body_partition(joints, scale)
    return masking.MaskSpec(
        strategy=strategy,
        param=param,
        seed=_get(cfg, "mask.seed", default=0, cast=int),
        partition=partition,
    )


def _scheme_from_config(cfg: dict, cloud: SkeletonCloud) -> ColorScheme:
    name = _get(cfg, "color.scheme", default="temporal")
    if name == "coarse_temporal":
        return ColorScheme(name, segment_size=_get(cfg, "color.segment_size", default=5, cast=int))
    if name == "coarse_spatial":
        scale = _get(cfg, "color.partition_scale", default=1, cast=int)
        layout = cfg.get("color.layout")
        return ColorScheme(name, partition=body_partition(cloud.joints, scale, layout))
    return ColorScheme(name)


# ------------------------------------------------------------ commands ----


def _cmd_synth(args):
    cfg = load_config(args.config, args.set)
    if args.seed is not None:
        cfg["seed"] = str(args.seed)
    train, test = _load_sequences(cfg)
    if test is None:
        raise ConfigError("synth needs synthetic data.* keys, not data.dir")
    os.makedirs(args.out, exist_ok=True)
    artifacts = []
    for split_name, ds in (("train", train), ("test", test)):
        split_dir = os.path.join(args.out, split_name)
        os.makedirs(split_dir, exist_ok=True)
        for i, seq in enumerate(ds.samples, start=1):
            name = f"sample_{i:04d}.skl"
            write_skl(os.path.join(split_dir, name), seq)
            artifacts.append(f"{split_name}/{name}")
    write_manifest(args.out, "synth", cfg, artifacts)
    print(f"wrote {len(train.samples)} train + {len(test.samples)} test sequences to {args.out}")
    return 0


def _cloud_from_file(args, cfg):
    seq = read_skl(args.infile)
    if _get(cfg, "data.center", default=False, cast=bool):
        seq = center_on_root(seq)
    target = _get(cfg, "data.target_frames", default=0, cast=int)
    if target:
        seq = uniform_sample(seq, target)
    return build_cloud(seq)


def _cmd_colorize(args):
    cfg = load_config(args.config, args.set)
    if args.scheme:
        cfg["color.scheme"] = args.scheme
    raw = _cloud_from_file(args, cfg)
    cloud = colorize(raw, _scheme_from_config(cfg, raw))
    export_ply(cloud, args.out)
    _single_file_manifest(args.out, "colorize", cfg)
    print(f"wrote {cloud.size} colorized points to {args.out}")
    return 0


def _cmd_export_ply(args):
    cfg = load_config(args.config, args.set)
    if args.scheme:
        cfg["color.scheme"] = args.scheme
    raw = _cloud_from_file(args, cfg)
    scheme_name = cfg.get("color.scheme", "raw")
    cloud = raw if scheme_name == "raw" else colorize(raw, _scheme_from_config(cfg, raw))
    export_ply(cloud, args.out)
    _single_file_manifest(args.out, "export-ply", cfg)
    print(f"wrote {cloud.size} points to {args.out}")
    return 0


def _cmd_mask(args):
    cfg = load_config(args.config, args.set)
    if args.scheme:
        cfg["color.scheme"] = args.scheme
    raw = _cloud_from_file(args, cfg)
    cloud = raw if cfg.get("color.scheme") == "raw" else colorize(raw, _scheme_from_config(cfg, raw))
    scale = _get(cfg, "train.partition_scale", default=1, cast=int)
    result = masking.apply_mask(cloud, _mask_spec(cfg, cloud.joints, scale))
    export_ply(result.masked_cloud, args.out)
    _single_file_manifest(args.out, "mask", cfg)
    print(f"masked {result.masked_indices.size} of {cloud.size} points, wrote {args.out}")
    return 0


def _single_file_manifest(out_path, command, cfg):
    out_dir = os.path.dirname(os.path.abspath(out_path))
    manifest = os.path.join(out_dir, os.path.basename(out_path) + ".manifest")
    with open(manifest, "w", encoding="utf-8") as fh:
        fh.write(f"command = {command}\n")
        fh.write(f"config_sha256 = {config_hash(cfg)}\n")
        fh.write(f"seed = {cfg.get('seed', '0')}\n")
        fh.write(f"artifact = {os.path.basename(out_path)}\n")


def _train_config(cfg: dict, dataset) -> training.TrainConfig:
    first = dataset.samples[0] if hasattr(dataset, "samples") else dataset[0]
    n_points = first.frames * first.joints * first.persons
    enc, fold = _encoder_config(cfg, n_points)
    scale = _get(cfg, "train.partition_scale", default=1, cast=int)
    return training.TrainConfig(
        stream=_get(cfg, "train.stream", default="temporal"),
        mask=_mask_spec(cfg, first.joints, scale),
        seed=_get(cfg, "seed", default=0, cast=int),
        epochs=_get(cfg, "train.epochs", default=150, cast=int),
        batch_size=_get(cfg, "train.batch_size", default=24, cast=int),
        lr_start=_get(cfg, "train.lr_start", default=1e-5, cast=float),
        lr_end=_get(cfg, "train.lr_end", default=1e-7, cast=float),
        align_weight=_get(cfg, "train.align_weight", default=1.0, cast=float),
        segment_size=_get(cfg, "train.segment_size", default=5, cast=int),
        partition_scale=scale,
        encoder=enc,
        fold_widths=fold,
        save_extras=_get(cfg, "train.save_extras", default=False, cast=bool),
    )


def _cmd_pretrain(args):
    cfg = load_config(args.config, args.set)
    if args.seed is not None:
        cfg["seed"] = str(args.seed)
    train, _ = _load_sequences(cfg)
    tcfg = _train_config(cfg, train)
    if tcfg.stream == "person":
        ckpt, report = training.pretrain_person(train, tcfg)
    else:
        ckpt, report = training.pretrain_coarse_fine(train, tcfg)
    os.makedirs(args.out, exist_ok=True)
    ckpt_path = os.path.join(args.out, "checkpoint.skpt")
    ckpt_io.save_checkpoint(ckpt_path, ckpt)
    report.write_csv(os.path.join(args.out, "metrics.csv"))
    write_manifest(args.out, "pretrain", cfg, ["checkpoint.skpt", "metrics.csv"])
    last = report.rows[-1]
    print(
        f"pretrained {tcfg.stream} stream for {tcfg.epochs} epochs in "
        f"{report.wall_seconds:.1f}s; final chamfer {last.chamfer_fine:.4f}"
    )
    return 0


def _eval_config(cfg: dict, mode: str) -> evaluation.EvalConfig:
    return evaluation.EvalConfig(
        mode=mode,
        percent=_get(cfg, "eval.percent", default=100.0, cast=float),
        epochs=_get(cfg, "eval.epochs", default=200, cast=int),
        batch_size=_get(cfg, "eval.batch_size", default=32, cast=int),
        lr_start=_get(cfg, "eval.lr_start", default=1e-3, cast=float),
        lr_end=_get(cfg, "eval.lr_end", default=1e-5, cast=float),
        seed=_get(cfg, "seed", default=0, cast=int),
    )


def _checkpoint_for_eval(args, cfg, dataset):
    if args.random_init:
        first = dataset.samples[0]
        n_points = first.frames * first.joints * first.persons
        enc, fold = _encoder_config(cfg, n_points)
        stream = _get(cfg, "train.stream", default="temporal")
        seed = _get(cfg, "seed", default=0, cast=int)
        return evaluation.random_checkpoint(enc, n_points, stream, seed, fold_widths=fold)
    if not args.checkpoint:
        raise ConfigError("need --checkpoint or --random-init")
    return ckpt_io.load_checkpoint(args.checkpoint)


def _run_eval(args, mode: str, command: str):
    cfg = load_config(args.config, args.set)
    if args.seed is not None:
        cfg["seed"] = str(args.seed)
    train, test = _load_sequences(cfg)
    if test is None:
        raise ConfigError(f"{command} needs labeled train/test data (synthetic data.* keys)")
    ckpt = _checkpoint_for_eval(args, cfg, train)
    ecfg = _eval_config(cfg, mode)
    if mode == "unsupervised_frozen":
        report = evaluation.linear_probe(ckpt, train, test, ecfg)
    else:
        report = evaluation.finetune(ckpt, train, test, ecfg)
    os.makedirs(args.out, exist_ok=True)
    report.write_csv(os.path.join(args.out, "report.csv"))
    report.write_confusion_csv(os.path.join(args.out, "confusion.csv"))
    report.write_logits_csv(os.path.join(args.out, "logits.csv"))
    write_manifest(args.out, command, cfg, ["report.csv", "confusion.csv", "logits.csv"])
    print(f"{command} accuracy {report.accuracy:.2f}% on {report.true.size} test samples")
    return 0


def _cmd_probe(args):
    return _run_eval(args, "unsupervised_frozen", "probe")


def _cmd_finetune(args):
    cfg = load_config(args.config, args.set)
    mode = _get(cfg, "eval.mode", default="supervised")
    if mode == "unsupervised_frozen":
        raise ConfigError("finetune needs eval.mode semi_supervised or supervised")
    return _run_eval(args, mode, "finetune")


def _cmd_eval(args):
    cfg = load_config(args.config, args.set)
    mode = _get(cfg, "eval.mode", default="unsupervised_frozen")
    return _run_eval(args, mode, "eval")


def _cmd_fuse(args):
    cfg = load_config(args.config, args.set)
    how = _get(cfg, "eval.fusion", default="mean")
    reports = []
    for path in args.inputs:
        true, logits = _read_logits_csv(path)
        C = logits.shape[1]
        pred = logits.argmax(axis=1) + 1
        stream = os.path.splitext(os.path.basename(path))[0]
        reports.append(
            evaluation.report_from_predictions(true, pred, C, logits=logits, stream=stream)
        )
    fused = evaluation.fuse_streams(reports, how=how)
    os.makedirs(args.out, exist_ok=True)
    fused.write_csv(os.path.join(args.out, "report.csv"))
    fused.write_confusion_csv(os.path.join(args.out, "confusion.csv"))
    fused.write_logits_csv(os.path.join(args.out, "logits.csv"))
    write_manifest(args.out, "fuse", cfg, ["report.csv", "confusion.csv", "logits.csv"])
    print(f"fused {len(reports)} streams: accuracy {fused.accuracy:.2f}%")
    return 0


def _read_logits_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    if header[:2] != ["sample_id", "true"]:
        raise ValueError(f"{path}: expected a logits CSV (sample_id,true,logit_*)")
    true, logits = [], []
    for ln in lines[1:]:
        fields = ln.split(",")
        true.append(int(fields[1]))
        logits.append([float(v) for v in fields[2:]])
    return np.array(true, dtype=np.int64), np.array(logits)


def _cmd_gradcheck(args):
    torch.manual_seed(args.seed)
    gen = np.random.Generator(np.random.PCG64(args.seed))

    p = gen.normal(size=(6, 6))
    q = gen.normal(size=(6, 6))

    def chamfer_wrt_q(theta):
        return losses.chamfer(torch.as_tensor(p), theta.reshape(6, 6))

    err_chamfer = losses.grad_check(chamfer_wrt_q, q.ravel(), probe_count=args.probes, step=args.step)

    enc_cfg = model.EncoderConfig(k_neighbors=3, layer_widths=(8, 12), latent_dim=16)
    dec_cfg = model.DecoderConfig(output_points=8, fold_widths=(8, 8))
    enc = model.init_model(model.CloudEncoder(enc_cfg), derive_seed(args.seed, "init", "gc_enc")).double()
    dec = model.init_model(
        model.FoldingDecoder(dec_cfg, enc_cfg.latent_dim), derive_seed(args.seed, "init", "gc_dec")
    ).double()
    cloud = torch.as_tensor(gen.normal(size=(8, 6)))
    target = torch.as_tensor(gen.normal(size=(8, 6)))
    vector = torch.nn.utils.parameters_to_vector(
        list(enc.parameters()) + list(dec.parameters())
    ).detach()
    enc_shapes = [(n, tuple(p.shape)) for n, p in enc.named_parameters()]
    dec_shapes = [(n, tuple(p.shape)) for n, p in dec.named_parameters()]

    def full_model(theta):
        # slice theta back into named parameters so the loss stays
        # differentiable in theta (assignment would cut the graph)
        pos = 0

        def take(shapes):
            nonlocal pos
            params = {}
            for name, shape in shapes:
                count = 1
                for s in shape:
                    count *= s
                params[name] = theta[pos : pos + count].reshape(shape)
                pos += count
            return params

        latent = torch.func.functional_call(enc, take(enc_shapes), (cloud,))
        out = torch.func.functional_call(dec, take(dec_shapes), (latent,))
        return losses.chamfer(out, target)

    err_model = losses.grad_check(full_model, vector, probe_count=args.probes, step=args.step)

    print(f"chamfer gradient max relative error: {err_chamfer:.3e}")
    print(f"encoder+decoder gradient max relative error: {err_model:.3e}")
    ok = err_chamfer < 1e-4 and err_model < 1e-3
    print("gradcheck " + ("PASSED" if ok else "FAILED"))
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skelpaint",
        description="Skeleton-cloud colorization pretraining pipeline",
    )
    parser.add_argument("--threads", type=int, default=None, help="cap torch worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="flat key = value config file")
            p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset as SKL files")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=_cmd_synth)

    for name, fn, help_text in (
        ("colorize", _cmd_colorize, "colorize a sequence and export a PLY cloud"),
        ("export-ply", _cmd_export_ply, "export a cloud (raw by default) as PLY"),
        ("mask", _cmd_mask, "apply a mask to a (colorized) cloud and export PLY"),
    ):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--in", dest="infile", required=True, help="input .skl file")
        p.add_argument("--out", required=True, help="output .ply file")
        p.add_argument("--scheme", help="color scheme (overrides color.scheme)")
        p.set_defaults(fn=fn)

    p = sub.add_parser("pretrain", help="self-supervised repainting pretraining")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=_cmd_pretrain)

    for name, fn, help_text in (
        ("probe", _cmd_probe, "frozen-encoder linear probe"),
        ("finetune", _cmd_finetune, "supervised or semi-supervised fine-tuning"),
        ("eval", _cmd_eval, "evaluation protocol chosen by eval.mode"),
    ):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--checkpoint", help="pretrained checkpoint (.skpt)")
        p.add_argument("--random-init", action="store_true", help="use a fresh random encoder")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.set_defaults(fn=fn)

    p = sub.add_parser("fuse", help="fuse per-stream logits CSVs into one report")
    common(p)
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="logits.csv files")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_fuse)

    p = sub.add_parser("gradcheck", help="finite-difference check of the differentiable core")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--probes", type=int, default=24)
    p.add_argument("--step", type=float, default=1e-4)
    p.set_defaults(fn=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads:
        torch.set_num_threads(args.threads)
    try:
        return args.fn(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
