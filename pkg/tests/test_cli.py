"""End-to-end command-line behavior on tiny workloads."""

import os
import subprocess
import sys

import numpy as np
import pytest

from skelpaint import cli
from skelpaint.checkpoint import load_checkpoint
from skelpaint.cli import ConfigError, config_hash, export_ply, parse_config_text, read_ply
from skelpaint.coloring import ColorScheme, build_cloud, colorize
from skelpaint.skeleton import read_skl

TINY = [
    "data.classes = circle,raise",
    "data.samples_per_class = 5",
    "data.frames = 8",
    "data.joints = 15",
    "data.noise_sigma = 0.0",
    "mask.strategy = segment",
    "mask.param = 3",
    "train.epochs = 2",
    "train.batch_size = 4",
    "train.lr_start = 0.001",
    "train.lr_end = 0.0001",
    "model.layer_widths = 8,8",
    "model.latent_dim = 16",
    "model.k_neighbors = 4",
    "model.fold_widths = 8,8",
    "eval.epochs = 5",
]


def write_tiny_config(tmp_path, extra=()):
    path = tmp_path / "run.cfg"
    path.write_text("\n".join(TINY + list(extra)) + "\n")
    return str(path)


def test_parse_config_text_basics():
    cfg = parse_config_text("# comment\n\nseed = 3\ndata.frames = 20  # trailing\n")
    assert cfg == {"seed": "3", "data.frames": "20"}


def test_parse_config_rejects_duplicates_and_unknown():
    with pytest.raises(ConfigError):
        parse_config_text("seed = 1\nseed = 2\n")
    with pytest.raises(ConfigError):
        parse_config_text("data.fames = 20\n")
    with pytest.raises(ConfigError):
        parse_config_text("just words\n")


def test_config_hash_is_order_independent():
    a = config_hash({"seed": "1", "data.frames": "20"})
    b = config_hash({"data.frames": "20", "seed": "1"})
    assert a == b
    assert a != config_hash({"seed": "2", "data.frames": "20"})


def test_set_override_beats_file(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("seed = 1\n")
    cfg = cli.load_config(str(path), ["seed=9"])
    assert cfg["seed"] == "9"
    with pytest.raises(ConfigError):
        cli.load_config(str(path), ["nonsense=1"])


def test_ply_round_trip_exact_positions(tmp_path):
    from skelpaint import synthetic

    train, _ = synthetic.generate_synthetic(
        [synthetic.circle(1), synthetic.raise_line(1)], 5, T=4, J=15, seed=3
    )
    cloud = colorize(build_cloud(train.samples[0]), ColorScheme("temporal"))
    path = tmp_path / "cloud.ply"
    export_ply(cloud, path)
    positions, colors = read_ply(path)
    prov = cloud.prov
    order = np.lexsort((prov[:, 2], prov[:, 1], prov[:, 0]))
    np.testing.assert_array_equal(positions, cloud.points[order, :3])
    np.testing.assert_allclose(colors, cloud.points[order, 3:], atol=0.5 / 255)


def test_synth_writes_skl_and_manifest(tmp_path):
    cfg = write_tiny_config(tmp_path)
    out = tmp_path / "data"
    assert cli.main(["synth", "--config", cfg, "--out", str(out), "--seed", "5"]) == 0
    train_files = sorted(os.listdir(out / "train"))
    test_files = sorted(os.listdir(out / "test"))
    assert len(train_files) == 8 and len(test_files) == 2
    seq = read_skl(out / "train" / train_files[0])
    assert seq.frames == 8 and seq.joints == 15
    assert seq.label in (1, 2)
    manifest = (out / "manifest.txt").read_text()
    assert "command = synth" in manifest
    assert "seed = 5" in manifest
    assert "config_sha256 = " in manifest


def test_default_classes_are_paired_motions(tmp_path):
    # no data.classes line: the default four-class set kicks in
    lines = [l for l in TINY if not l.startswith("data.classes")]
    path = tmp_path / "d.cfg"
    path.write_text("\n".join(lines) + "\n")
    out = tmp_path / "data"
    assert cli.main(["synth", "--config", str(path), "--out", str(out)]) == 0
    labels = {read_skl(out / "train" / f).label for f in os.listdir(out / "train")}
    assert labels == {1, 2, 3, 4}
    assert len(os.listdir(out / "train")) == 16


def test_colorize_and_mask_commands(tmp_path):
    cfg = write_tiny_config(tmp_path)
    data = tmp_path / "data"
    cli.main(["synth", "--config", cfg, "--out", str(data)])
    skl = str(data / "train" / sorted(os.listdir(data / "train"))[0])

    ply = tmp_path / "colored.ply"
    assert cli.main(["colorize", "--config", cfg, "--in", skl, "--out", str(ply)]) == 0
    _, colors = read_ply(ply)
    assert colors.sum() > 0
    assert (tmp_path / "colored.ply.manifest").exists()

    raw_ply = tmp_path / "raw.ply"
    assert cli.main(["export-ply", "--config", cfg, "--in", skl, "--out", str(raw_ply)]) == 0
    _, raw_colors = read_ply(raw_ply)
    assert raw_colors.sum() == 0

    masked = tmp_path / "masked.ply"
    assert cli.main(
        ["mask", "--config", cfg, "--scheme", "temporal", "--in", skl, "--out", str(masked)]
    ) == 0
    positions, colors = read_ply(masked)
    gone = np.all(positions == 0.0, axis=1) & np.all(colors == 0.0, axis=1)
    assert gone.sum() > 0


def test_pretrain_then_probe_pipeline(tmp_path):
    cfg = write_tiny_config(tmp_path)
    run = tmp_path / "run"
    assert cli.main(["pretrain", "--config", cfg, "--out", str(run), "--seed", "2"]) == 0
    ck = load_checkpoint(run / "checkpoint.skpt")
    assert ck.stream == "temporal"
    assert ck.encoder_cfg.latent_dim == 16
    metrics = (run / "metrics.csv").read_text().splitlines()
    assert metrics[0] == "epoch,chamfer_fine,chamfer_coarse,align,lr,seconds"
    assert len(metrics) == 3
    assert "command = pretrain" in (run / "manifest.txt").read_text()

    probe = tmp_path / "probe"
    rc = cli.main(
        [
            "probe",
            "--config",
            cfg,
            "--checkpoint",
            str(run / "checkpoint.skpt"),
            "--out",
            str(probe),
            "--seed",
            "2",
        ]
    )
    assert rc == 0
    report = (probe / "report.csv").read_text()
    assert "# accuracy = " in report
    assert (probe / "confusion.csv").exists()
    logits = (probe / "logits.csv").read_text().splitlines()
    assert logits[0] == "sample_id,true,logit_1,logit_2"

    rnd = tmp_path / "rnd"
    assert cli.main(
        ["probe", "--config", cfg, "--random-init", "--out", str(rnd), "--seed", "2"]
    ) == 0
    assert (rnd / "report.csv").exists()


def test_probe_needs_some_checkpoint(tmp_path):
    cfg = write_tiny_config(tmp_path)
    assert cli.main(["probe", "--config", cfg, "--out", str(tmp_path / "x")]) == 1


def test_finetune_rejects_frozen_mode(tmp_path):
    cfg = write_tiny_config(tmp_path, extra=["eval.mode = unsupervised_frozen"])
    rc = cli.main(
        ["finetune", "--config", cfg, "--random-init", "--out", str(tmp_path / "ft")]
    )
    assert rc == 1


def test_finetune_semi_supervised_runs(tmp_path):
    cfg = write_tiny_config(
        tmp_path, extra=["eval.mode = semi_supervised", "eval.percent = 50"]
    )
    rc = cli.main(
        ["finetune", "--config", cfg, "--random-init", "--out", str(tmp_path / "ft")]
    )
    assert rc == 0


def test_fuse_command(tmp_path):
    from skelpaint.evaluation import report_from_predictions

    a = report_from_predictions([1, 2], [1, 2], 2, logits=np.array([[2.0, 0.0], [0.0, 2.0]]))
    b = report_from_predictions([1, 2], [2, 2], 2, logits=np.array([[0.5, 1.0], [0.0, 3.0]]))
    pa, pb = tmp_path / "temporal.csv", tmp_path / "spatial.csv"
    a.write_logits_csv(pa)
    b.write_logits_csv(pb)
    out = tmp_path / "fused"
    assert cli.main(["fuse", "--in", str(pa), str(pb), "--out", str(out)]) == 0
    text = (out / "report.csv").read_text()
    assert "temporal+spatial" in text


def test_unknown_config_key_exits_1(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("data.bogus = 1\n")
    assert cli.main(["synth", "--config", str(path), "--out", str(tmp_path / "o")]) == 1


def test_missing_required_mask_param_exits_1(tmp_path):
    lines = [l for l in TINY if not l.startswith("mask.param")]
    path = tmp_path / "nomask.cfg"
    path.write_text("\n".join(lines) + "\n")
    assert cli.main(["pretrain", "--config", str(path), "--out", str(tmp_path / "o")]) == 1


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as err:
        cli.main(["no-such-command"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        cli.main(["pretrain", "--no-such-flag"])
    assert err.value.code == 2


def test_help_exits_0():
    with pytest.raises(SystemExit) as err:
        cli.main(["--help"])
    assert err.value.code == 0


def test_gradcheck_command_passes(capsys):
    assert cli.main(["gradcheck", "--probes", "12"]) == 0
    out = capsys.readouterr().out
    assert "PASSED" in out


def test_console_script_installed():
    proc = subprocess.run(
        [sys.executable, "-m", "skelpaint.cli", "--help"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0
    assert "skelpaint" in proc.stdout


def test_data_dir_input_round_trip(tmp_path):
    cfg = write_tiny_config(tmp_path)
    data = tmp_path / "data"
    cli.main(["synth", "--config", cfg, "--out", str(data)])
    # reload the written SKL directory as a labeled dataset
    dir_cfg = {"data.dir": str(data / "train")}
    train, test = cli._load_sequences(dir_cfg)
    assert test is None
    assert len(train.samples) == 8
    assert train.class_count == 2
